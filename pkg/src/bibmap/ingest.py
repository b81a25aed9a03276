"""RIS ingest, the RIS-subset writer, citation sidecar attachment, and
corpus merging.

RIS subset understood by the parser (everything else lands in Reference.extra
verbatim and survives the round trip):

  TY        record start; value mapped to ref_type (JOUR/CONF/CPAPER/BOOK/...)
  ID        stable record id (minted as "<source>-<seq>" when absent)
  AU        author, one tag per author, file order kept
  TI / T1   title (TI preferred)
  PY / Y1   year; the first 4-digit run wins ("2002", "2002///", "2008/10//")
  JO / JF / T2  venue (first of that priority order)
  VL        volume
  SP / EP   pages (joined as "SP-EP")
  AB / N2   abstract (AB preferred)
  KW        keyword, one tag per keyword
  ER        record terminator

Citation counts do NOT travel in RIS (no standard tag); they come from a
sidecar CSV with header `key,citations`, keyed by normalized title.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import re
from dataclasses import dataclass, replace

from bibmap.errors import RisParseError, SidecarError
from bibmap.records import MIN_YEAR, Corpus, ProvenanceLedger, Reference
from bibmap.textnorm import normalize_key

_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])  -( (.*))?$")
_YEAR_RE = re.compile(r"\d{4}")

_TY_TO_TYPE = {
    "JOUR": "journal",
    "CONF": "conference",
    "CPAPER": "conference",
    "BOOK": "book",
    "CHAP": "book",
    "EBOOK": "book",
}
_TYPE_TO_TY = {"journal": "JOUR", "conference": "CONF", "book": "BOOK", "other": "GEN"}

# Tags consumed into Reference fields; anything else is preserved in `extra`.
_KNOWN_TAGS = {"TY", "ID", "AU", "TI", "T1", "PY", "Y1", "JO", "JF", "T2",
               "VL", "SP", "EP", "AB", "N2", "KW", "ER"}


@dataclass(frozen=True)
class RejectedRecord:
    """A record the parser refused (currently: missing title)."""

    line: int
    reason: str
    tags: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class IngestResult:
    corpus: Corpus
    rejected: tuple[RejectedRecord, ...]


def _decode(data: bytes) -> str:
    """UTF-8 with BOM tolerated; undecodable bytes are a hard error (silent
    mojibake would corrupt dedup keys)."""
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise RisParseError(f"undecodable UTF-8 byte at offset {exc.start}", line)


def _pick(tags: list[tuple[str, str]], *names: str) -> str | None:
    """First value for the first tag name (priority order) that has one."""
    for name in names:
        for tag, value in tags:
            if tag == name and value:
                return value
    return None


def _extract_year(tags: list[tuple[str, str]]) -> tuple[int | None, list[tuple[str, str]]]:
    """First valid 4-digit run across PY then Y1 values; unusable raw values
    are returned so they can be kept in `extra` instead of being lost."""
    current_year = _dt.date.today().year
    raws = [(tag, value) for tag, value in tags if tag in ("PY", "Y1") and value]
    for _tag, value in sorted(raws, key=lambda tv: tv[0] != "PY"):
        m = _YEAR_RE.search(value)
        if m and MIN_YEAR <= int(m.group()) <= current_year:
            return int(m.group()), []
    return None, raws


def _record_to_reference(tags: list[tuple[str, str]], source_db: str, seq: int) -> Reference:
    title = _pick(tags, "TI", "T1")
    if not title:
        raise ValueError("record has no title (TI/T1)")

    year, bad_years = _extract_year(tags)
    sp, ep = _pick(tags, "SP"), _pick(tags, "EP")
    pages = f"{sp}-{ep}" if sp and ep else sp or ep

    extra: dict[str, list[str]] = {}
    for tag, value in tags:
        if tag not in _KNOWN_TAGS:
            extra.setdefault(tag, []).append(value)
    for tag, value in bad_years:
        extra.setdefault(tag, []).append(value)

    ty = _pick(tags, "TY") or ""
    return Reference(
        id=_pick(tags, "ID") or f"{source_db}-{seq:05d}",
        title=title,
        source_db=source_db,
        authors=tuple(v for t, v in tags if t == "AU" and v),
        year=year,
        venue=_pick(tags, "JO", "JF", "T2"),
        volume=_pick(tags, "VL"),
        pages=pages,
        abstract=_pick(tags, "AB", "N2"),
        keywords=tuple(v for t, v in tags if t == "KW" and v),
        ref_type=_TY_TO_TYPE.get(ty.upper(), "other"),
        extra=tuple((tag, tuple(vals)) for tag, vals in extra.items()),
    )


def parse_ris(data: bytes, source_db: str,
              retrieval_date: _dt.date | None = None) -> IngestResult:
    """Parse one database export into a corpus with an "ingest" ledger entry.

    Records lacking a title are rejected into the result's error report, not
    silently dropped; an unterminated record is a hard parse error.
    """
    text = _decode(data)
    records: list[tuple[int, list[tuple[str, str]]]] = []  # (start line, tags)
    current: list[tuple[str, str]] | None = None
    start_line = 0
    last_content_line = 0

    for line_no, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line.rstrip("\r")
        if not line.strip():
            continue
        last_content_line = line_no
        m = _TAG_RE.match(line)
        if current is None:
            if m is None:
                raise RisParseError(f"unexpected content outside a record: {line[:40]!r}", line_no)
            if m.group(1) != "TY":
                raise RisParseError(f"record must start with TY, found {m.group(1)}", line_no)
            current = [("TY", m.group(3) or "")]
            start_line = line_no
            continue
        if m is None:
            # continuation of the previous value (long fields wrap)
            if not current:
                raise RisParseError("continuation line before any tag", line_no)
            tag, value = current[-1]
            current[-1] = (tag, f"{value} {line.strip()}" if value else line.strip())
            continue
        tag, value = m.group(1), m.group(3) or ""
        if tag == "ER":
            records.append((start_line, current))
            current = None
        else:
            current.append((tag, value))

    if current is not None:
        raise RisParseError(
            f"record starting at line {start_line} not terminated by ER", last_content_line
        )

    references: list[Reference] = []
    rejected: list[RejectedRecord] = []
    for seq, (line, tags) in enumerate(records, start=1):
        try:
            references.append(_record_to_reference(tags, source_db, seq))
        except ValueError as exc:
            rejected.append(RejectedRecord(line=line, reason=str(exc), tags=tuple(tags)))

    ledger = ProvenanceLedger().append(
        "ingest", len(records), len(rejected),
        {"source_db": source_db, "records": len(records), "rejected": len(rejected)},
    )
    corpus = Corpus(references=tuple(references), ledger=ledger, retrieval_date=retrieval_date)
    return IngestResult(corpus=corpus, rejected=tuple(rejected))


def write_ris(references, target=None) -> bytes:
    """Serialize references (or a Corpus) to the RIS subset.

    Emits ID so parse_ris(write_ris(c)) keeps ids stable. citation_count and
    source_db are intentionally not representable here; use the native corpus
    format for full fidelity.
    """
    out = io.StringIO()
    for ref in references:
        out.write(f"TY  - {_TYPE_TO_TY[ref.ref_type]}\n")
        out.write(f"ID  - {ref.id}\n")
        for author in ref.authors:
            out.write(f"AU  - {author}\n")
        out.write(f"TI  - {ref.title}\n")
        if ref.year is not None:
            out.write(f"PY  - {ref.year}\n")
        if ref.venue:
            out.write(f"JO  - {ref.venue}\n")
        if ref.volume:
            out.write(f"VL  - {ref.volume}\n")
        if ref.pages:
            sp, sep, ep = ref.pages.partition("-")
            out.write(f"SP  - {sp}\n")
            if sep:
                out.write(f"EP  - {ep}\n")
        if ref.abstract:
            out.write(f"AB  - {ref.abstract}\n")
        for kw in ref.keywords:
            out.write(f"KW  - {kw}\n")
        for tag, values in ref.extra:
            for value in values:
                out.write(f"{tag}  - {value}\n")
        out.write("ER  - \n\n")
    data = out.getvalue().encode("utf-8")
    if target is not None:
        with open(target, "wb") as fh:
            fh.write(data)
    return data


def load_citation_sidecar(data: bytes) -> list[tuple[str, int]]:
    """Read the `key,citations` CSV into (key, count) rows, order kept."""
    text = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SidecarError("sidecar is empty (expected header `key,citations`)")
    if [h.strip().lower() for h in header[:2]] != ["key", "citations"]:
        raise SidecarError(f"sidecar header must be `key,citations`, got {header!r}")
    rows: list[tuple[str, int]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise SidecarError(f"sidecar row {line_no} has no count column")
        try:
            count = int(row[1])
        except ValueError:
            raise SidecarError(f"sidecar row {line_no}: count {row[1]!r} is not an integer")
        if count < 0:
            raise SidecarError(f"sidecar row {line_no}: negative count {count}")
        rows.append((row[0], count))
    return rows


@dataclass(frozen=True)
class AttachResult:
    corpus: Corpus
    attached: int
    orphans: tuple[str, ...]  # sidecar keys that matched no reference


def attach_citations(corpus: Corpus, sidecar: list[tuple[str, int]]) -> AttachResult:
    """Attach citation counts by normalized-title key.

    Duplicate sidecar keys with conflicting counts are an error; references
    without a sidecar row keep citation_count absent.
    """
    counts: dict[str, int] = {}
    conflicts: dict[str, set[int]] = {}
    for key, count in sidecar:
        norm = normalize_key(key)
        if norm in counts and counts[norm] != count:
            conflicts.setdefault(norm, {counts[norm]}).add(count)
        counts[norm] = count
    if conflicts:
        listing = "; ".join(f"{k!r}: {sorted(v)}" for k, v in sorted(conflicts.items()))
        raise SidecarError(f"conflicting duplicate sidecar keys: {listing}")

    matched_keys: set[str] = set()
    new_refs = []
    attached = 0
    for ref in corpus.references:
        key = normalize_key(ref.title)
        if key in counts:
            matched_keys.add(key)
            attached += 1
            new_refs.append(replace(ref, citation_count=counts[key]))
        else:
            new_refs.append(ref)

    orphans = tuple(normalize_key(k) for k, _ in sidecar if normalize_key(k) not in matched_keys)
    new_corpus = corpus.evolve(
        tuple(new_refs), "citations",
        {"rows": len(sidecar), "attached": attached, "orphans": len(orphans)},
    )
    return AttachResult(corpus=new_corpus, attached=attached, orphans=orphans)


def merge_corpora(parts: list[Corpus],
                  retrieval_date: _dt.date | None = None) -> Corpus:
    """Concatenate per-database corpora (dedup happens later, in curation).

    Colliding ids are re-minted deterministically by suffixing `~2`, `~3`, ...
    in encounter order; a re-minted id cannot collide because the suffix is
    bumped until free.
    """
    merged: list[Reference] = []
    seen: set[str] = set()
    per_source: dict[str, int] = {}
    for part in parts:
        for ref in part.references:
            rid = ref.id
            bump = 2
            while rid in seen:
                rid = f"{ref.id}~{bump}"
                bump += 1
            seen.add(rid)
            merged.append(ref if rid == ref.id else replace(ref, id=rid))
            per_source[ref.source_db] = per_source.get(ref.source_db, 0) + 1

    if retrieval_date is None:
        dates = [p.retrieval_date for p in parts if p.retrieval_date is not None]
        retrieval_date = max(dates) if dates else None

    ledger = ProvenanceLedger().append(
        "merge", len(merged), 0,
        {"per_source": per_source, "parts": [len(p) for p in parts]},
    )
    return Corpus(references=tuple(merged), ledger=ledger, retrieval_date=retrieval_date)
