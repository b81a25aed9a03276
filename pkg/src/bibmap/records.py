"""Core record types: Reference, ProvenanceLedger, Corpus, and the native
line-delimited corpus file.

The native corpus format (see docs/formats.md) is one self-contained JSON
object per line, discriminated by a "record" key:

    {"record": "header", "version": 1, "retrieval_date": "2016-04-26"}
    {"record": "reference", "id": "...", ...}            one per reference
    {"record": "ledger", "stage": "...", ...}            one per ledger entry

The format is append-friendly, diff-able, and stable across versions; it is
the only serialization that preserves every Reference field (RIS drops
citation_count and source_db by design).
"""

from __future__ import annotations

import datetime as _dt
import functools
import hashlib
import json
from dataclasses import dataclass, field, replace

from bibmap.errors import LedgerError

REF_TYPES = ("journal", "conference", "book", "other")

MIN_YEAR = 1800


def _params_digest(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Reference:
    """One bibliographic record with normalized metadata and provenance.

    `extra` holds RIS tags the mapper does not model, keyed by tag, values in
    file order; they survive the RIS round trip untouched.
    """

    id: str
    title: str
    source_db: str
    authors: tuple[str, ...] = ()
    year: int | None = None
    venue: str | None = None
    volume: str | None = None
    pages: str | None = None
    abstract: str | None = None
    keywords: tuple[str, ...] = ()
    citation_count: int | None = None
    ref_type: str = "other"
    extra: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        if not self.title:
            raise ValueError("reference requires a title")
        if self.ref_type not in REF_TYPES:
            raise ValueError(f"unknown ref_type {self.ref_type!r}")
        if self.citation_count is not None and self.citation_count < 0:
            raise ValueError("citation_count must be >= 0")
        if self.year is not None and not (MIN_YEAR <= self.year <= _dt.date.today().year):
            raise ValueError(f"year {self.year} outside [{MIN_YEAR}, current year]")

    @property
    def populated_field_count(self) -> int:
        """Richness score used by dedup tie-breaking: populated optional fields."""
        score = 0
        score += bool(self.authors)
        score += self.year is not None
        score += self.venue is not None
        score += self.volume is not None
        score += self.pages is not None
        score += self.abstract is not None
        score += bool(self.keywords)
        score += self.citation_count is not None
        return score

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "title": self.title,
            "source_db": self.source_db,
            "authors": list(self.authors),
            "year": self.year,
            "venue": self.venue,
            "volume": self.volume,
            "pages": self.pages,
            "abstract": self.abstract,
            "keywords": list(self.keywords),
            "citation_count": self.citation_count,
            "ref_type": self.ref_type,
        }
        if self.extra:
            d["extra"] = [[tag, list(vals)] for tag, vals in self.extra]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Reference":
        return cls(
            id=d["id"],
            title=d["title"],
            source_db=d["source_db"],
            authors=tuple(d.get("authors") or ()),
            year=d.get("year"),
            venue=d.get("venue"),
            volume=d.get("volume"),
            pages=d.get("pages"),
            abstract=d.get("abstract"),
            keywords=tuple(d.get("keywords") or ()),
            citation_count=d.get("citation_count"),
            ref_type=d.get("ref_type", "other"),
            extra=tuple((tag, tuple(vals)) for tag, vals in d.get("extra") or ()),
        )


@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    input: int
    removed: int
    output: int
    params: dict = field(default_factory=dict)
    digest: str = ""
    timestamp: str = ""

    def __post_init__(self):
        if self.input - self.removed != self.output:
            raise LedgerError(
                f"ledger entry {self.stage!r}: {self.input} - {self.removed} != {self.output}"
            )
        if not self.digest:
            object.__setattr__(self, "digest", _params_digest(self.params))
        if not self.timestamp:
            object.__setattr__(self, "timestamp", _now_iso())

    def to_dict(self) -> dict:
        return {
            "record": "ledger",
            "stage": self.stage,
            "input": self.input,
            "removed": self.removed,
            "output": self.output,
            "params": self.params,
            "digest": self.digest,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerEntry":
        return cls(
            stage=d["stage"],
            input=d["input"],
            removed=d["removed"],
            output=d["output"],
            params=d.get("params", {}),
            digest=d.get("digest", ""),
            timestamp=d.get("timestamp", ""),
        )


@dataclass(frozen=True)
class ProvenanceLedger:
    """Append-only accounting of every curation action.

    Invariant: entries chain (output of entry k = input of entry k+1) and
    each entry satisfies input - removed = output.
    """

    entries: tuple[LedgerEntry, ...] = ()

    def append(self, stage: str, input: int, removed: int, params: dict | None = None) -> "ProvenanceLedger":
        entry = LedgerEntry(stage=stage, input=input, removed=removed,
                            output=input - removed, params=params or {})
        if self.entries and self.entries[-1].output != entry.input:
            raise LedgerError(
                f"ledger chain broken at {stage!r}: previous output "
                f"{self.entries[-1].output}, new input {entry.input}"
            )
        return ProvenanceLedger(self.entries + (entry,))

    def verify(self, current_size: int) -> None:
        """Raise LedgerError unless the chain reconciles with the corpus size."""
        prev_out = None
        for entry in self.entries:
            if entry.input - entry.removed != entry.output:
                raise LedgerError(f"entry {entry.stage!r} does not reconcile")
            if prev_out is not None and entry.input != prev_out:
                raise LedgerError(f"chain broken before {entry.stage!r}")
            prev_out = entry.output
        if self.entries:
            initial = self.entries[0].input
            total_removed = sum(e.removed for e in self.entries)
            if initial - total_removed != current_size:
                raise LedgerError(
                    f"ledger totals do not reconcile: {initial} - {total_removed} "
                    f"!= corpus size {current_size}"
                )
            if self.entries[-1].output != current_size:
                raise LedgerError("last ledger output differs from corpus size")


@dataclass(frozen=True)
class Corpus:
    """Ordered reference collection plus its provenance ledger."""

    references: tuple[Reference, ...] = ()
    ledger: ProvenanceLedger = field(default_factory=ProvenanceLedger)
    retrieval_date: _dt.date | None = None

    def __post_init__(self):
        seen = set()
        for ref in self.references:
            if ref.id in seen:
                raise ValueError(f"duplicate reference id {ref.id!r}")
            seen.add(ref.id)

    def __len__(self) -> int:
        return len(self.references)

    def __iter__(self):
        return iter(self.references)

    def by_id(self, ref_id: str) -> Reference:
        for ref in self.references:
            if ref.id == ref_id:
                return ref
        raise KeyError(ref_id)

    def ids(self) -> list[str]:
        return [r.id for r in self.references]

    @functools.cached_property
    def digest(self) -> str:
        """Order-sensitive identity of the reference set (not of the ledger).
        Cached: sessions re-verify it on every draw, and the references
        tuple never changes once the corpus is built."""
        h = hashlib.sha256()
        for ref in self.references:
            h.update(ref.id.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]

    def evolve(self, references: tuple[Reference, ...], stage: str,
               params: dict | None = None) -> "Corpus":
        """New corpus with `references`, ledgering the size delta under `stage`."""
        removed = len(self.references) - len(references)
        if removed < 0:
            raise LedgerError(f"stage {stage!r} grew the corpus; use a fresh ingest")
        ledger = self.ledger.append(stage, len(self.references), removed, params)
        return Corpus(references=references, ledger=ledger,
                      retrieval_date=self.retrieval_date)

    def verify_ledger(self) -> None:
        self.ledger.verify(len(self.references))


def save_corpus(corpus: Corpus, path) -> None:
    """Write the native line-delimited corpus file (docs/formats.md)."""
    lines = [json.dumps({
        "record": "header",
        "version": 1,
        "retrieval_date": corpus.retrieval_date.isoformat() if corpus.retrieval_date else None,
    }, sort_keys=True)]
    for ref in corpus.references:
        lines.append(json.dumps({"record": "reference", **ref.to_dict()}, sort_keys=True))
    for entry in corpus.ledger.entries:
        lines.append(json.dumps(entry.to_dict(), sort_keys=True))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_corpus(path) -> Corpus:
    refs: list[Reference] = []
    entries: list[LedgerEntry] = []
    retrieval: _dt.date | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LedgerError(f"{path}: line {line_no} is not valid JSON: {exc}")
            kind = obj.get("record")
            if kind == "header":
                if obj.get("retrieval_date"):
                    retrieval = _dt.date.fromisoformat(obj["retrieval_date"])
            elif kind == "reference":
                refs.append(Reference.from_dict(obj))
            elif kind == "ledger":
                entries.append(LedgerEntry.from_dict(obj))
            else:
                raise LedgerError(f"{path}: line {line_no} has unknown record kind {kind!r}")
    return Corpus(references=tuple(refs),
                  ledger=ProvenanceLedger(tuple(entries)),
                  retrieval_date=retrieval)


def replace_reference(ref: Reference, **changes) -> Reference:
    return replace(ref, **changes)
