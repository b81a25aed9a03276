"""Declarative replication pipelines.

A pipeline file is plain text: `key = value` globals at the top, then an
ordered list of `[stage]` blocks. Supported stages, in protocol order:

    [ingest]                source = <db tag>, file = <path.ris>   (repeatable)
    [citations]             file = <sidecar.csv>
    [dedup]                 priority = a, b, ...; pass2-year-window = 1|none
    [drop-authorless]
    [exclude]               rules = <file>; verdicts = <csv, optional>
    [counts]                from = <year>, to = <year>
    [cumulative-citations]  from = <year>, to = <year>
    [fit]                   series = counts|citations; t0 = <year>; optional
                            max-degree, alpha-enter, alpha-exit
    [categories]            specs = <file>
    [report]

Stage order must be non-decreasing in that list. Paths are resolved against
the config file's directory. Every stage is content-addressed: a manifest in
the output directory records each stage's input digest, and a re-run with
unchanged inputs executes zero stages.

When an exclude stage flags references that have no verdict yet, the run
halts: the flagged references are written out as a sub-corpus, a qa-audit
session sized to judge all of them is journaled next to it, and the command
to serve that session is printed. Once the session is complete (or a
verdicts CSV is supplied), re-running the pipeline picks the verdicts up
(related means keep, false-positive means remove) and continues.
"""

from __future__ import annotations

import csv as _csv
import datetime as _dt
import hashlib
import json
import os
from dataclasses import dataclass, field

from bibmap import report as report_mod
from bibmap import rulefiles
from bibmap.curation import DedupPolicy, dedup, remove_authorless, apply_exclusions
from bibmap.errors import CurationError, PipelineError, ReviewRequired
from bibmap.ingest import attach_citations, load_citation_sidecar, merge_corpora, parse_ris
from bibmap.records import Corpus, load_corpus, save_corpus
from bibmap.sessions import FALSE_POSITIVE, RELATED, ReviewSession, load_session
from bibmap.trends import (CategorySpec, counts_per_year,
                           cumulative_citations_per_year, fit_stepwise)
from bibmap.ingest import write_ris
from bibmap.queries import parse_query

_STAGE_RANK = {
    "ingest": 0, "citations": 1, "dedup": 2, "drop-authorless": 3,
    "exclude": 4, "counts": 5, "cumulative-citations": 5,
    "fit": 6, "categories": 6, "report": 7,
}

_STAGE_KEYS = {
    "ingest": {"source", "file"},
    "citations": {"file"},
    "dedup": {"priority", "pass2-year-window"},
    "drop-authorless": set(),
    "exclude": {"rules", "verdicts"},
    "counts": {"from", "to"},
    "cumulative-citations": {"from", "to"},
    "fit": {"series", "t0", "max-degree", "alpha-enter", "alpha-exit"},
    "categories": {"specs"},
    "report": set(),
}

_GLOBAL_KEYS = {"seed", "output", "retrieval_date"}


@dataclass(frozen=True)
class Stage:
    kind: str
    params: dict
    lineno: int


@dataclass(frozen=True)
class PipelineConfig:
    base_dir: str
    seed: int
    output: str
    retrieval_date: _dt.date | None
    stages: tuple[Stage, ...]

    def path(self, relative: str) -> str:
        return os.path.normpath(os.path.join(self.base_dir, relative))

    @property
    def out_dir(self) -> str:
        return self.path(self.output)


def _parse_int(value: str, what: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise PipelineError(f"line {lineno}: {what} must be an integer, got {value!r}")


def _parse_float(value: str, what: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise PipelineError(f"line {lineno}: {what} must be a number, got {value!r}")


def parse_pipeline_config(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    base_dir = os.path.dirname(os.path.abspath(path))

    seed = 0
    output = "out"
    retrieval_date: _dt.date | None = None
    stages: list[Stage] = []
    current: Stage | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            kind = line[1:-1].strip()
            if kind not in _STAGE_RANK:
                raise PipelineError(f"line {lineno}: unknown stage [{kind}]")
            current = Stage(kind=kind, params={}, lineno=lineno)
            stages.append(current)
            continue
        if "=" not in line:
            raise PipelineError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if current is None:
            if key not in _GLOBAL_KEYS:
                raise PipelineError(f"line {lineno}: unknown global key {key!r}")
            if key == "seed":
                seed = _parse_int(value, "seed", lineno)
            elif key == "output":
                output = value
            else:
                try:
                    retrieval_date = _dt.date.fromisoformat(value)
                except ValueError:
                    raise PipelineError(
                        f"line {lineno}: retrieval_date must be YYYY-MM-DD, got {value!r}")
        else:
            if key not in _STAGE_KEYS[current.kind]:
                raise PipelineError(
                    f"line {lineno}: stage [{current.kind}] does not take {key!r}")
            if key in current.params:
                raise PipelineError(f"line {lineno}: duplicate key {key!r}")
            current.params[key] = value

    if not stages:
        raise PipelineError("pipeline has no stages")
    if stages[0].kind != "ingest":
        raise PipelineError("pipeline must start with an [ingest] stage")
    last_rank = -1
    for stage in stages:
        rank = _STAGE_RANK[stage.kind]
        if rank < last_rank:
            raise PipelineError(
                f"line {stage.lineno}: stage [{stage.kind}] is out of protocol order")
        last_rank = rank

    config = PipelineConfig(base_dir=base_dir, seed=seed, output=output,
                            retrieval_date=retrieval_date, stages=tuple(stages))
    _validate_stages(config)
    return config


def _require(stage: Stage, key: str) -> str:
    if key not in stage.params:
        raise PipelineError(f"line {stage.lineno}: stage [{stage.kind}] needs {key!r}")
    return stage.params[key]


def _validate_stages(config: PipelineConfig) -> None:
    fit_series_available: set[str] = set()
    for stage in config.stages:
        if stage.kind == "ingest":
            _require(stage, "source")
            _check_file(config, stage, _require(stage, "file"))
        elif stage.kind == "citations":
            _check_file(config, stage, _require(stage, "file"))
        elif stage.kind == "exclude":
            _check_file(config, stage, _require(stage, "rules"))
            if "verdicts" in stage.params:
                _check_file(config, stage, stage.params["verdicts"])
        elif stage.kind == "categories":
            _check_file(config, stage, _require(stage, "specs"))
        elif stage.kind in ("counts", "cumulative-citations"):
            lo = _parse_int(_require(stage, "from"), "from", stage.lineno)
            hi = _parse_int(_require(stage, "to"), "to", stage.lineno)
            if lo > hi:
                raise PipelineError(f"line {stage.lineno}: year range reversed")
            fit_series_available.add(
                "counts" if stage.kind == "counts" else "citations")
        elif stage.kind == "fit":
            series = _require(stage, "series")
            if series not in ("counts", "citations"):
                raise PipelineError(
                    f"line {stage.lineno}: fit series must be counts or citations")
            if series not in fit_series_available:
                raise PipelineError(
                    f"line {stage.lineno}: fit over {series!r} needs the matching "
                    f"series stage earlier in the pipeline")
            _parse_int(_require(stage, "t0"), "t0", stage.lineno)


def _check_file(config: PipelineConfig, stage: Stage, relative: str) -> None:
    path = config.path(relative)
    if not os.path.isfile(path):
        raise PipelineError(
            f"line {stage.lineno}: file {relative!r} not found (looked at {path})")


# -- execution ----------------------------------------------------------------


@dataclass
class PipelineResult:
    out_dir: str
    executed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _stage_digest(parts: list) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:16]


class _Manifest:
    def __init__(self, out_dir: str):
        self.path = os.path.join(out_dir, "manifest.json")
        self.data: dict = {"stages": {}}
        if os.path.isfile(self.path):
            try:
                with open(self.path, "r", encoding="utf-8") as fh:
                    self.data = json.load(fh)
            except (json.JSONDecodeError, OSError):
                self.data = {"stages": {}}
        self.data.setdefault("stages", {})

    def record(self, key: str, digest: str, snapshot: str | None,
               artifacts: list[str]) -> None:
        self.data["stages"][key] = {"digest": digest, "snapshot": snapshot,
                                    "artifacts": artifacts}
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def fresh(self, key: str, digest: str, out_dir: str) -> dict | None:
        """The stored entry, when its digest matches and its files still exist."""
        entry = self.data["stages"].get(key)
        if not entry or entry.get("digest") != digest:
            return None
        paths = list(entry.get("artifacts") or [])
        if entry.get("snapshot"):
            paths.append(entry["snapshot"])
        for rel in paths:
            if not os.path.isfile(os.path.join(out_dir, rel)):
                return None
        return entry


class _CorpusSlot:
    """Corpus state that can stay on disk until a stage actually needs it."""

    def __init__(self):
        self._corpus: Corpus | None = None
        self._snapshot: str | None = None

    def set_live(self, corpus: Corpus) -> None:
        self._corpus = corpus
        self._snapshot = None

    def set_snapshot(self, path: str) -> None:
        self._corpus = None
        self._snapshot = path

    def get(self) -> Corpus:
        if self._corpus is None:
            if self._snapshot is None:
                raise PipelineError("no corpus available yet")
            self._corpus = load_corpus(self._snapshot)
        return self._corpus

    @property
    def loaded(self) -> bool:
        return self._corpus is not None


def _load_verdicts_csv(path: str) -> dict[str, str]:
    verdicts: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["id", "decision"]:
            raise PipelineError(f"verdicts file {path} must start with header id,decision")
        for row in reader:
            if not row or not row[0].strip():
                continue
            if len(row) < 2 or row[1].strip() not in ("keep", "remove"):
                raise PipelineError(f"verdicts file {path}: bad row {row!r}")
            verdicts[row[0].strip()] = row[1].strip()
    return verdicts


def _session_verdicts(review_dir: str, flagged: Corpus) -> dict[str, str]:
    """Verdicts recovered from completed review sessions over the flagged set."""
    verdicts: dict[str, str] = {}
    if not os.path.isdir(review_dir):
        return verdicts
    for name in sorted(os.listdir(review_dir)):
        if not name.endswith(".journal"):
            continue
        try:
            session = load_session(os.path.join(review_dir, name), flagged)
        except Exception:
            continue   # journal for a different corpus revision
        for ref_id, verdict in session.verdicts.items():
            if verdict["judgment"] == RELATED:
                verdicts[ref_id] = "keep"
            elif verdict["judgment"] == FALSE_POSITIVE:
                verdicts[ref_id] = "remove"
    return verdicts


def _halt_for_review(config: PipelineConfig, out_dir: str, flagged_refs,
                     source: Corpus) -> ReviewRequired:
    review_dir = os.path.join(out_dir, "review")
    os.makedirs(review_dir, exist_ok=True)
    flagged = Corpus(references=tuple(flagged_refs),
                     retrieval_date=source.retrieval_date)
    corpus_path = os.path.join(review_dir, "flagged.jsonl")
    save_corpus(flagged, corpus_path)
    journal = os.path.join(review_dir, f"qa-{flagged.digest}.journal")
    if not os.path.isfile(journal):
        ReviewSession(kind="qa-audit", seed=config.seed, corpus=flagged,
                      target=len(flagged), journal_path=journal,
                      session_id=f"qa-{flagged.digest}")
    resume = (f"bibmap session serve --corpus {corpus_path} "
              f"--store {review_dir} --port 8765")
    return ReviewRequired(
        f"{len(flagged)} flagged reference(s) await review verdicts; "
        f"serve the session with: {resume}",
        resume_command=resume,
        flagged=[ref.id for ref in flagged.references])


def run_pipeline(config: PipelineConfig, force: bool = False) -> PipelineResult:
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    snapshots_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snapshots_dir, exist_ok=True)
    manifest = _Manifest(out_dir)
    result = PipelineResult(out_dir=out_dir)
    slot = _CorpusSlot()
    chain = ""   # rolling digest of everything upstream

    # analytics params get collected as stages run so [report] can rebuild
    series_params: dict[str, tuple[int, int]] = {}
    fit_params: dict | None = None
    category_file: str | None = None

    def emit(rel: str, data: bytes) -> None:
        path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
        result.artifacts.append(path)

    index = 0
    stages = list(config.stages)
    pos = 0
    while pos < len(stages):
        stage = stages[pos]

        if stage.kind == "ingest":
            group = []
            while pos < len(stages) and stages[pos].kind == "ingest":
                group.append(stages[pos])
                pos += 1
            key = f"{index:02d}-ingest"
            index += 1
            digest_parts = ["ingest",
                            str(config.retrieval_date),
                            [[s.params["source"], _file_digest(config.path(s.params["file"]))]
                             for s in group]]
            digest = _stage_digest(digest_parts)
            chain = _stage_digest([chain, digest])
            snapshot_rel = os.path.join("snapshots", f"{key}.jsonl")
            entry = None if force else manifest.fresh(key, chain, out_dir)
            if entry:
                slot.set_snapshot(os.path.join(out_dir, snapshot_rel))
                result.skipped.append(key)
            else:
                parts = []
                for s in group:
                    with open(config.path(s.params["file"]), "rb") as fh:
                        data = fh.read()
                    parts.append(parse_ris(data, source_db=s.params["source"],
                                           retrieval_date=config.retrieval_date).corpus)
                corpus = merge_corpora(parts, retrieval_date=config.retrieval_date)
                save_corpus(corpus, os.path.join(out_dir, snapshot_rel))
                slot.set_live(corpus)
                manifest.record(key, chain, snapshot_rel, [])
                result.executed.append(key)
            continue

        key = f"{index:02d}-{stage.kind}"
        index += 1
        pos += 1

        params_digest: list = [stage.kind, sorted(stage.params.items())]
        for file_key in ("file", "rules", "verdicts", "specs"):
            if file_key in stage.params:
                params_digest.append(_file_digest(config.path(stage.params[file_key])))
        if stage.kind == "exclude":
            review_dir = os.path.join(out_dir, "review")
            if os.path.isdir(review_dir):
                journals = sorted(n for n in os.listdir(review_dir)
                                  if n.endswith(".journal"))
                params_digest.append(
                    [[n, _file_digest(os.path.join(review_dir, n))] for n in journals])
        chain = _stage_digest([chain, params_digest])

        mutating = stage.kind in ("citations", "dedup", "drop-authorless", "exclude")
        snapshot_rel = os.path.join("snapshots", f"{key}.jsonl") if mutating else None

        if stage.kind in ("counts", "cumulative-citations"):
            lo = int(stage.params["from"])
            hi = int(stage.params["to"])
            series_params["counts" if stage.kind == "counts" else "citations"] = (lo, hi)
        if stage.kind == "fit":
            fit_params = {
                "series": stage.params["series"],
                "t0": int(stage.params["t0"]),
                "max_degree": int(stage.params.get("max-degree", 4)),
                "alpha_enter": float(stage.params.get("alpha-enter", 0.05)),
                "alpha_exit": float(stage.params.get("alpha-exit", 0.10)),
            }
        if stage.kind == "categories":
            category_file = config.path(stage.params["specs"])

        entry = None if force else manifest.fresh(key, chain, out_dir)
        if entry:
            if snapshot_rel:
                slot.set_snapshot(os.path.join(out_dir, snapshot_rel))
            result.skipped.append(key)
            result.artifacts.extend(os.path.join(out_dir, rel)
                                    for rel in entry.get("artifacts") or [])
            continue

        corpus = slot.get()
        artifacts: list[str] = []

        if stage.kind == "citations":
            with open(config.path(stage.params["file"]), "rb") as fh:
                sidecar = load_citation_sidecar(fh.read())
            corpus = attach_citations(corpus, sidecar).corpus
        elif stage.kind == "dedup":
            window_raw = stage.params.get("pass2-year-window", "1").strip().lower()
            window = None if window_raw in ("none", "off") \
                else _parse_int(window_raw, "pass2-year-window", stage.lineno)
            priority = tuple(p.strip() for p in stage.params.get("priority", "").split(",")
                             if p.strip())
            corpus = dedup(corpus, DedupPolicy(source_priority=priority,
                                               pass2_year_window=window))
        elif stage.kind == "drop-authorless":
            corpus, removed = remove_authorless(corpus)
            if removed:
                emit(os.path.join("removed", f"{key}.ris"), write_ris(removed))
                artifacts.append(os.path.join("removed", f"{key}.ris"))
        elif stage.kind == "exclude":
            with open(config.path(stage.params["rules"]), "r", encoding="utf-8") as fh:
                rules = rulefiles.parse_exclusion_rules(fh.read())
            verdicts: dict[str, str] = {}
            review_dir = os.path.join(out_dir, "review")
            if "verdicts" in stage.params:
                verdicts.update(_load_verdicts_csv(config.path(stage.params["verdicts"])))
            try:
                probe_corpus, probe_report = apply_exclusions(corpus, rules, verdicts)
            except CurationError as exc:
                if not exc.unresolved:
                    raise
                flagged_refs = [corpus.by_id(rid) for rid in exc.unresolved]
                flagged_set = Corpus(references=tuple(flagged_refs),
                                     retrieval_date=corpus.retrieval_date)
                verdicts.update(_session_verdicts(review_dir, flagged_set))
                try:
                    probe_corpus, probe_report = apply_exclusions(corpus, rules, verdicts)
                except CurationError as exc2:
                    if not exc2.unresolved:
                        raise
                    raise _halt_for_review(
                        config, out_dir,
                        [corpus.by_id(rid) for rid in exc2.unresolved], corpus)
            corpus, excl_report = probe_corpus, probe_report
            if excl_report.removed_refs:
                emit(os.path.join("removed", f"{key}.ris"),
                     write_ris(excl_report.removed_refs))
                artifacts.append(os.path.join("removed", f"{key}.ris"))
        elif stage.kind == "counts":
            lo, hi = series_params["counts"]
            series = counts_per_year(corpus, lo, hi)
            emit("counts.csv", report_mod.timeseries_csv(series))
            artifacts.append("counts.csv")
        elif stage.kind == "cumulative-citations":
            lo, hi = series_params["citations"]
            series = cumulative_citations_per_year(corpus, lo, hi)
            emit("cumulative_citations.csv", report_mod.timeseries_csv(series))
            artifacts.append("cumulative_citations.csv")
        elif stage.kind == "fit":
            model = _fit_from_params(corpus, fit_params, series_params)
            emit("fit_report.txt", report_mod.fit_report_text(model))
            artifacts.append("fit_report.txt")
        elif stage.kind == "categories":
            table = _categories_from_file(corpus, category_file)
            emit("categories.csv", report_mod.categories_csv(table))
            artifacts.append("categories.csv")
        elif stage.kind == "report":
            if "counts" in series_params:
                lo, hi = series_params["counts"]
                series = counts_per_year(corpus, lo, hi)
                model = None
                if fit_params and fit_params["series"] == "counts":
                    model = _fit_from_params(corpus, fit_params, series_params)
                spec = report_mod.line_chart_spec(
                    "references per year", series, model=model)
                emit("timeseries.svg", report_mod.render_line_chart(spec))
                artifacts.append("timeseries.svg")
            if category_file:
                table = _categories_from_file(corpus, category_file)
                axes = tuple((row.name, float(row.count)) for row in table.rows)
                if len(axes) >= 3:
                    radar = report_mod.ChartSpec(kind="radar",
                                                 title="category weights",
                                                 axes=axes)
                    emit("categories_radar.svg", report_mod.render_radar(radar))
                    artifacts.append("categories_radar.svg")
            emit("ledger.csv", report_mod.ledger_csv(corpus.ledger))
            emit("ledger.txt", report_mod.ledger_text(corpus.ledger))
            artifacts.extend(["ledger.csv", "ledger.txt"])

        if mutating:
            save_corpus(corpus, os.path.join(out_dir, snapshot_rel))
            slot.set_live(corpus)
        manifest.record(key, chain, snapshot_rel, artifacts)
        result.executed.append(key)

    return result


def _fit_from_params(corpus: Corpus, fit_params: dict | None,
                     series_params: dict) -> "RegressionModel":
    if not fit_params:
        raise PipelineError("no fit stage configured")
    name = fit_params["series"]
    lo, hi = series_params[name]
    if name == "counts":
        series = counts_per_year(corpus, lo, hi)
    else:
        series = cumulative_citations_per_year(corpus, lo, hi)
    return fit_stepwise(series, t0=fit_params["t0"],
                        max_degree=fit_params["max_degree"],
                        alpha_enter=fit_params["alpha_enter"],
                        alpha_exit=fit_params["alpha_exit"])


def _categories_from_file(corpus: Corpus, category_file: str | None):
    from bibmap.trends import category_counts
    if not category_file:
        raise PipelineError("no categories stage configured")
    with open(category_file, "r", encoding="utf-8") as fh:
        triples = rulefiles.parse_category_specs(fh.read())
    specs = []
    for label, mask, query_text in triples:
        try:
            query = parse_query(query_text)
        except Exception as exc:
            raise PipelineError(f"category {label!r}: {exc}") from exc
        specs.append(CategorySpec(name=label, query=query, mask=mask))
    return category_counts(corpus, specs)
