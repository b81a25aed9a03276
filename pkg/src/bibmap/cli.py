"""Command line interface.

Every subcommand is a thin shell over one module operation, so the CLI,
the HTTP service, and the pipeline all produce identical outputs for
identical inputs. Exit codes: 0 success, 2 bad input or failed operation,
3 human review required (re-run after recording verdicts).
"""

from __future__ import annotations

import argparse
import sys

from bibmap import report as report_mod
from bibmap import rulefiles
from bibmap.curation import DedupPolicy, apply_exclusions, dedup, remove_authorless
from bibmap.errors import BibmapError, CurationError, ReviewRequired
from bibmap.ingest import (attach_citations, load_citation_sidecar, merge_corpora,
                           parse_ris, write_ris)
from bibmap.pipeline import parse_pipeline_config, run_pipeline
from bibmap.queries import ALL_FIELDS, FieldMask, parse_query, run_query
from bibmap.records import load_corpus, save_corpus
from bibmap.stats import margin_of_error, sample_size
from bibmap.trends import (CategorySpec, category_counts, counts_per_year,
                           cumulative_citations_per_year, fit_stepwise)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_REVIEW = 3


def _date(value: str):
    import datetime
    return datetime.date.fromisoformat(value)


def _mask(spec: str | None) -> FieldMask:
    if not spec:
        return ALL_FIELDS
    return rulefiles.parse_mask(spec)


def _write_or_print(data: bytes, path: str | None) -> None:
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _load_series(args):
    corpus = load_corpus(args.corpus)
    if args.kind == "counts":
        return corpus, counts_per_year(corpus, args.from_year, args.to_year)
    return corpus, cumulative_citations_per_year(corpus, args.from_year, args.to_year)


def _load_specs(path: str) -> list[CategorySpec]:
    with open(path, "r", encoding="utf-8") as fh:
        triples = rulefiles.parse_category_specs(fh.read())
    return [CategorySpec(name=label, query=parse_query(text), mask=mask)
            for label, mask, text in triples]


def cmd_ingest(args) -> int:
    with open(args.ris_file, "rb") as fh:
        data = fh.read()
    result = parse_ris(data, source_db=args.source, retrieval_date=args.retrieval_date)
    save_corpus(result.corpus, args.out)
    print(f"ingested {len(result.corpus)} reference(s) from {args.ris_file}")
    for rejected in result.rejected:
        print(f"  rejected line {rejected.line}: {rejected.reason}", file=sys.stderr)
    return EXIT_OK


def cmd_merge(args) -> int:
    parts = [load_corpus(path) for path in args.corpora]
    merged = merge_corpora(parts, retrieval_date=args.retrieval_date)
    save_corpus(merged, args.out)
    print(f"merged {len(parts)} corpora into {len(merged)} reference(s)")
    return EXIT_OK


def cmd_dedup(args) -> int:
    corpus = load_corpus(args.corpus)
    window = None if args.pass2_year_window.lower() in ("none", "off") \
        else int(args.pass2_year_window)
    priority = tuple(p.strip() for p in args.priority.split(",") if p.strip()) \
        if args.priority else ()
    before = len(corpus)
    corpus = dedup(corpus, DedupPolicy(source_priority=priority,
                                       pass2_year_window=window))
    save_corpus(corpus, args.out)
    print(f"dedup: {before} -> {len(corpus)} reference(s)")
    return EXIT_OK


def cmd_drop_authorless(args) -> int:
    corpus = load_corpus(args.corpus)
    corpus, removed = remove_authorless(corpus)
    save_corpus(corpus, args.out)
    if args.dump and removed:
        with open(args.dump, "wb") as fh:
            fh.write(write_ris(removed))
    print(f"removed {len(removed)} authorless reference(s), {len(corpus)} remain")
    return EXIT_OK


def cmd_query(args) -> int:
    corpus = load_corpus(args.corpus)
    ast = parse_query(args.query)
    ids, count = run_query(corpus, ast, _mask(args.fields))
    print(count)
    if args.ids:
        for ref_id in ids:
            print(ref_id)
    return EXIT_OK


def cmd_sample_size(args) -> int:
    if args.for_sample is not None:
        margin = margin_of_error(args.for_sample, args.population,
                                 args.confidence, args.proportion)
        print(repr(margin))
    else:
        print(sample_size(args.population, args.confidence, args.margin,
                          args.proportion))
    return EXIT_OK


def cmd_session_serve(args) -> int:
    from bibmap.service import make_server
    corpus = load_corpus(args.corpus)
    server, lock = make_server(corpus, args.store, port=args.port, host=args.host,
                               categories_file=args.categories, ui_dir=args.ui,
                               quiet=False)
    host, port = server.server_address[:2]
    print(f"serving review API on http://{host}:{port}/ "
          f"(store: {args.store}, corpus: {len(corpus)} references)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        lock.release()
    return EXIT_OK


def cmd_exclude(args) -> int:
    corpus = load_corpus(args.corpus)
    with open(args.rules, "r", encoding="utf-8") as fh:
        rules = rulefiles.parse_exclusion_rules(fh.read())
    verdicts: dict[str, str] = {}
    if args.verdicts:
        from bibmap.pipeline import _load_verdicts_csv
        verdicts = _load_verdicts_csv(args.verdicts)
    try:
        corpus, excl_report = apply_exclusions(corpus, rules, verdicts)
    except CurationError as exc:
        if exc.unresolved:
            print(f"error: {exc}", file=sys.stderr)
            print("record keep/remove verdicts for these ids and re-run",
                  file=sys.stderr)
            return EXIT_REVIEW
        raise
    save_corpus(corpus, args.out)
    if args.dump and excl_report.removed_refs:
        with open(args.dump, "wb") as fh:
            fh.write(write_ris(excl_report.removed_refs))
    for outcome in excl_report.outcomes:
        print(f"{outcome.label}: flagged {len(outcome.flagged)}, "
              f"removed {len(outcome.removed)}, kept {len(outcome.kept)}")
    print(f"{len(corpus)} reference(s) remain")
    return EXIT_OK


def cmd_timeseries(args) -> int:
    _, series = _load_series(args)
    _write_or_print(report_mod.timeseries_csv(series), args.out)
    return EXIT_OK


def cmd_citations(args) -> int:
    corpus = load_corpus(args.corpus)
    with open(args.sidecar, "rb") as fh:
        sidecar = load_citation_sidecar(fh.read())
    result = attach_citations(corpus, sidecar)
    save_corpus(result.corpus, args.out)
    print(f"attached {result.attached} citation count(s); "
          f"{len(result.orphans)} orphan key(s)")
    for orphan in result.orphans:
        print(f"  orphan: {orphan}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    _, series = _load_series(args)
    model = fit_stepwise(series, t0=args.t0, max_degree=args.max_degree,
                         alpha_enter=args.alpha_enter, alpha_exit=args.alpha_exit)
    _write_or_print(report_mod.fit_report_text(model), args.out)
    return EXIT_OK


def cmd_categories(args) -> int:
    corpus = load_corpus(args.corpus)
    table = category_counts(corpus, _load_specs(args.specs))
    _write_or_print(report_mod.categories_csv(table), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    import os
    corpus = load_corpus(args.corpus)
    os.makedirs(args.out_dir, exist_ok=True)
    written = []

    series = counts_per_year(corpus, args.from_year, args.to_year)
    model = None
    if args.t0 is not None:
        model = fit_stepwise(series, t0=args.t0, max_degree=args.max_degree,
                             alpha_enter=args.alpha_enter, alpha_exit=args.alpha_exit)
        path = os.path.join(args.out_dir, "fit_report.txt")
        with open(path, "wb") as fh:
            fh.write(report_mod.fit_report_text(model))
        written.append(path)
    spec = report_mod.line_chart_spec("references per year", series, model=model)
    path = os.path.join(args.out_dir, "timeseries.svg")
    with open(path, "wb") as fh:
        fh.write(report_mod.render_line_chart(spec))
    written.append(path)
    path = os.path.join(args.out_dir, "counts.csv")
    with open(path, "wb") as fh:
        fh.write(report_mod.timeseries_csv(series))
    written.append(path)

    if args.specs:
        table = category_counts(corpus, _load_specs(args.specs))
        path = os.path.join(args.out_dir, "categories.csv")
        with open(path, "wb") as fh:
            fh.write(report_mod.categories_csv(table))
        written.append(path)
        if len(table.rows) >= 3:
            radar = report_mod.ChartSpec(
                kind="radar", title="category weights",
                axes=tuple((row.name, float(row.count)) for row in table.rows))
            path = os.path.join(args.out_dir, "categories_radar.svg")
            with open(path, "wb") as fh:
                fh.write(report_mod.render_radar(radar))
            written.append(path)

    path = os.path.join(args.out_dir, "ledger.csv")
    with open(path, "wb") as fh:
        fh.write(report_mod.ledger_csv(corpus.ledger))
    written.append(path)
    path = os.path.join(args.out_dir, "ledger.txt")
    with open(path, "wb") as fh:
        fh.write(report_mod.ledger_text(corpus.ledger))
    written.append(path)

    for path in written:
        print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    config = parse_pipeline_config(args.config)
    try:
        result = run_pipeline(config, force=args.force)
    except ReviewRequired as exc:
        print(f"human review required: {exc}", file=sys.stderr)
        print(f"resume with: {exc.resume_command}", file=sys.stderr)
        return EXIT_REVIEW
    print(f"executed {len(result.executed)} stage(s), "
          f"skipped {len(result.skipped)} (up to date)")
    for path in result.artifacts:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bibmap",
        description="systematic mapping workbench: ingest, curate, sample, fit, report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a RIS export into a corpus file")
    p.add_argument("ris_file")
    p.add_argument("--source", required=True, help="source database tag")
    p.add_argument("--out", required=True)
    p.add_argument("--retrieval-date", type=_date, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("merge", help="concatenate corpora, re-minting clashing ids")
    p.add_argument("corpora", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--retrieval-date", type=_date, default=None)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("dedup", help="two-pass duplicate removal")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--priority", default="", help="comma-separated source_db order")
    p.add_argument("--pass2-year-window", default="1",
                   help="max year distance for title-only collapse, or 'none'")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("drop-authorless", help="remove references with no authors")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--dump", help="write removed references to this RIS file")
    p.set_defaults(func=cmd_drop_authorless)

    p = sub.add_parser("query", help="count references matching a boolean query")
    p.add_argument("query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--fields", help="comma-separated: title,abstract,keywords")
    p.add_argument("--ids", action="store_true", help="also print matching ids")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("sample-size",
                       help="finite-population sample size or achieved margin")
    p.add_argument("--population", type=int, required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--margin", type=float, default=0.10)
    p.add_argument("--proportion", type=float, default=0.5)
    p.add_argument("--for-sample", type=int, default=None,
                   help="print the margin achieved by this sample size instead")
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("session", help="review session commands")
    session_sub = p.add_subparsers(dest="session_command", required=True)
    ps = session_sub.add_parser("serve", help="serve the review API and UI")
    ps.add_argument("--corpus", required=True)
    ps.add_argument("--store", required=True, help="session journal directory")
    ps.add_argument("--port", type=int, default=8765)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--categories", help="category spec file for /analytics/categories")
    ps.add_argument("--ui", help="directory of static UI files to serve at /")
    ps.set_defaults(func=cmd_session_serve)

    p = sub.add_parser("exclude", help="apply exclusion rules with verdicts")
    p.add_argument("corpus")
    p.add_argument("--rules", required=True)
    p.add_argument("--verdicts", help="CSV of id,decision (keep|remove)")
    p.add_argument("--out", required=True)
    p.add_argument("--dump", help="write removed references to this RIS file")
    p.set_defaults(func=cmd_exclude)

    def add_series_args(q, with_kind=True):
        q.add_argument("--corpus", required=True)
        q.add_argument("--from", dest="from_year", type=int, required=True)
        q.add_argument("--to", dest="to_year", type=int, required=True)
        if with_kind:
            q.add_argument("--kind", choices=("counts", "citations"),
                           default="counts")

    p = sub.add_parser("timeseries", help="per-year series as CSV")
    add_series_args(p)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_timeseries)

    p = sub.add_parser("citations", help="attach a citation-count sidecar CSV")
    p.add_argument("corpus")
    p.add_argument("--sidecar", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_citations)

    p = sub.add_parser("fit", help="stepwise polynomial trend fit")
    add_series_args(p)
    p.add_argument("--t0", type=int, required=True)
    p.add_argument("--max-degree", type=int, default=4)
    p.add_argument("--alpha-enter", type=float, default=0.05)
    p.add_argument("--alpha-exit", type=float, default=0.10)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("categories", help="category weights as CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--specs", required=True)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_categories)

    p = sub.add_parser("report", help="emit charts, tables, and the ledger")
    add_series_args(p, with_kind=False)
    p.add_argument("--t0", type=int, default=None, help="fit origin; enables the fit")
    p.add_argument("--max-degree", type=int, default=4)
    p.add_argument("--alpha-enter", type=float, default=0.05)
    p.add_argument("--alpha-exit", type=float, default=0.10)
    p.add_argument("--specs", help="category spec file for the radar chart")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a pipeline config")
    p.add_argument("config")
    p.add_argument("--force", action="store_true",
                   help="re-execute every stage, ignoring the manifest")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReviewRequired as exc:
        print(f"human review required: {exc}", file=sys.stderr)
        return EXIT_REVIEW
    except BibmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
