"""Acceptance gate.

Each test covers one release criterion and reports a single PASS or FAIL
line. The lines are buffered in VERDICT_LINES and echoed after the run by
the conftest terminal-summary hook, so they stay visible under capture.
A failing criterion also fails its test.
"""

import random
import shutil
import sys
import time

import numpy as np
import pytest

from _oracles import brute_completion_point, naive_match, rand_ast, rand_reference
from bibmap.curation import DedupPolicy, dedup
from bibmap.pipeline import parse_pipeline_config, run_pipeline
from bibmap.queries import ALL_FIELDS, parse_query, run_query
from bibmap.records import Corpus, Reference, load_corpus
from bibmap.sessions import COMPLETE, ReviewSession
from bibmap.stats import margin_of_error, sample_size
from bibmap.trends import TimeSeries, cumulative_citations_per_year, fit_stepwise

DEMO_DIR = "demo"

VERDICT_LINES: list[str] = []


def _report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} ({detail})"
    VERDICT_LINES.append(line)
    print(line)


def test_criterion_1_finite_population_sampling():
    t0 = time.monotonic()
    n = sample_size(4846, 0.95, 0.10, 0.5)
    margin = margin_of_error(1668, 4846, 0.99, 0.5)
    elapsed = time.monotonic() - t0
    ok = n == 94 and 0.0254 <= margin <= 0.0258
    _report(1, "finite-population sampling",
            ok, f"n(4846, 95%, 10%) = {n}, expected 94 exactly; "
                f"margin(1668 of 4846, 99%) = {margin:.6f}, "
                f"expected within [0.0254, 0.0258]; {elapsed:.3f}s")
    assert ok


def _quadratic_series(first_year, last_year, c0, c2):
    points = tuple((t, c0 + c2 * (t - first_year) ** 2)
                   for t in range(first_year, last_year + 1))
    return TimeSeries(points=points)


def test_criterion_2_stepwise_trend_recovery():
    t0 = time.monotonic()
    problems = []

    for c0, c2, first in ((10.51, 5.44, 2002), (-0.45, 0.35, 2003)):
        model = fit_stepwise(_quadratic_series(first, 2015, c0, c2),
                             t0=first, max_degree=4)
        if model.degrees != (2,):
            problems.append(f"degrees {model.degrees} for c2={c2}")
        elif (abs(model.coefficients[0] - c0) > 1e-6
              or abs(model.coefficients[2] - c2) > 1e-6):
            problems.append(f"coefficients off for c2={c2}: {model.coefficients}")
        elif model.r2 is None or abs(model.r2 - 1.0) > 1e-6:
            problems.append(f"r2 {model.r2} for c2={c2}")

    clean = np.array([10.51 + 5.44 * (t - 2002) ** 2 for t in range(2002, 2016)])
    years = range(2002, 2016)
    rng = np.random.default_rng(20160426)
    selected = 0
    for _ in range(200):
        noisy = clean + rng.normal(0.0, 24.74, size=clean.size)
        series = TimeSeries(points=tuple(zip(years, noisy.tolist())))
        model = fit_stepwise(series, t0=2002, max_degree=4)
        if 2 in model.degrees:
            selected += 1
    elapsed = time.monotonic() - t0

    ok = not problems and selected >= 190 and elapsed < 10.0
    detail = (f"noiseless recovery exact to 1e-6"
              f"{'' if not problems else ' FAILED: ' + '; '.join(problems)}; "
              f"quadratic selected in {selected}/200 noisy replicates "
              f"(needs >= 190); {elapsed:.2f}s of 10s budget")
    _report(2, "stepwise polynomial trend fit", ok, detail)
    assert ok


SALT_TEXTS = (
    "fuzzy clustering of social networks",
    "overlapping communities via the cfinder tool",
    "a fuzzy community structure model",
    "c-mean variants for graph partitions",
    "fuzzy cluster membership in modular graphs",
    "detecting overlapping communities at scale",
)

OVERLAPPING_QUERY = ('"overlapping communit*" OR cfinder OR "fuzzy communit*"'
                     ' OR "fuzzy cluster*" OR c-mean')
FUZZY_QUERY = '"fuzzy communit*" OR "fuzzy cluster*" OR c-mean'


def test_criterion_3_query_oracle_equivalence():
    t0 = time.monotonic()
    rng = random.Random(42)
    pool = [rand_reference(rng, i) for i in range(560)]
    for i, text in enumerate(SALT_TEXTS * 7):
        pool.append(Reference(id=f"s{i:03d}", title=text, source_db="scopus",
                              authors=("Someone, B.",), year=2005 + i % 9))
    rng.shuffle(pool)

    overlapping = parse_query(OVERLAPPING_QUERY)
    fuzzy = parse_query(FUZZY_QUERY)

    mismatches = 0
    containment_breaks = 0
    fuzzy_hits = 0
    for _ in range(1000):
        size = rng.randint(1, 500)
        start = rng.randint(0, len(pool) - size)
        corpus = Corpus(references=tuple(pool[start:start + size]))
        ast = rand_ast(rng, depth=rng.randint(1, 4))

        ids, count = run_query(corpus, ast, ALL_FIELDS)
        expected = {ref.id for ref in corpus if naive_match(ref, ast)}
        if set(ids) != expected or count != len(expected):
            mismatches += 1

        f_ids, _ = run_query(corpus, fuzzy, ALL_FIELDS)
        o_ids, _ = run_query(corpus, overlapping, ALL_FIELDS)
        fuzzy_hits += len(f_ids)
        if not set(f_ids) <= set(o_ids):
            containment_breaks += 1
    elapsed = time.monotonic() - t0

    ok = (mismatches == 0 and containment_breaks == 0 and fuzzy_hits > 0
          and elapsed < 60.0)
    _report(3, "query engine oracle equivalence", ok,
            f"1000 random corpora (<= 500 refs, depth <= 4): "
            f"{mismatches} oracle mismatches; fuzzy subset-of overlapping "
            f"broken on {containment_breaks} corpora "
            f"({fuzzy_hits} fuzzy matches seen); {elapsed:.2f}s of 60s budget")
    assert ok


def _copy_demo(tmp_path):
    root = tmp_path / "demo"
    root.mkdir()
    shutil.copy(f"{DEMO_DIR}/demo.pipeline", root / "demo.pipeline")
    shutil.copytree(f"{DEMO_DIR}/exports", root / "exports")
    shutil.copytree(f"{DEMO_DIR}/rules", root / "rules")
    return root / "demo.pipeline"


def _planted_thousand(seed):
    """Corpus of exactly 1000 records: unique originals, each followed by
    0..3 degraded duplicates. Returns (corpus, original count)."""
    rng = random.Random(seed)
    refs = []
    originals = 0
    while len(refs) < 1000:
        i = originals
        original = Reference(
            id=f"orig-{i:04d}",
            title=f"Planted study {i:04d} on subject {i}",
            source_db="scopus",
            authors=(f"Author {i}", "Coauthor, C."),
            year=2000 + i % 15,
            venue="Journal of Planted Studies",
            volume=str(1 + i % 40),
            abstract="A rich record so the original always wins the collapse.",
            keywords=("planted", "study"),
        )
        refs.append(original)
        originals += 1
        for d in range(rng.randint(0, min(3, 1000 - len(refs)))):
            style = rng.randrange(3)
            refs.append(Reference(
                id=f"dup-{i:04d}-{d}",
                title=original.title.upper() if style == 0 else original.title,
                source_db="wos",
                authors=(f"Author {i}",),
                year=original.year + (1 if style == 1 else 0),
                venue="J Planted Stud" if style == 2 else original.venue,
                volume=original.volume if style == 0 else None,
            ))
    return Corpus(references=tuple(refs)), originals


def test_criterion_4_curation_ledger_and_dedup(tmp_path):
    t0 = time.monotonic()
    problems = []

    run_pipeline(parse_pipeline_config(_copy_demo(tmp_path)))
    final = load_corpus(tmp_path / "demo" / "out" / "snapshots" / "04-exclude.jsonl")
    final.verify_ledger()
    stages = [entry.stage for entry in final.ledger.entries]
    spine = [s for s in stages
             if s == "merge" or s.startswith(("dedup", "drop-authorless", "exclude"))]
    if (spine[0] != "merge" or spine[1:3] != ["dedup-pass1", "dedup-pass2"]
            or spine[3] != "drop-authorless"
            or not all(s.startswith("exclude:") for s in spine[4:])
            or len(spine) < 5):
        problems.append(f"stage spine {spine}")
    for entry in final.ledger.entries:
        if entry.input - entry.removed != entry.output:
            problems.append(f"{entry.stage} does not reconcile")
    merged_n = final.ledger.entries[0].output

    policy = DedupPolicy(source_priority=("scopus", "wos"), pass2_year_window=1)
    for seed in (1, 2, 3):
        corpus, planted = _planted_thousand(seed)
        once = dedup(corpus, policy)
        if len(once) != planted:
            problems.append(f"seed {seed}: {len(once)} survivors, planted {planted}")
        if sorted(r.id for r in once) != [f"orig-{i:04d}" for i in range(planted)]:
            problems.append(f"seed {seed}: wrong survivors kept")
        twice = dedup(once, policy)
        if twice.ids() != once.ids():
            problems.append(f"seed {seed}: dedup not idempotent")
    elapsed = time.monotonic() - t0

    ok = not problems and elapsed < 10.0
    _report(4, "curation accounting and dedup", ok,
            f"demo chain {merged_n} merged -> {len(final)} final, every ledger "
            f"stage reconciles in - removed = out"
            f"{'' if not problems else ' FAILED: ' + '; '.join(problems)}; "
            f"3 planted corpora of 1000 records recovered exactly; "
            f"{elapsed:.2f}s of 10s budget")
    assert ok


def test_criterion_5_stopping_rule_equivalence():
    t0 = time.monotonic()
    refs = tuple(Reference(id=f"r{i:03d}", title=f"ref {i}", source_db="x")
                 for i in range(60))
    corpus = Corpus(references=refs)
    rng = random.Random(5)

    mismatches = 0
    for trial in range(10000):
        length = rng.randint(10, 42)
        p_related = rng.choice((0.5, 0.7, 0.85, 0.95))
        sequence = ["related" if rng.random() < p_related else "false-positive"
                    for _ in range(length)]
        expected = brute_completion_point(sequence, streak_target=10)

        session = ReviewSession("keywording", seed=trial, corpus=corpus)
        got = None
        for consumed, judgment in enumerate(sequence, start=1):
            ref_id = session.advance(corpus)
            session.record(ref_id, judgment)
            if session.state == COMPLETE:
                got = consumed
                break
        if got != expected:
            mismatches += 1
    elapsed = time.monotonic() - t0

    ok = mismatches == 0 and elapsed < 5.0
    _report(5, "keywording stopping rule", ok,
            f"10000 random verdict sequences vs brute-force scanner: "
            f"{mismatches} mismatches; {elapsed:.2f}s of 5s budget")
    assert ok


def test_criterion_6_cumulative_citations_fixture():
    ten_others = (30, 25, 20, 18, 15, 13, 12, 10, 8, 22)   # sums to 173
    counts = (3203, 1734) + ten_others
    refs = tuple(Reference(id=f"c{i}", title=f"cited paper {i}", source_db="x",
                           year=2002, citation_count=count)
                 for i, count in enumerate(counts))
    series = cumulative_citations_per_year(Corpus(references=refs), 2002, 2002)
    total = series.points[0][1]
    ok = total == 5110.0 and len(refs) == 12
    _report(6, "cumulative citation bucket", ok,
            f"2002 bucket over 12 publications = {total:g}, expected 5110")
    assert ok


def test_criterion_7_end_to_end_determinism(tmp_path):
    t0 = time.monotonic()
    outputs = []
    for run in ("a", "b"):
        run_dir = tmp_path / run
        run_dir.mkdir()
        config = parse_pipeline_config(_copy_demo(run_dir))
        result = run_pipeline(config)
        outputs.append(run_dir / "demo" / "out")
        assert result.skipped == []

    compared = ["counts.csv", "fit_report.txt", "timeseries.svg",
                "categories_radar.svg", "cumulative_citations.csv",
                "categories.csv", "ledger.csv"]
    differing = [name for name in compared
                 if (outputs[0] / name).read_bytes() != (outputs[1] / name).read_bytes()]
    elapsed = time.monotonic() - t0

    ok = not differing
    _report(7, "end-to-end pipeline determinism", ok,
            f"two fresh runs of the demo config: "
            f"{len(compared) - len(differing)}/{len(compared)} artifacts "
            f"byte-identical"
            f"{'' if ok else ' (differ: ' + ', '.join(differing) + ')'}; "
            f"{elapsed:.2f}s")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
