"""Curation stages: two-pass deduplication, authorless removal, and
query-driven exclusion of false positives. Every stage is a corpus-level
transaction that appends to the provenance ledger.

Dedup policy:

  pass 1  groups on normalized (title, year, volume, venue) and keeps one
          record per group; catches exact re-exports across databases.
  pass 2  re-groups pass-1 survivors on normalized title alone, within a
          year window, and collapses again; catches the duplicates that
          survive pass 1 because databases disagree on venue spelling,
          volume, or pages.

Within a title group, records whose years are connected by steps of at most
`pass2_year_window` collapse together (so 2002/2003/2004 chain into one
group); records without a year only collapse with each other. This chained
form is what keeps dedup idempotent. `pass2_year_window=None` disables the
guard entirely (strict title-only collapse) for replication runs.

The kept record of every group is the richest one: most populated optional
fields, ties broken by the configured source_db priority order, then by
corpus order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from bibmap.errors import CurationError
from bibmap.queries import ALL_FIELDS, FieldMask, QueryAst, format_query, match_reference
from bibmap.records import Corpus, Reference
from bibmap.textnorm import normalize_key

EXCLUSION_MODES = ("flag-for-review", "auto-remove")


@dataclass(frozen=True)
class DedupPolicy:
    # priority order of source_db tags for tie-breaking; unlisted tags rank last
    source_priority: tuple[str, ...] = ()
    # max year step linking pass-2 title-only duplicates; None = no guard
    pass2_year_window: int | None = 1

    def source_rank(self, source_db: str) -> int:
        try:
            return self.source_priority.index(source_db)
        except ValueError:
            return len(self.source_priority)


@dataclass(frozen=True)
class ExclusionRule:
    label: str
    query: QueryAst
    mode: str = "flag-for-review"

    def __post_init__(self):
        if not self.label:
            raise ValueError("exclusion rule needs a non-empty label")
        if self.mode not in EXCLUSION_MODES:
            raise ValueError(f"unknown exclusion mode {self.mode!r}")


def _pass1_key(ref: Reference) -> tuple:
    return (
        normalize_key(ref.title),
        ref.year,
        normalize_key(ref.volume or ""),
        normalize_key(ref.venue or ""),
    )


def _richest(members: list[tuple[int, Reference]], policy: DedupPolicy) -> int:
    """Corpus index of the kept record: most populated fields, then source
    priority, then corpus order."""
    best_idx, best_ref = members[0]
    for idx, ref in members[1:]:
        better = (
            -ref.populated_field_count,
            policy.source_rank(ref.source_db),
            idx,
        ) < (
            -best_ref.populated_field_count,
            policy.source_rank(best_ref.source_db),
            best_idx,
        )
        if better:
            best_idx, best_ref = idx, ref
    return best_idx


def _collapse(indexed_refs, key_fn, policy: DedupPolicy):
    groups: dict = {}
    for idx, ref in indexed_refs:
        groups.setdefault(key_fn(ref), []).append((idx, ref))
    keep = {_richest(members, policy) for members in groups.values()}
    return [(idx, ref) for idx, ref in indexed_refs if idx in keep]


def _year_components(members: list[tuple[int, Reference]],
                     window: int | None) -> list[list[tuple[int, Reference]]]:
    """Split a title group into collapse components by year proximity.

    Yeared members chain while consecutive years are <= window apart;
    year-less members form one component of their own.
    """
    if window is None:
        return [members]
    yeared = sorted((m for m in members if m[1].year is not None),
                    key=lambda m: (m[1].year, m[0]))
    components: list[list[tuple[int, Reference]]] = []
    last_year: int | None = None
    for idx, ref in yeared:
        if last_year is not None and ref.year - last_year <= window:
            components[-1].append((idx, ref))
        else:
            components.append([(idx, ref)])
        last_year = ref.year
    unyeared = [m for m in members if m[1].year is None]
    if unyeared:
        components.append(unyeared)
    return components


def dedup(corpus: Corpus, policy: DedupPolicy | None = None) -> Corpus:
    """Two-pass duplicate removal; one ledger entry per pass."""
    policy = policy or DedupPolicy()
    indexed = list(enumerate(corpus.references))

    survivors1 = _collapse(indexed, _pass1_key, policy)
    corpus = corpus.evolve(
        tuple(ref for _, ref in survivors1),
        "dedup-pass1",
        {"key_fields": ["title", "year", "volume", "venue"],
         "source_priority": list(policy.source_priority)},
    )

    title_groups: dict[str, list[tuple[int, Reference]]] = {}
    for idx, ref in survivors1:
        title_groups.setdefault(normalize_key(ref.title), []).append((idx, ref))
    keep: set[int] = set()
    for members in title_groups.values():
        for component in _year_components(members, policy.pass2_year_window):
            if component:
                keep.add(_richest(component, policy))
    survivors2 = tuple(ref for idx, ref in survivors1 if idx in keep)

    return corpus.evolve(
        survivors2,
        "dedup-pass2",
        {"key_fields": ["title"], "year_window": policy.pass2_year_window},
    )


def remove_authorless(corpus: Corpus) -> tuple[Corpus, tuple[Reference, ...]]:
    """Drop references with an empty author list; returns them for inspection."""
    kept = tuple(ref for ref in corpus.references if ref.authors)
    removed = tuple(ref for ref in corpus.references if not ref.authors)
    corpus = corpus.evolve(kept, "drop-authorless", {"removed": len(removed)})
    return corpus, removed


@dataclass(frozen=True)
class RuleOutcome:
    label: str
    mode: str
    flagged: tuple[str, ...]   # ids matched by the rule's query
    removed: tuple[str, ...]
    kept: tuple[str, ...]      # flagged but kept by a verdict (recorded for idempotent re-runs)


@dataclass(frozen=True)
class ExclusionReport:
    outcomes: tuple[RuleOutcome, ...] = ()
    removed_refs: tuple[Reference, ...] = ()

    @property
    def total_removed(self) -> int:
        return len(self.removed_refs)


def apply_exclusions(corpus: Corpus, rules: list[ExclusionRule],
                     verdicts: dict[str, str] | None = None,
                     mask: FieldMask = ALL_FIELDS) -> tuple[Corpus, ExclusionReport]:
    """Apply exclusion rules in order; rules see the corpus left by earlier rules.

    flag-for-review rules require a keep/remove verdict for every flagged
    reference; any unresolved id aborts the whole call before a single
    removal (no partial application).
    """
    verdicts = verdicts or {}
    for ref_id, decision in verdicts.items():
        if decision not in ("keep", "remove"):
            raise CurationError(f"verdict for {ref_id!r} must be keep or remove, got {decision!r}")

    # plan first: collect every unresolved id across all rules before touching anything
    staged: list[tuple[ExclusionRule, list[Reference]]] = []
    current = list(corpus.references)
    unresolved: list[str] = []
    for rule in rules:
        flagged = [ref for ref in current if match_reference(ref, rule.query, mask)]
        if rule.mode == "flag-for-review":
            unresolved.extend(ref.id for ref in flagged if ref.id not in verdicts)
            removed = [ref for ref in flagged if verdicts.get(ref.id) == "remove"]
        else:
            removed = flagged
        staged.append((rule, flagged))
        removed_ids = {ref.id for ref in removed}
        current = [ref for ref in current if ref.id not in removed_ids]
    if unresolved:
        raise CurationError(
            f"{len(unresolved)} flagged reference(s) lack a verdict: "
            + ", ".join(unresolved[:20]) + ("..." if len(unresolved) > 20 else ""),
            unresolved=unresolved,
        )

    outcomes = []
    all_removed: list[Reference] = []
    result = corpus
    for rule, flagged in staged:
        if rule.mode == "auto-remove":
            removed = flagged
            kept: list[Reference] = []
        else:
            removed = [ref for ref in flagged if verdicts[ref.id] == "remove"]
            kept = [ref for ref in flagged if verdicts[ref.id] == "keep"]
        removed_ids = {ref.id for ref in removed}
        survivors = tuple(ref for ref in result.references if ref.id not in removed_ids)
        result = result.evolve(
            survivors,
            f"exclude:{rule.label}",
            {"label": rule.label, "mode": rule.mode, "query": format_query(rule.query),
             "flagged": len(flagged), "removed": len(removed), "kept": len(kept)},
        )
        outcomes.append(RuleOutcome(
            label=rule.label, mode=rule.mode,
            flagged=tuple(ref.id for ref in flagged),
            removed=tuple(ref.id for ref in removed),
            kept=tuple(ref.id for ref in kept),
        ))
        all_removed.extend(removed)

    return result, ExclusionReport(outcomes=tuple(outcomes), removed_refs=tuple(all_removed))
