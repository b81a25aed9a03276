"""Parsers for the plain-text rule files.

Both file kinds share one line shape, three fields split on `::`:

    label :: middle :: query

Blank lines and lines starting with # are skipped. For exclusion rules the
middle field is a mode (flag-for-review or auto-remove); for category specs
it is a field mask (comma-separated subset of title,abstract,keywords, or
the word all).
"""

from __future__ import annotations

from bibmap.curation import ExclusionRule
from bibmap.errors import CurationError
from bibmap.queries import ALL_FIELDS, FieldMask, parse_query


def _split_line(line: str, lineno: int) -> tuple[str, str, str]:
    parts = [part.strip() for part in line.split("::")]
    if len(parts) != 3:
        raise CurationError(
            f"line {lineno}: expected 'label :: mode :: query', got {len(parts)} field(s)"
        )
    label, middle, query = parts
    if not label:
        raise CurationError(f"line {lineno}: empty label")
    return label, middle, query


def _rule_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_exclusion_rules(text: str) -> list[ExclusionRule]:
    rules = []
    seen: set[str] = set()
    for lineno, line in _rule_lines(text):
        label, mode, query_text = _split_line(line, lineno)
        if label in seen:
            raise CurationError(f"line {lineno}: duplicate rule label {label!r}")
        seen.add(label)
        try:
            rule = ExclusionRule(label=label, query=parse_query(query_text), mode=mode)
        except ValueError as exc:
            raise CurationError(f"line {lineno}: {exc}") from exc
        rules.append(rule)
    return rules


def parse_mask(spec: str) -> FieldMask:
    if spec.strip().lower() == "all":
        return ALL_FIELDS
    names = [name.strip() for name in spec.split(",") if name.strip()]
    return FieldMask.from_names(names)


def parse_category_specs(text: str) -> list[tuple[str, FieldMask, str]]:
    """Returns (label, mask, query text) triples; query parsing is left to the
    caller so category errors can name the category."""
    specs = []
    seen: set[str] = set()
    for lineno, line in _rule_lines(text):
        label, mask_spec, query_text = _split_line(line, lineno)
        if label in seen:
            raise CurationError(f"line {lineno}: duplicate category label {label!r}")
        seen.add(label)
        try:
            mask = parse_mask(mask_spec)
        except ValueError as exc:
            raise CurationError(f"line {lineno}: {exc}") from exc
        specs.append((label, mask, query_text))
    return specs
