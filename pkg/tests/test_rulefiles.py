import pytest

from bibmap.errors import CurationError
from bibmap.queries import ALL_FIELDS
from bibmap.rulefiles import parse_category_specs, parse_exclusion_rules, parse_mask


def test_parse_exclusion_rules():
    text = """
# biology false positives
biology-noise :: auto-remove :: protein* OR bacteria*
soft-check :: flag-for-review :: "neural network*"
"""
    rules = parse_exclusion_rules(text)
    assert [r.label for r in rules] == ["biology-noise", "soft-check"]
    assert rules[0].mode == "auto-remove"
    assert rules[1].mode == "flag-for-review"


def test_exclusion_rules_errors():
    with pytest.raises(CurationError, match="got 2 field"):
        parse_exclusion_rules("label :: only-two-fields")
    with pytest.raises(CurationError, match="line 2.*duplicate"):
        parse_exclusion_rules("a :: auto-remove :: x\na :: auto-remove :: y")
    with pytest.raises(CurationError, match="empty label"):
        parse_exclusion_rules(" :: auto-remove :: x")
    with pytest.raises(CurationError, match="mode"):
        parse_exclusion_rules("a :: delete :: x")
    with pytest.raises(Exception):
        parse_exclusion_rules("a :: auto-remove :: AND broken")


def test_parse_mask():
    assert parse_mask("all") == ALL_FIELDS
    m = parse_mask("title, keywords")
    assert (m.title, m.abstract, m.keywords) == (True, False, True)
    with pytest.raises(ValueError):
        parse_mask("title, venue")


def test_parse_category_specs():
    text = "fuzzy :: title,abstract :: fuzzy OR overlap*\nspectral :: all :: spectral"
    specs = parse_category_specs(text)
    assert specs[0][0] == "fuzzy"
    assert specs[0][1].keywords is False
    assert specs[0][2] == "fuzzy OR overlap*"
    assert specs[1][1] == ALL_FIELDS


def test_category_specs_duplicate_label():
    with pytest.raises(CurationError, match="duplicate category"):
        parse_category_specs("a :: all :: x\na :: all :: y")
