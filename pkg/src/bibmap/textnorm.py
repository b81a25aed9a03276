"""Text normalization shared by the query engine and the curation keys.

Two normal forms are used in the workbench:

  fold()          lower-case + diacritic strip, nothing else removed.
                  Feeds the query tokenizer, which then keeps runs of
                  letters/digits/hyphens ("k-means" stays one token).
  normalize_key() fold + every non-alphanumeric run collapsed to a single
                  space, trimmed. Used for deduplication keys and for the
                  citation sidecar join, where hyphens/punctuation must
                  not distinguish records.
"""

import unicodedata


def strip_diacritics(text: str) -> str:
    """Drop combining marks after NFKD decomposition (e.g. é -> e)."""
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def fold(text: str) -> str:
    """Case-fold after stripping diacritics; keeps punctuation intact."""
    return strip_diacritics(text).casefold()


def normalize_key(text: str) -> str:
    """Canonical comparison key: folded, punctuation-free, space-collapsed.

    "Community Structure — in  Networks!" -> "community structure in networks"
    """
    folded = fold(text)
    out = []
    in_gap = True  # swallows leading separators
    for ch in folded:
        if ch.isalnum():
            out.append(ch)
            in_gap = False
        elif not in_gap:
            out.append(" ")
            in_gap = True
    return "".join(out).rstrip()
