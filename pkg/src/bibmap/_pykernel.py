"""Pure-Python matching kernel; behavioral twin of the Cython _ckernel.

Both implement the same three primitives over already-folded text (see
textnorm.fold): tokenization into maximal runs of letters/digits/hyphens,
single-pattern scans, and consecutive-token phrase scans. Wildcard modes:
0 exact, 1 prefix (`x*`), 2 suffix (`*x`), 3 infix (`*x*`).
"""

IMPLEMENTATION = "python"

EXACT, PREFIX, SUFFIX, INFIX = 0, 1, 2, 3


def tokenize(text: str) -> list[str]:
    """Maximal runs of alphanumerics and hyphens; input must be pre-folded."""
    tokens = []
    start = None
    for i, ch in enumerate(text):
        if ch.isalnum() or ch == "-":
            if start is None:
                start = i
        elif start is not None:
            tokens.append(text[start:i])
            start = None
    if start is not None:
        tokens.append(text[start:])
    return tokens


def _match(token: str, mode: int, needle: str) -> bool:
    if mode == EXACT:
        return token == needle
    if mode == PREFIX:
        return token.startswith(needle)
    if mode == SUFFIX:
        return token.endswith(needle)
    return needle in token


def seq_has_term(tokens: list[str], mode: int, needle: str) -> bool:
    for token in tokens:
        if _match(token, mode, needle):
            return True
    return False


def seq_has_phrase(tokens: list[str], modes: list[int], needles: list[str]) -> bool:
    k = len(needles)
    if k == 0 or len(tokens) < k:
        return False
    for i in range(len(tokens) - k + 1):
        if all(_match(tokens[i + j], modes[j], needles[j]) for j in range(k)):
            return True
    return False
