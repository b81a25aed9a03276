"""Independent reference implementations used to cross-check the real ones.

Nothing here calls into the package's evaluation code. The query oracle
matches with regexes over a sentinel-joined token string instead of token
scans, the quantile oracle inverts the normal CDF by bisection instead of a
rational approximation, the OLS oracle solves normal equations through
lstsq instead of QR, and the stopping-rule oracle scans windows instead of
keeping a streak counter. Slow is fine; different is the point.
"""

from __future__ import annotations

import math
import random
import re
import unicodedata

from scipy.special import betainc

import numpy as np

from bibmap.queries import And, FieldMask, Not, Or, Pattern, Phrase, Term
from bibmap.records import Reference

# matching the kernel's mode constants by value, on purpose: the oracle
# treats them as part of the published AST contract
EXACT, PREFIX, SUFFIX, INFIX = 0, 1, 2, 3

_SENTINEL = "\x00"


# -- query engine -------------------------------------------------------------


def naive_fold(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.casefold()


def naive_tokenize(folded: str) -> list[str]:
    """Tokens of a folded ascii-safe string; the generators below only emit
    text whose folded form is ascii, so a character class is enough."""
    assert folded.isascii(), "oracle tokenizer only covers ascii-folded text"
    return re.findall(r"[0-9a-z-]+", folded)


def _pattern_regex(pattern: Pattern) -> str:
    body = re.escape(pattern.needle)
    filler = f"[^{_SENTINEL}]*"
    if pattern.mode == PREFIX:
        return body + filler
    if pattern.mode == SUFFIX:
        return filler + body
    if pattern.mode == INFIX:
        return filler + body + filler
    return body


def _joined(tokens: list[str]) -> str:
    return _SENTINEL + _SENTINEL.join(tokens) + _SENTINEL if tokens else _SENTINEL


def naive_seq_match(tokens: list[str], patterns: list[Pattern]) -> bool:
    """Consecutive-token phrase match via one regex over a joined string."""
    if not patterns:
        return False
    body = _SENTINEL.join(_pattern_regex(p) for p in patterns)
    return re.search(_SENTINEL + body + _SENTINEL, _joined(tokens)) is not None


def naive_sequences(ref: Reference, mask: FieldMask) -> list[list[str]]:
    seqs = []
    if mask.title:
        seqs.append(naive_tokenize(naive_fold(ref.title)))
    if mask.abstract and ref.abstract:
        seqs.append(naive_tokenize(naive_fold(ref.abstract)))
    if mask.keywords:
        for kw in ref.keywords:
            seqs.append(naive_tokenize(naive_fold(kw)))
    return seqs


def naive_eval(node, seqs: list[list[str]]) -> bool:
    if isinstance(node, Term):
        return any(naive_seq_match(s, [node.pattern]) for s in seqs)
    if isinstance(node, Phrase):
        return any(naive_seq_match(s, list(node.patterns)) for s in seqs)
    if isinstance(node, And):
        return all(naive_eval(c, seqs) for c in node.children)
    if isinstance(node, Or):
        return any(naive_eval(c, seqs) for c in node.children)
    if isinstance(node, Not):
        return not naive_eval(node.child, seqs)
    raise TypeError(f"not a query node: {node!r}")


def naive_match(ref: Reference, node, mask: FieldMask = FieldMask()) -> bool:
    return naive_eval(node, naive_sequences(ref, mask))


# -- random query/corpus generators -------------------------------------------

_VOCAB = [
    "community", "detection", "graph", "clustering", "network", "modularity",
    "algorithm", "method", "spectral", "partition", "k-means", "louvain",
    "betweenness", "centrality", "overlap", "dynamic", "hierarchy", "random",
    "walk", "label", "propagation", "benchmark", "protein", "metabolic",
    "social", "dendrogram", "resolution", "multi-level", "scale", "2004",
]

_NOISE = [",", ".", ";", ":", "(", ")", "--", "&", "'s", "?"]

_ACCENTED = {"community": "commúnity", "network": "nétwork", "method": "méthod"}


def rand_text(rng: random.Random, n_words: int, accents: bool = True) -> str:
    words = []
    for _ in range(n_words):
        w = rng.choice(_VOCAB)
        if accents and rng.random() < 0.10 and w in _ACCENTED:
            w = _ACCENTED[w]
        if rng.random() < 0.15:
            w = w.capitalize()
        words.append(w)
        if rng.random() < 0.20:
            words.append(rng.choice(_NOISE))
    return " ".join(words)


def rand_reference(rng: random.Random, idx: int) -> Reference:
    return Reference(
        id=f"r{idx:04d}",
        title=rand_text(rng, rng.randint(3, 9)),
        source_db=rng.choice(("scopus", "wos")),
        authors=("Someone, A.",),
        year=rng.randint(1995, 2016),
        abstract=rand_text(rng, rng.randint(8, 30)) if rng.random() < 0.8 else None,
        keywords=tuple(rand_text(rng, rng.randint(1, 2), accents=False)
                       for _ in range(rng.randint(0, 3))),
    )


def rand_pattern(rng: random.Random) -> Pattern:
    word = rng.choice(_VOCAB)
    mode = rng.choice((EXACT, PREFIX, SUFFIX, INFIX))
    if mode in (PREFIX, INFIX) and len(word) > 3 and rng.random() < 0.7:
        word = word[: rng.randint(2, len(word) - 1)]
    if mode in (SUFFIX, INFIX) and len(word) > 3 and rng.random() < 0.7:
        word = word[rng.randint(1, len(word) - 2):]
    return Pattern(needle=naive_fold(word), mode=mode)


def rand_ast(rng: random.Random, depth: int = 3):
    roll = rng.random()
    if depth <= 0 or roll < 0.35:
        return Term(rand_pattern(rng))
    if roll < 0.50:
        return Phrase(tuple(rand_pattern(rng) for _ in range(rng.randint(1, 3))))
    if roll < 0.70:
        return And(tuple(rand_ast(rng, depth - 1) for _ in range(rng.randint(2, 3))))
    if roll < 0.90:
        return Or(tuple(rand_ast(rng, depth - 1) for _ in range(rng.randint(2, 3))))
    return Not(rand_ast(rng, depth - 1))


def rand_mask(rng: random.Random) -> FieldMask:
    while True:
        bits = (rng.random() < 0.8, rng.random() < 0.6, rng.random() < 0.6)
        if any(bits):
            return FieldMask(title=bits[0], abstract=bits[1], keywords=bits[2])


# -- stopping rule ------------------------------------------------------------


def brute_completion_point(verdicts: list[str], streak_target: int = 10) -> int | None:
    """Number of verdicts after which a keywording session completes, by
    window scan: first prefix whose trailing `streak_target` verdicts are all
    related. None when the whole sequence never completes."""
    for m in range(streak_target, len(verdicts) + 1):
        window = verdicts[m - streak_target: m]
        if all(v == "related" for v in window):
            return m
    return None


# -- normal quantile ----------------------------------------------------------


def quantile_by_bisection(p: float) -> float:
    """Invert the erfc-based normal CDF by plain bisection. Upper-half
    arguments go through symmetry because the CDF's absolute granularity
    near 1 would otherwise dominate the answer."""
    if p > 0.5:
        return -quantile_by_bisection(1.0 - p)
    lo, hi = -40.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if 0.5 * math.erfc(-mid / math.sqrt(2.0)) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


# -- ordinary least squares ---------------------------------------------------


def ols_by_lstsq(x, y, degrees: tuple[int, ...]):
    """Intercept plus power terms via lstsq and explicit (X'X)^-1.

    Returns (coefficients, standard errors, two-sided p-values) keyed like the
    package's fit output: 0 for the intercept, each degree for its term.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(len(y))] + [x ** d for d in degrees])
    coefs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coefs
    ssr = float(resid @ resid)
    dof = len(y) - design.shape[1]
    sigma2 = ssr / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    ses = np.sqrt(np.diag(cov))
    keys = [0] + list(degrees)
    out_c = {k: float(c) for k, c in zip(keys, coefs)}
    out_s = {k: float(s) for k, s in zip(keys, ses)}
    out_p = {}
    for k in keys:
        if out_s[k] == 0.0:
            out_p[k] = 0.0 if out_c[k] != 0.0 else 1.0
        elif dof < 1:
            out_p[k] = 1.0
        else:
            t2 = (out_c[k] / out_s[k]) ** 2
            # two-sided t-test p-value through the regularized incomplete beta
            out_p[k] = float(betainc(dof / 2.0, 0.5, dof / (dof + t2)))
    return out_c, out_s, out_p, ssr
