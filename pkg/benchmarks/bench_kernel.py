"""Compare the compiled matcher kernel against the pure-Python fallback.

The kernel is the hot path of query evaluation: every (reference, term)
probe tokenizes field text and scans token lists. This benchmark times
both implementations on the same synthetic workload and reports the
speedup. Run:

    python3 benchmarks/bench_kernel.py [n_texts]
"""

from __future__ import annotations

import random
import sys
import time

from bibmap import _pykernel

try:
    from bibmap import _ckernel
except ImportError:
    _ckernel = None

WORDS = ("community detection modularity spectral clustering graph network "
         "partition hierarchical overlapping fuzzy k-means laplacian louvain "
         "random walk markov dynamics algorithm method framework analysis "
         "structure model optimization heuristic benchmark evaluation").split()


def make_texts(n: int, seed: int = 7) -> list[str]:
    rng = random.Random(seed)
    return [" ".join(rng.choice(WORDS) for _ in range(rng.randint(8, 40)))
            for _ in range(n)]


def run(kernel, texts: list[str]) -> tuple[float, int]:
    probes = [
        (kernel.EXACT, "modularity"),
        (kernel.PREFIX, "cluster"),
        (kernel.SUFFIX, "means"),
        (kernel.INFIX, "etect"),
    ]
    phrase_modes = [kernel.EXACT, kernel.EXACT]
    phrase_needles = ["community", "detection"]
    hits = 0
    start = time.perf_counter()
    for text in texts:
        tokens = kernel.tokenize(text)
        for mode, needle in probes:
            hits += kernel.seq_has_term(tokens, mode, needle)
        hits += kernel.seq_has_phrase(tokens, phrase_modes, phrase_needles)
    return time.perf_counter() - start, hits


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    texts = make_texts(n)

    py_time, py_hits = run(_pykernel, texts)
    print(f"pure python : {py_time:8.3f} s  ({n} texts, {py_hits} hits)")

    if _ckernel is None:
        print("compiled    : not built (pip install -e . compiles it)")
        return
    c_time, c_hits = run(_ckernel, texts)
    print(f"compiled    : {c_time:8.3f} s  ({n} texts, {c_hits} hits)")
    if c_hits != py_hits:
        raise SystemExit("kernel implementations disagree; this is a bug")
    print(f"speedup     : {py_time / c_time:8.2f}x")


if __name__ == "__main__":
    main()
