"""Selects the matching kernel at import: compiled extension when present,
pure-Python fallback otherwise.

Set BIBMAP_PURE_KERNEL=1 to force the fallback (used by the benchmark and
by CI environments without a compiler).
"""

import os

from bibmap import _pykernel

if os.environ.get("BIBMAP_PURE_KERNEL") == "1":
    _impl = _pykernel
else:
    try:
        from bibmap import _ckernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernel

IMPLEMENTATION = _impl.IMPLEMENTATION
EXACT = _impl.EXACT
PREFIX = _impl.PREFIX
SUFFIX = _impl.SUFFIX
INFIX = _impl.INFIX
tokenize = _impl.tokenize
seq_has_term = _impl.seq_has_term
seq_has_phrase = _impl.seq_has_phrase
