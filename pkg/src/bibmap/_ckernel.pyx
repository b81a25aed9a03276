# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled matching kernel; behavioral twin of bibmap._pykernel.

Hot loops for corpus-scale query evaluation: tokenization and wildcard /
phrase scans. Must stay observationally identical to the pure-Python
fallback; the test suite runs the same cases against both.
"""

IMPLEMENTATION = "cython"

EXACT, PREFIX, SUFFIX, INFIX = 0, 1, 2, 3


def tokenize(str text):
    """Maximal runs of alphanumerics and hyphens; input must be pre-folded."""
    cdef list tokens = []
    cdef Py_ssize_t i = 0, start
    cdef Py_ssize_t n = len(text)
    cdef Py_UCS4 ch
    while i < n:
        ch = text[i]
        if ch.isalnum() or ch == u"-":
            start = i
            i += 1
            while i < n:
                ch = text[i]
                if not (ch.isalnum() or ch == u"-"):
                    break
                i += 1
            tokens.append(text[start:i])
        else:
            i += 1
    return tokens


cdef inline bint _match(str token, int mode, str needle):
    if mode == EXACT:
        return token == needle
    elif mode == PREFIX:
        return token.startswith(needle)
    elif mode == SUFFIX:
        return token.endswith(needle)
    return needle in token


def seq_has_term(list tokens, int mode, str needle):
    cdef Py_ssize_t i
    cdef Py_ssize_t n = len(tokens)
    for i in range(n):
        if _match(<str>tokens[i], mode, needle):
            return True
    return False


def seq_has_phrase(list tokens, list modes, list needles):
    cdef Py_ssize_t k = len(needles)
    cdef Py_ssize_t n = len(tokens)
    cdef Py_ssize_t i, j
    cdef bint ok
    if k == 0 or n < k:
        return False
    for i in range(n - k + 1):
        ok = True
        for j in range(k):
            if not _match(<str>tokens[i + j], <int>modes[j], <str>needles[j]):
                ok = False
                break
        if ok:
            return True
    return False
