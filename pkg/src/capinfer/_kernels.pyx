# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: printable-run scanning, tokenization and noisy-OR.

Behaviour is identical to ``_purekernels``; the test-suite checks both.
"""

from libc.math cimport log1p, expm1, isnan
from libc.stdlib cimport malloc, free


cdef inline bint _is_alnum(unsigned int c) noexcept nogil:
    return (48 <= c <= 57) or (65 <= c <= 90) or (97 <= c <= 122)


cdef inline bint _is_printable(unsigned char c) noexcept nogil:
    return 0x20 <= c <= 0x7E


def tokenize(str text):
    cdef Py_ssize_t i, n = len(text), start = -1
    cdef Py_UCS4 c
    cdef list out = []
    for i in range(n):
        c = text[i]
        if _is_alnum(c):
            if start < 0:
                start = i
        elif start >= 0:
            out.append(text[start:i].lower())
            start = -1
    if start >= 0:
        out.append(text[start:n].lower())
    return out


def printable_runs(const unsigned char[::1] data, Py_ssize_t min_len):
    cdef Py_ssize_t i, n = data.shape[0], start = -1
    cdef list out = []
    for i in range(n):
        if _is_printable(data[i]):
            if start < 0:
                start = i
        elif start >= 0:
            if i - start >= min_len:
                out.append((start, bytes(data[start:i])))
            start = -1
    if start >= 0 and n - start >= min_len:
        out.append((start, bytes(data[start:n])))
    return out


cdef Py_ssize_t _tokens_in_run(const unsigned char[::1] data, Py_ssize_t lo,
                               Py_ssize_t hi, char* buf, set terms) except -1:
    cdef Py_ssize_t j, k, start = -1
    cdef unsigned char c
    for j in range(lo, hi + 1):
        if j < hi and _is_alnum(data[j]):
            if start < 0:
                start = j
        elif start >= 0:
            for k in range(start, j):
                c = data[k]
                if 65 <= c <= 90:
                    c += 32
                buf[k - start] = <char>c
            terms.add(buf[:j - start].decode("ascii"))
            start = -1
    return 0


def terms_from_bytes(const unsigned char[::1] data, Py_ssize_t min_len):
    cdef Py_ssize_t i, n = data.shape[0], start = -1, nruns = 0
    cdef set terms = set()
    cdef char* buf
    if n == 0:
        return terms, 0
    buf = <char*>malloc(n)
    if buf == NULL:
        raise MemoryError()
    try:
        for i in range(n + 1):
            if i < n and _is_printable(data[i]):
                if start < 0:
                    start = i
            elif start >= 0:
                if i - start >= min_len:
                    _tokens_in_run(data, start, i, buf, terms)
                    nruns += 1
                start = -1
    finally:
        free(buf)
    return terms, nruns


def noisy_or(probabilities):
    # Neumaier-compensated sum of log(1 - p), then 1 - exp(sum).
    cdef double p, x, v, s = 0.0, comp = 0.0, t
    cdef Py_ssize_t count = 0
    for x in probabilities:
        p = x
        if isnan(p) or p < 0.0 or p > 1.0:
            raise ValueError(f"probability out of [0, 1]: {x!r}")
        if p == 1.0:
            return 1.0
        v = log1p(-p)
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        count += 1
    if count == 0:
        return 0.0
    return -expm1(s + comp)
