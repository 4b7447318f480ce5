"""Pure-Python implementations of the hot kernels.

These are the reference behaviour; ``_kernels.pyx`` must agree with them
exactly. Regex scanning keeps the fallback within a small factor of the
compiled path for extraction.
"""

import math
import re

_TOKEN_RE = re.compile(r"[0-9A-Za-z]+")
_BTOKEN_RE = re.compile(rb"[0-9A-Za-z]+")
_RUN_RE_CACHE: dict[int, "re.Pattern[bytes]"] = {}


def _run_re(min_len: int) -> "re.Pattern[bytes]":
    pat = _RUN_RE_CACHE.get(min_len)
    if pat is None:
        pat = re.compile(rb"[\x20-\x7e]{%d,}" % min_len)
        _RUN_RE_CACHE[min_len] = pat
    return pat


def tokenize(text: str) -> list[str]:
    # Match ASCII first, lowercase after: str.lower() maps some non-ASCII
    # characters (KELVIN SIGN, dotted capital I) onto ASCII letters.
    tokens = _TOKEN_RE.findall(text)
    if not tokens:
        return tokens
    return " ".join(tokens).lower().split(" ")


def printable_runs(data, min_len: int) -> list[tuple[int, bytes]]:
    return [(m.start(), m.group()) for m in _run_re(min_len).finditer(data)]


def terms_from_bytes(data, min_len: int) -> tuple[set[str], int]:
    runs = _run_re(min_len).findall(data)
    if not runs:
        return set(), 0
    joined = b"\x00".join(runs).lower()
    terms = {t.decode("ascii") for t in set(_BTOKEN_RE.findall(joined))}
    return terms, len(runs)


def noisy_or(probabilities) -> float:
    logs = []
    for p in probabilities:
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability out of [0, 1]: {p!r}")
        if p == 1.0:
            return 1.0
        logs.append(math.log1p(-p))
    if not logs:
        return 0.0
    return -math.expm1(math.fsum(logs))
