"""Printable-string extraction from raw binaries.

A printable string is a maximal run of ASCII 0x20-0x7E bytes at least
``min_len`` long (default 5). Tab and newline end a run.
"""

from __future__ import annotations

import json
import re
from typing import IO, Iterable, Iterator, NamedTuple

from . import kernels
from .index import tokenize

DEFAULT_MIN_LEN = 5
CHUNK_SIZE = 1 << 20

__all__ = [
    "DEFAULT_MIN_LEN",
    "PrintableString",
    "TermSet",
    "extract_printable_strings",
    "extract_terms",
    "extract_wide_strings",
    "iter_printable_strings",
    "terms_from_strings",
    "write_strings_jsonl",
]


class PrintableString(NamedTuple):
    offset: int
    text: str


class TermSet(NamedTuple):
    terms: frozenset[str]
    source_count: int


def _check_min_len(min_len: int) -> None:
    if min_len < 1:
        raise ValueError(f"min_len must be >= 1, got {min_len}")


def extract_printable_strings(data: bytes, min_len: int = DEFAULT_MIN_LEN) -> list[PrintableString]:
    _check_min_len(min_len)
    return [PrintableString(off, run.decode("ascii")) for off, run in kernels.printable_runs(data, min_len)]


def extract_wide_strings(data: bytes, min_len: int = DEFAULT_MIN_LEN) -> list[PrintableString]:
    """UTF-16LE runs of printable ASCII code units (off unless asked for)."""
    _check_min_len(min_len)
    pat = re.compile(rb"(?:[\x20-\x7e]\x00){%d,}" % min_len)
    return [PrintableString(m.start(), m.group().decode("utf-16-le")) for m in pat.finditer(data)]


def iter_printable_strings(
    stream: IO[bytes], min_len: int = DEFAULT_MIN_LEN, chunk_size: int = CHUNK_SIZE
) -> Iterator[PrintableString]:
    """Stream version of :func:`extract_printable_strings`.

    Reads fixed-size chunks; only the printable tail of the previous chunk
    is carried over, so memory is one chunk plus the longest run.
    """
    _check_min_len(min_len)
    carry = b""
    base = 0  # file offset of carry[0]
    while True:
        chunk = stream.read(chunk_size)
        if not chunk:
            for off, run in kernels.printable_runs(carry, min_len):
                yield PrintableString(base + off, run.decode("ascii"))
            return
        buf = carry + chunk
        # a run touching the end of buf may continue into the next chunk
        tail = len(buf)
        while tail > 0 and 0x20 <= buf[tail - 1] <= 0x7E:
            tail -= 1
        for off, run in kernels.printable_runs(buf[:tail], min_len):
            yield PrintableString(base + off, run.decode("ascii"))
        carry = buf[tail:]
        base += tail


def terms_from_strings(strings: Iterable[PrintableString | str]) -> TermSet:
    terms: set[str] = set()
    count = 0
    for s in strings:
        text = s.text if isinstance(s, PrintableString) else s
        terms.update(tokenize(text))
        count += 1
    return TermSet(frozenset(terms), count)


def extract_terms(data: bytes, min_len: int = DEFAULT_MIN_LEN, wide: bool = False) -> TermSet:
    """Extraction and tokenization in one pass over ``data``.

    Equivalent to ``terms_from_strings(extract_printable_strings(data))``
    (plus the wide strings when ``wide`` is set).
    """
    _check_min_len(min_len)
    terms, count = kernels.terms_from_bytes(data, min_len)
    if wide:
        extra = terms_from_strings(extract_wide_strings(data, min_len))
        terms |= extra.terms
        count += extra.source_count
    return TermSet(frozenset(terms), count)


def write_strings_jsonl(strings: Iterable[PrintableString], fh: IO[str]) -> int:
    n = 0
    for s in strings:
        fh.write(json.dumps({"offset": s.offset, "text": s.text}) + "\n")
        n += 1
    return n
