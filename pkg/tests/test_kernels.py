import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from capinfer import kernels

from oracles import scalar_printable_runs, scalar_tokenize


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@given(st.text())
def test_tokenize_matches_scalar_oracle(text):
    assert kernels.pure.tokenize(text) == scalar_tokenize(text)
    if kernels.compiled is not None:
        assert kernels.compiled.tokenize(text) == scalar_tokenize(text)


@given(st.binary(max_size=300), st.integers(1, 8))
def test_printable_runs_match_scalar_oracle(data, min_len):
    expected = scalar_printable_runs(data, min_len)
    assert kernels.pure.printable_runs(data, min_len) == expected
    if kernels.compiled is not None:
        assert kernels.compiled.printable_runs(data, min_len) == expected


@given(st.binary(max_size=300))
def test_terms_from_bytes_matches_composition(data):
    runs = scalar_printable_runs(data, 5)
    expected = {t for _, r in runs for t in scalar_tokenize(r.decode("ascii"))}
    for impl in filter(None, (kernels.pure, kernels.compiled)):
        terms, n = impl.terms_from_bytes(data, 5)
        assert terms == expected
        assert n == len(runs)


@settings(max_examples=300)
@given(st.lists(st.floats(0.0, 1.0), max_size=40))
def test_noisy_or_backends_agree(ps):
    expected = 1.0 - math.prod(1.0 - p for p in ps)
    for impl in filter(None, (kernels.pure, kernels.compiled)):
        assert impl.noisy_or(ps) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
def test_noisy_or_domain(backend, bad):
    with pytest.raises(ValueError):
        backend.noisy_or([0.5, bad])


def test_kernels_accept_bytearray_and_memoryview(backend):
    data = b"\x00hello world\x01x"
    for buf in (bytearray(data), memoryview(data)):
        assert backend.printable_runs(buf, 5) == [(1, b"hello world")]
        assert backend.terms_from_bytes(buf, 5)[0] == {"hello", "world"}


def test_large_buffer_equivalence():
    if kernels.compiled is None:
        pytest.skip("compiled kernels not built")
    rng = random.Random(1)
    alphabet = bytes(range(0x20, 0x7F)) * 3 + bytes(range(0, 0x20)) + bytes(range(0x7F, 0x100))
    data = bytes(rng.choice(alphabet) for _ in range(200_000))
    assert kernels.compiled.printable_runs(data, 5) == kernels.pure.printable_runs(data, 5)
    assert kernels.compiled.terms_from_bytes(data, 5) == kernels.pure.terms_from_bytes(data, 5)
