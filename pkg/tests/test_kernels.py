import numpy as np
import pytest

from memaudit import _fallback, kernels

from oracles import dp_lcs_length

needs_ext = pytest.mark.skipif(kernels._ext is None, reason="compiled kernels not built")


def _naive_sa(text):
    t = list(text)
    return np.array(sorted(range(len(t)), key=lambda i: t[i:]), dtype=np.int64)


@pytest.mark.parametrize("n,sigma", [(1, 1), (2, 1), (17, 2), (200, 3), (500, 40)])
def test_suffix_array_matches_sort(backend, n, sigma):
    rng = np.random.default_rng(n * 31 + sigma)
    text = rng.integers(0, sigma, size=n).astype(np.int32)
    assert np.array_equal(kernels.suffix_array(text), _naive_sa(text))


def test_sa_range_brackets_every_occurrence(backend):
    rng = np.random.default_rng(5)
    text = rng.integers(0, 4, size=300).astype(np.int32)
    sa = kernels.suffix_array(text)
    tl = text.tolist()
    for _ in range(200):
        m = int(rng.integers(1, 6))
        q = rng.integers(0, 4, size=m).astype(np.int32)
        lo, hi = kernels.sa_range(text, sa, q, text_list=tl)
        hits = sorted(int(p) for p in sa[lo:hi])
        expect = [i for i in range(len(tl) - m + 1) if tl[i : i + m] == q.tolist()]
        assert hits == expect


def test_lcs_against_dp_table(backend):
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = rng.integers(0, 5, size=rng.integers(1, 60))
        b = rng.integers(0, 5, size=rng.integers(1, 60))
        length, i, j = kernels.lcs(a, b)
        assert length == dp_lcs_length(a.tolist(), b.tolist())
        assert list(a[i : i + length]) == list(b[j : j + length])


def test_lcs_tie_break_is_smallest_a_then_b(backend):
    # "1" occurs at a=0 and a=2; b has it at 1 and 3
    assert kernels.lcs([1, 9, 1], [7, 1, 8, 1]) == (1, 0, 1)


def test_lcs_no_common_token(backend):
    assert kernels.lcs([1, 2], [3, 4]) == (0, 0, 0)


@needs_ext
def test_compiled_and_fallback_agree_on_windows():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(5, 80))
        doc = rng.integers(0, 6, size=n).astype(np.int32)
        gen = doc.copy()
        flip = rng.random(n) < 0.2
        gen[flip] = rng.integers(0, 6, size=int(flip.sum()))
        a0 = int(rng.integers(0, n))
        a1 = int(rng.integers(a0 + 1, n + 1))
        window = int(rng.integers(1, n + 1))
        args = (gen, doc, 0, a0, a1, window)
        assert kernels._ext.best_window(*args) == _fallback.best_window(*args)


@needs_ext
def test_compiled_and_fallback_agree_on_suffix_arrays():
    rng = np.random.default_rng(3)
    for _ in range(50):
        text = rng.integers(0, int(rng.integers(1, 30)), size=int(rng.integers(1, 400))).astype(np.int32)
        assert np.array_equal(kernels._ext.suffix_array(text), _fallback.suffix_array(text))
