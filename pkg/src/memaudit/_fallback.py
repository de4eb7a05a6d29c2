"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def suffix_array(text: np.ndarray) -> np.ndarray:
    n = len(text)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    text = np.asarray(text, dtype=np.int64)
    # dense initial ranks
    _, rank = np.unique(text, return_inverse=True)
    rank = rank.astype(np.int64)
    k = 1
    while True:
        second = np.full(n, -1, dtype=np.int64)
        if k < n:
            second[: n - k] = rank[k:]
        sa = np.lexsort((second, rank))
        r, s = rank[sa], second[sa]
        diff = np.empty(n, dtype=np.int64)
        diff[0] = 0
        diff[1:] = (r[1:] != r[:-1]) | (s[1:] != s[:-1])
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[sa] = np.cumsum(diff)
        rank = new_rank
        if rank.max() == n - 1:
            return sa.astype(np.int64)
        k <<= 1


def sa_range(text, sa, query) -> tuple[int, int]:
    # ``text`` may be a list (preferred; slices compare in C) or an array
    tl = text if isinstance(text, list) else list(map(int, text))
    q = list(map(int, query))
    m = len(q)
    lo, hi = 0, len(sa)
    while lo < hi:
        mid = (lo + hi) // 2
        p = int(sa[mid])
        if tl[p : p + m] < q:
            lo = mid + 1
        else:
            hi = mid
    first = lo
    hi = len(sa)
    while lo < hi:
        mid = (lo + hi) // 2
        p = int(sa[mid])
        if tl[p : p + m] <= q:
            lo = mid + 1
        else:
            hi = mid
    return first, lo


def lcs(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int]:
    a = np.asarray(a)
    b = np.asarray(b)
    m = len(b)
    prev = np.zeros(m + 1, dtype=np.int64)
    best = bi = bj = 0
    for i in range(len(a)):
        cur = np.zeros(m + 1, dtype=np.int64)
        eq = b == a[i]
        cur[1:] = np.where(eq, prev[:-1] + 1, 0)
        j = int(np.argmax(cur))
        v = int(cur[j])
        # argmax returns the first (smallest b_end) maximum in this row
        if v > best:
            best, bi, bj = v, i - v + 1, j - v
        prev = cur
    if best == 0:
        return 0, 0, 0
    return best, bi, bj


def best_window(gen, doc, offset: int, anchor_start: int, anchor_end: int, window: int) -> tuple[int, int]:
    gen = np.asarray(gen)
    doc = np.asarray(doc)
    n, m = len(gen), len(doc)
    if window <= 0 or anchor_end <= anchor_start:
        return -1, -1
    lo = max(0, -offset)
    hi = min(n, m - offset)
    s_min = max(lo, anchor_start - window + 1)
    s_max = min(anchor_end - 1, hi - window)
    if s_min > s_max:
        return -1, -1
    seg = slice(s_min, s_max + window)
    mism = (gen[seg] != doc[s_min + offset : s_max + window + offset]).astype(np.int64)
    csum = np.concatenate(([0], np.cumsum(mism)))
    sums = csum[window:] - csum[:-window]
    j = int(np.argmin(sums))
    return int(sums[j]), s_min + j
