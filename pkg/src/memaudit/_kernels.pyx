# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for suffix-array search and tolerance-aware alignment.

Every function here has a drop-in twin in :mod:`memaudit._fallback`; the two
must agree exactly (see ``tests/test_kernels.py``).
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()

ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64


def suffix_array(const i32[::1] text):
    """Prefix-doubling suffix array with radix passes, O(n log n)."""
    cdef Py_ssize_t n = text.shape[0]
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    cdef i64[::1] sa = out
    cdef i64 *rank = <i64 *> malloc(n * sizeof(i64))
    cdef i64 *tmp = <i64 *> malloc(n * sizeof(i64))
    cdef i64 *order = <i64 *> malloc(n * sizeof(i64))
    cdef Py_ssize_t i, j, k, classes, sigma
    cdef i64 lo, mx, r1, r2, p1, p2
    cdef i64 *cnt
    if rank == NULL or tmp == NULL or order == NULL:
        free(rank); free(tmp); free(order)
        raise MemoryError()
    try:
        lo = text[0]
        mx = text[0]
        for i in range(n):
            if text[i] < lo:
                lo = text[i]
            if text[i] > mx:
                mx = text[i]
        sigma = <Py_ssize_t>(mx - lo + 1)
        if sigma < n:
            sigma = n
        cnt = <i64 *> malloc((sigma + 1) * sizeof(i64))
        if cnt == NULL:
            raise MemoryError()
        try:
            # initial counting sort on the token itself
            memset(cnt, 0, (sigma + 1) * sizeof(i64))
            for i in range(n):
                cnt[text[i] - lo + 1] += 1
            for i in range(sigma):
                cnt[i + 1] += cnt[i]
            for i in range(n):
                sa[cnt[text[i] - lo]] = i
                cnt[text[i] - lo] += 1
            classes = 0
            rank[sa[0]] = 0
            for i in range(1, n):
                if text[sa[i]] != text[sa[i - 1]]:
                    classes += 1
                rank[sa[i]] = classes
            classes += 1
            k = 1
            while classes < n:
                # order by second key: suffixes without a k-th successor come first
                j = 0
                for i in range(n - k, n):
                    order[j] = i
                    j += 1
                for i in range(n):
                    if sa[i] >= k:
                        order[j] = sa[i] - k
                        j += 1
                # stable counting sort by first key
                memset(cnt, 0, (classes + 1) * sizeof(i64))
                for i in range(n):
                    cnt[rank[i] + 1] += 1
                for i in range(classes):
                    cnt[i + 1] += cnt[i]
                for i in range(n):
                    sa[cnt[rank[order[i]]]] = order[i]
                    cnt[rank[order[i]]] += 1
                tmp[sa[0]] = 0
                classes = 0
                for i in range(1, n):
                    p1 = sa[i]
                    p2 = sa[i - 1]
                    r1 = rank[p1 + k] if p1 + k < n else -1
                    r2 = rank[p2 + k] if p2 + k < n else -1
                    if rank[p1] != rank[p2] or r1 != r2:
                        classes += 1
                    tmp[p1] = classes
                classes += 1
                for i in range(n):
                    rank[i] = tmp[i]
                k <<= 1
        finally:
            free(cnt)
    finally:
        free(rank)
        free(tmp)
        free(order)
    return out


cdef inline int _cmp(const i32[::1] text, Py_ssize_t n, i64 pos,
                     const i32[::1] query, Py_ssize_t m) nogil:
    # -1 if suffix < query, 0 if query is a prefix of suffix, +1 otherwise
    cdef Py_ssize_t t = 0
    while t < m:
        if pos + t >= n:
            return -1
        if text[pos + t] < query[t]:
            return -1
        if text[pos + t] > query[t]:
            return 1
        t += 1
    return 0


def sa_range(const i32[::1] text, const i64[::1] sa, const i32[::1] query):
    """Half-open range [lo, hi) of suffix ranks whose prefix equals ``query``."""
    cdef Py_ssize_t n = text.shape[0]
    cdef Py_ssize_t m = query.shape[0]
    cdef Py_ssize_t lo = 0, hi = n, mid, first
    with nogil:
        while lo < hi:
            mid = (lo + hi) >> 1
            if _cmp(text, n, sa[mid], query, m) < 0:
                lo = mid + 1
            else:
                hi = mid
        first = lo
        hi = n
        while lo < hi:
            mid = (lo + hi) >> 1
            if _cmp(text, n, sa[mid], query, m) <= 0:
                lo = mid + 1
            else:
                hi = mid
    return first, lo


def lcs(const i32[::1] a, const i32[::1] b):
    """Longest common substring by rolling-row DP.

    Returns ``(length, a_start, b_start)``; ties go to the smallest a_start,
    then the smallest b_start.
    """
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef i64 best = 0, bi = 0, bj = 0, v
    cdef i64 *prev = <i64 *> malloc((m + 1) * sizeof(i64))
    cdef i64 *cur = <i64 *> malloc((m + 1) * sizeof(i64))
    cdef i64 *swap
    if prev == NULL or cur == NULL:
        free(prev); free(cur)
        raise MemoryError()
    with nogil:
        memset(prev, 0, (m + 1) * sizeof(i64))
        cur[0] = 0
        for i in range(n):
            for j in range(m):
                if a[i] == b[j]:
                    v = prev[j] + 1
                    cur[j + 1] = v
                    if v > best:
                        best = v
                        bi = i - v + 1
                        bj = j - v + 1
                else:
                    cur[j + 1] = 0
            swap = prev
            prev = cur
            cur = swap
    free(prev)
    free(cur)
    if best == 0:
        return 0, 0, 0
    return best, bi, bj


def best_window(const i32[::1] gen, const i32[::1] doc, Py_ssize_t offset,
                Py_ssize_t anchor_start, Py_ssize_t anchor_end, Py_ssize_t window):
    """Scan windows on the diagonal ``doc_pos = gen_pos + offset``.

    Only windows overlapping ``[anchor_start, anchor_end)`` (generation
    coordinates) are considered.  Returns ``(mismatches, gen_start)`` of the
    earliest window with the fewest mismatches, or ``(-1, -1)`` when no window
    fits on the diagonal.
    """
    cdef Py_ssize_t n = gen.shape[0], m = doc.shape[0]
    cdef Py_ssize_t lo = 0 if offset >= 0 else -offset
    cdef Py_ssize_t hi = n if n < m - offset else m - offset
    cdef Py_ssize_t s_min, s_max, s, t
    cdef i64 cur = 0, best = -1, best_s = -1
    if window <= 0 or anchor_end <= anchor_start:
        return -1, -1
    s_min = anchor_start - window + 1
    if s_min < lo:
        s_min = lo
    s_max = anchor_end - 1
    if s_max > hi - window:
        s_max = hi - window
    if s_min > s_max:
        return -1, -1
    with nogil:
        for t in range(s_min, s_min + window):
            if gen[t] != doc[t + offset]:
                cur += 1
        best = cur
        best_s = s_min
        for s in range(s_min + 1, s_max + 1):
            if gen[s - 1] != doc[s - 1 + offset]:
                cur -= 1
            if gen[s + window - 1] != doc[s + window - 1 + offset]:
                cur += 1
            if cur < best:
                best = cur
                best_s = s
    return best, best_s
