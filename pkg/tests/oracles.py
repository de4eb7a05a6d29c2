"""Brute-force reference implementations the fast code is checked against."""

from __future__ import annotations

import itertools

import numpy as np


def naive_occurrences(docs, query):
    """{doc_id: [offsets]} by direct scan, overlaps counted."""
    q = list(query)
    m = len(q)
    out = {}
    for d in docs:
        t = list(d.tokens)
        offs = [i for i in range(len(t) - m + 1) if t[i : i + m] == q]
        if offs:
            out[d.doc_id] = offs
    return out


def naive_count(docs, query) -> int:
    return sum(len(v) for v in naive_occurrences(docs, query).values())


def dp_lcs_length(a, b) -> int:
    """Classic O(nm) table."""
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                best = max(best, cur[j])
        prev = cur
    return best


def brute_min_mismatch(gen, doc, window: int):
    """Smallest substitution count over every diagonal and every window, or None."""
    g, d = np.asarray(gen), np.asarray(doc)
    best = None
    for gs in range(len(g) - window + 1):
        gw = g[gs : gs + window]
        for ds in range(len(d) - window + 1):
            m = int(np.count_nonzero(gw != d[ds : ds + window]))
            if best is None or m < best:
                best = m
    return best


def brute_match_class(gen, docs, window: int, tolerances):
    """(matched, minimal tolerance class) by exhaustive diagonal/window scan."""
    best = None
    for doc in docs:
        m = brute_min_mismatch(gen, doc.tokens, window)
        if m is not None and (best is None or m < best):
            best = m
    if best is None:
        return False, None
    for k in tolerances:
        if best <= k:
            return True, k
    return False, None


def brute_shingle_candidates(docs, gen, L, stride, cap):
    hits = {}
    for s in range(0, len(gen) - L + 1, stride):
        sh = list(gen[s : s + L])
        for doc_id in naive_occurrences(docs, sh):
            hits[doc_id] = hits.get(doc_id, 0) + 1
    ranked = sorted(hits.items(), key=lambda kv: (-kv[1], kv[0]))
    return [d for d, _ in ranked[:cap]]


def exhaustive_objective_max(score_fn, vocab_ids, L: int) -> float:
    """Maximum of ``score_fn`` over every length-``L`` snippet."""
    snippets = np.asarray(list(itertools.product(vocab_ids, repeat=L)), dtype=np.int64)
    return float(score_fn(snippets).max())


def entropy_bits_reference(p) -> float:
    """-sum p log2 p written out term by term."""
    import math

    return -sum(x * math.log2(x) for x in p if x > 0)


def planted_pair(rng, window: int = 10, vocab: int = 20, max_sub: int = 3):
    """A document and a generation holding a noisy copy of part of it."""
    doc = rng.integers(0, vocab, size=int(rng.integers(window, 60))).tolist()
    L = int(rng.integers(window, len(doc) + 1))
    s = int(rng.integers(0, len(doc) - L + 1))
    piece = list(doc[s : s + L])
    for p in rng.choice(L, size=int(rng.integers(0, max_sub + 1)), replace=False):
        piece[p] = int(rng.integers(0, vocab))
    left = rng.integers(0, vocab, size=int(rng.integers(0, 15))).tolist()
    right = rng.integers(0, vocab, size=int(rng.integers(0, 15))).tolist()
    return left + piece + right, doc


def mismatch_fixture():
    """2,500 pairs: 2,400 distinct questions, then 100 repeats with conflicting answers.

    Every sixth question is shorter than 10 characters and answers 2 and 4
    are shorter than 50 characters.
    """
    qa = []
    for i in range(2400):
        q = f"Q{i}?" if i % 6 == 0 else f"what is entry number {i}?"
        a = "no." if i in (2, 4) else f"entry {i} is recorded in the ledger of the old archive, page {i % 97}."
        qa.append((q, a))
    for k in range(100):
        i = 1 + 23 * k
        qa.append((qa[i][0], "short"))  # must be ignored: the first answer wins
    return qa


def mismatch_survivors(qa, shift: int = 1, min_q: int = 10, min_a: int = 50) -> int:
    """Survivor count written independently of the library builder."""
    first = {}
    for q, a in qa:
        first.setdefault(q, a)  # dicts keep insertion order
    qs = list(first)
    n = len(qs)
    return sum(1 for i in range(n) if len(qs[i]) >= min_q and len(first[qs[(i + shift) % n]]) >= min_a)
