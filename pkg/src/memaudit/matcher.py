"""Tolerance-aware verification of memorized spans.

A generation is aligned against each candidate document by anchoring on their
longest common substring and scanning fixed-length windows along the anchor's
diagonal, counting substitutions only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import kernels
from .index import Document

Span = tuple[int, int]


@dataclass(frozen=True)
class MatchConfig:
    window: int = 50
    tolerances: tuple[int, ...] = (0, 5, 10)
    diversity_threshold: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "tolerances", tuple(int(k) for k in self.tolerances))
        if self.window < 1:
            raise ValueError("window must be positive")
        if not self.tolerances:
            raise ValueError("at least one tolerance is required")
        if any(b <= a for a, b in zip(self.tolerances, self.tolerances[1:])):
            raise ValueError("tolerances must be strictly increasing")
        if self.tolerances[0] < 0 or self.tolerances[-1] >= self.window:
            raise ValueError("tolerances must lie in [0, window)")
        if not 0.0 <= self.diversity_threshold <= 1.0:
            raise ValueError("diversity_threshold must lie in [0, 1]")


@dataclass
class MatchReport:
    matched: bool
    doc_id: int = -1
    gen_span: Optional[Span] = None
    doc_span: Optional[Span] = None
    mismatches: int = 0
    tolerance_class: Optional[int] = None
    anchor_length: int = 0
    diversity: float = 0.0
    filtered: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("gen_span", "doc_span"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "MatchReport":
        obj = dict(obj)
        for key in ("gen_span", "doc_span"):
            if obj.get(key) is not None:
                obj[key] = tuple(obj[key])
        return cls(**obj)

    def within(self, k: int) -> bool:
        return self.matched and self.tolerance_class is not None and self.tolerance_class <= k


def diversity_score(tokens: Sequence[int]) -> float:
    """Fraction of distinct tokens."""
    if len(tokens) == 0:
        raise ValueError("diversity of an empty sequence is undefined")
    return len(set(int(t) for t in tokens)) / len(tokens)


def longest_common_substring(a: Sequence[int], b: Sequence[int]) -> tuple[Span, Span]:
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both sequences must be non-empty")
    length, i, j = kernels.lcs(a, b)
    return (i, i + length), (j, j + length)


def extend_with_tolerance(gen: Sequence[int], doc: Sequence[int], anchor: tuple[Span, Span],
                          k: int, window: int) -> Optional[tuple[Span, Span, int]]:
    """Best ``window``-length span on the anchor's diagonal that overlaps the anchor.

    Returns ``(gen_span, doc_span, mismatches)`` for the window with the fewest
    substitutions (earliest start on ties) if that count is at most ``k``.
    """
    (a0, a1), (b0, b1) = anchor
    if a1 - a0 != b1 - b0:
        raise ValueError("anchor spans must have equal length")
    if a1 <= a0:
        return None
    offset = b0 - a0
    mism, start = kernels.best_window(gen, doc, offset, a0, a1, window)
    if mism < 0 or mism > k:
        return None
    return (start, start + window), (start + offset, start + offset + window), mism


def classify_match(gen: Sequence[int], candidates: Sequence[Document], cfg: MatchConfig) -> MatchReport:
    if len(gen) == 0:
        raise ValueError("generation must be non-empty")
    div = diversity_score(gen)
    if div < cfg.diversity_threshold:
        return MatchReport(matched=False, diversity=div, filtered=True)
    best = None
    best_key = None
    kmax = cfg.tolerances[-1]
    for doc in candidates:
        anchor = longest_common_substring(gen, doc.tokens)
        # the chosen window does not depend on k, so one scan at the largest
        # tolerance yields the smallest satisfied class
        res = extend_with_tolerance(gen, doc.tokens, anchor, kmax, cfg.window)
        if res is None:
            continue
        tol = next(t for t in cfg.tolerances if res[2] <= t)
        alen = anchor[0][1] - anchor[0][0]
        key = (tol, -alen, doc.doc_id)
        if best_key is None or key < best_key:
            best_key, best = key, (doc.doc_id, res, tol, alen)
    if best is None:
        return MatchReport(matched=False, diversity=div)
    doc_id, (gspan, dspan, mism), tol, alen = best
    return MatchReport(matched=True, doc_id=doc_id, gen_span=gspan, doc_span=dspan, mismatches=mism,
                       tolerance_class=tol, anchor_length=alen, diversity=div)


def write_reports_jsonl(path, reports: Sequence[MatchReport], extra: Sequence[dict] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, rep in enumerate(reports):
            row = rep.to_json()
            if extra is not None:
                row.update(extra[i])
            fh.write(json.dumps(row, sort_keys=True) + "\n")
