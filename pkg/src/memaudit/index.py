"""Exact-match search over a token corpus with a suffix array.

Documents are concatenated as ``doc_0 ⊥ doc_1 ⊥ ... doc_n ⊥`` where ``⊥`` is a
reserved sentinel id, so no query without the sentinel can match across a
document boundary.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .binio import read_container, write_container
from .lm.vocab import Vocabulary

INDEX_MAGIC = "MEMAUDIT-INDEX"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Document:
    doc_id: int
    tokens: tuple[int, ...]

    def __post_init__(self):
        if self.doc_id < 0:
            raise ValueError("doc_id must be non-negative")
        if len(self.tokens) == 0:
            raise ValueError(f"document {self.doc_id} is empty")
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))


@dataclass(frozen=True)
class RetrievalConfig:
    shingle_length: int = 10
    shingle_stride: int = 5
    max_candidates: int = 20
    pre_filter_diversity_threshold: float = 0.1

    def __post_init__(self):
        if self.shingle_length < 2:
            raise ValueError("shingle_length must be >= 2")
        if self.shingle_stride < 1:
            raise ValueError("shingle_stride must be >= 1")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if not 0.0 <= self.pre_filter_diversity_threshold <= 1.0:
            raise ValueError("pre_filter_diversity_threshold must lie in [0, 1]")


class SuffixIndex:
    """Immutable suffix-array index; build with :func:`build_index`."""

    def __init__(self, text: np.ndarray, suffix_order: np.ndarray, doc_starts: np.ndarray,
                 doc_ids: np.ndarray, sentinel: int, vocab_size: int):
        self.text = np.ascontiguousarray(text, dtype=np.int32)
        self.suffix_order = np.ascontiguousarray(suffix_order, dtype=np.int64)
        self.doc_starts = np.ascontiguousarray(doc_starts, dtype=np.int64)
        self.doc_ids = np.ascontiguousarray(doc_ids, dtype=np.int64)
        self.sentinel = int(sentinel)
        self.vocab_size = int(vocab_size)
        for arr in (self.text, self.suffix_order, self.doc_starts, self.doc_ids):
            arr.flags.writeable = False
        self._pos_of_id = {int(d): k for k, d in enumerate(self.doc_ids)}
        self._text_list = None

    @property
    def doc_boundaries(self) -> list[tuple[int, int]]:
        return [(int(s), int(d)) for s, d in zip(self.doc_starts, self.doc_ids)]

    @property
    def n_documents(self) -> int:
        return len(self.doc_ids)

    @property
    def n_tokens(self) -> int:
        """Document tokens, sentinels excluded."""
        return len(self.text) - len(self.doc_ids)

    def document(self, doc_id: int) -> Document:
        k = self._pos_of_id[int(doc_id)]
        start = int(self.doc_starts[k])
        end = int(self.doc_starts[k + 1]) - 1 if k + 1 < len(self.doc_starts) else len(self.text) - 1
        return Document(int(doc_id), tuple(self.text[start:end].tolist()))

    def documents(self) -> list[Document]:
        return [self.document(int(d)) for d in self.doc_ids]

    def _range(self, query: np.ndarray) -> tuple[int, int]:
        if kernels.BACKEND == "python" and self._text_list is None:
            self._text_list = self.text.tolist()
        return kernels.sa_range(self.text, self.suffix_order, query, text_list=self._text_list)


def _check_query(index: SuffixIndex, query) -> np.ndarray:
    q = np.asarray(query, dtype=np.int64)
    if q.ndim != 1 or len(q) == 0:
        raise ValueError("query must be a non-empty token sequence")
    if np.any(q == index.sentinel):
        raise ValueError("query contains the sentinel id")
    return q.astype(np.int32)


def build_index(documents: Sequence[Document], vocab: Vocabulary | None = None) -> SuffixIndex:
    """Index ``documents``; the sentinel is ``vocab.sentinel_id`` or a fresh id above the max token."""
    documents = list(documents)
    if not documents:
        raise ValueError("cannot build an index over zero documents")
    ids = [d.doc_id for d in documents]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate doc_id")
    max_tok = max(max(d.tokens) for d in documents)
    if vocab is not None:
        sentinel, vocab_size = vocab.sentinel_id, vocab.size
        if max_tok >= vocab_size:
            raise ValueError(f"token id {max_tok} outside vocabulary of size {vocab_size}")
    else:
        sentinel, vocab_size = max_tok + 1, max_tok + 2
    if min(min(d.tokens) for d in documents) < 0:
        raise ValueError("negative token id")
    pieces, starts = [], []
    pos = 0
    for d in documents:
        arr = np.asarray(d.tokens, dtype=np.int32)
        if np.any(arr == sentinel):
            raise ValueError(f"document {d.doc_id} contains the sentinel id {sentinel}")
        starts.append(pos)
        pieces.append(arr)
        pieces.append(np.array([sentinel], dtype=np.int32))
        pos += len(arr) + 1
    text = np.concatenate(pieces)
    sa = kernels.suffix_array(text)
    return SuffixIndex(text, sa, np.asarray(starts), np.asarray(ids), sentinel, vocab_size)


def count_occurrences(index: SuffixIndex, query) -> int:
    lo, hi = index._range(_check_query(index, query))
    return hi - lo


def find_documents(index: SuffixIndex, query) -> list[tuple[int, list[int]]]:
    """Every exact occurrence as ``(doc_id, sorted document-local offsets)``, ordered by doc_id."""
    lo, hi = index._range(_check_query(index, query))
    if lo == hi:
        return []
    positions = np.sort(index.suffix_order[lo:hi])
    slot = np.searchsorted(index.doc_starts, positions, side="right") - 1
    hits: dict[int, list[int]] = {}
    for p, k in zip(positions.tolist(), slot.tolist()):
        hits.setdefault(int(index.doc_ids[k]), []).append(p - int(index.doc_starts[k]))
    return [(d, sorted(offs)) for d, offs in sorted(hits.items())]


def retrieve_candidates(index: SuffixIndex, generation, cfg: RetrievalConfig = RetrievalConfig()) -> list[int]:
    from .matcher import diversity_score

    gen = [int(t) for t in generation]
    if not gen:
        raise ValueError("generation must be non-empty")
    if diversity_score(gen) < cfg.pre_filter_diversity_threshold:
        return []
    hit_count: Counter = Counter()
    L = cfg.shingle_length
    for s in range(0, len(gen) - L + 1, cfg.shingle_stride):
        shingle = gen[s : s + L]
        if index.sentinel in shingle:
            continue
        for doc_id, _ in find_documents(index, shingle):
            hit_count[doc_id] += 1
    ranked = sorted(hit_count.items(), key=lambda kv: (-kv[1], kv[0]))
    return [d for d, _ in ranked[: cfg.max_candidates]]


# --- persistence ---------------------------------------------------------


def save_index(index: SuffixIndex, path) -> None:
    meta = {"sentinel": index.sentinel, "vocab_size": index.vocab_size}
    write_container(path, INDEX_MAGIC, INDEX_VERSION, meta, {
        "text": index.text, "suffix_order": index.suffix_order,
        "doc_starts": index.doc_starts, "doc_ids": index.doc_ids,
    })


def load_index(path) -> SuffixIndex:
    meta, arr = read_container(path, INDEX_MAGIC, INDEX_VERSION)
    return SuffixIndex(arr["text"], arr["suffix_order"], arr["doc_starts"], arr["doc_ids"],
                       meta["sentinel"], meta["vocab_size"])


class CorpusFormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def load_corpus_jsonl(path, vocab: Vocabulary | None = None) -> list[Document]:
    """Read ``{"doc_id", "text"}`` or ``{"doc_id", "tokens"}`` lines."""
    vocab = vocab or Vocabulary.default()
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(path, lineno, f"invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("doc_id"), int):
                raise CorpusFormatError(path, lineno, "expected an object with an integer doc_id")
            try:
                if "tokens" in obj:
                    toks = obj["tokens"]
                    if not isinstance(toks, list) or not all(isinstance(t, int) for t in toks):
                        raise ValueError("tokens must be a list of integers")
                    if any(t < 0 or t >= vocab.size or t in vocab.reserved_ids for t in toks):
                        raise ValueError("token id outside the ordinary vocabulary")
                elif "text" in obj:
                    toks = vocab.encode(obj["text"])
                else:
                    raise ValueError("needs a 'text' or 'tokens' field")
                docs.append(Document(obj["doc_id"], tuple(toks)))
            except ValueError as e:
                raise CorpusFormatError(path, lineno, str(e)) from None
    if not docs:
        raise CorpusFormatError(path, 0, "corpus is empty")
    return docs


def write_corpus_jsonl(path, documents: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in documents:
            fh.write(json.dumps({"doc_id": d.doc_id, "tokens": list(d.tokens)}) + "\n")

