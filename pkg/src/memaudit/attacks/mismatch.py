"""Mismatched question/answer data and the fine-tuning step that uses it."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..lm.model import ToyLM
from ..lm.train import TrainConfig, TrainResult, sft


@dataclass(frozen=True)
class MismatchedPair:
    question: str
    answer: str
    q_index: int  # position in the deduplicated list
    a_index: int

    def to_record(self) -> dict:
        return {"instruction": self.question, "input": "", "output": self.answer}


@dataclass(frozen=True)
class MismatchedDataset:
    pairs: tuple[MismatchedPair, ...]
    shift: int
    n_input: int
    n_deduplicated: int

    def __len__(self):
        return len(self.pairs)

    def records(self) -> list[dict]:
        return [p.to_record() for p in self.pairs]

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records():
                fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def dedupe_questions(qa: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    """Drop repeated questions, keeping the first answer seen for each."""
    seen = set()
    out = []
    for q, a in qa:
        if q not in seen:
            seen.add(q)
            out.append((q, a))
    return out


def build_mismatched_dataset(qa: Sequence[tuple[str, str]], shift: int = 1, min_q_chars: int = 10,
                             min_a_chars: int = 50) -> MismatchedDataset:
    """Pair question ``i`` with answer ``(i + shift) mod n`` after deduplication, then filter by length."""
    if not qa:
        raise ValueError("no question/answer pairs")
    if shift < 1:
        raise ValueError("shift must be a positive integer")
    uniq = dedupe_questions(qa)
    n = len(uniq)
    pairs = []
    for i, (q, _) in enumerate(uniq):
        j = (i + shift) % n
        a = uniq[j][1]
        if len(q) >= min_q_chars and len(a) >= min_a_chars:
            pairs.append(MismatchedPair(q, a, i, j))
    if not pairs:
        raise ValueError("every pair was removed by the length filters")
    return MismatchedDataset(tuple(pairs), shift, len(qa), n)


def encode_text_pairs(model: ToyLM, pairs: Sequence[tuple[str, str]],
                      append_eos: bool = True) -> list[tuple[list[int], list[int]]]:
    """Raw concatenation, no chat template.  Targets end with eos so the model
    learns where an answer stops."""
    v = model.vocab
    tail = [v.eos_id] if append_eos else []
    return [(v.encode(q), v.encode(a) + tail) for q, a in pairs]


def mismatched_sft(model: ToyLM, dataset: MismatchedDataset, cfg: TrainConfig) -> TrainResult:
    if len(dataset) == 0:
        raise ValueError("mismatched dataset is empty")
    return sft(model, encode_text_pairs(model, [(p.question, p.answer) for p in dataset.pairs]), cfg)
