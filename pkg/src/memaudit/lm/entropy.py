"""Next-token distributions and their entropies (reported in bits)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import torch

from .model import ToyLM

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ModelOutput:
    logits: np.ndarray
    probs: np.ndarray


@dataclass(frozen=True)
class EntropyProfile:
    entropies: tuple[float, ...]
    positions: tuple[int, ...]

    def __len__(self):
        return len(self.entropies)

    def mean(self) -> float:
        return float(np.mean(self.entropies))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "entropy_bits"])
            for p, h in zip(self.positions, self.entropies):
                w.writerow([p, repr(float(h))])


def softmax64(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def entropy_bits_from_logits(logits: torch.Tensor) -> torch.Tensor:
    """Row-wise entropy in bits, computed in float64 from log-softmax."""
    logp = torch.log_softmax(logits.double(), dim=-1)
    return -(logp.exp() * logp).sum(dim=-1) / LN2


@torch.no_grad()
def next_distribution(model: ToyLM, context) -> ModelOutput:
    ctx = [int(t) for t in context]
    if len(ctx) > model.context_length:
        raise ValueError(f"context of {len(ctx)} tokens exceeds the model context {model.context_length}")
    logits = model(model.with_bos(ctx))[0, -1].double().numpy()
    return ModelOutput(logits=logits, probs=softmax64(logits))


def token_entropy(output) -> float:
    """Entropy in bits of a ModelOutput or a probability vector; 0·log 0 is 0."""
    p = np.asarray(output.probs if isinstance(output, ModelOutput) else output, dtype=np.float64)
    nz = p[p > 0]
    h = -float(np.sum(nz * np.log(nz))) / LN2
    return h if h > 0.0 else 0.0


@torch.no_grad()
def entropy_profile(model: ToyLM, tokens, positions=None) -> EntropyProfile:
    """Entry ``t`` is the entropy of ``P(. | tokens[:t])``.

    Contexts longer than the model window keep only their most recent tokens,
    the same rule decoding uses.
    """
    toks = [int(t) for t in tokens]
    if not toks:
        raise ValueError("tokens must be non-empty")
    pos = list(range(len(toks))) if positions is None else [int(p) for p in positions]
    H = profile_bits(model, toks)
    return EntropyProfile(tuple(float(H[p]) for p in pos), tuple(pos))


@torch.no_grad()
def profile_bits(model: ToyLM, toks: list[int]) -> np.ndarray:
    n = len(toks)
    W = model.context_length
    if n <= W:
        # same forward shape as the snippet objective, so the two agree bit for bit
        logits = model(model.with_bos(toks))[0, :n]
        return entropy_bits_from_logits(logits).numpy()
    if n == W + 1:
        logits = model(model.with_bos(toks[: n - 1]))[0]
        return entropy_bits_from_logits(logits).numpy()
    out = np.empty(n)
    out[: W + 1] = profile_bits(model, toks[: W + 1])
    for t in range(W + 1, n):
        logits = model(model.with_bos(toks[t - W : t]))[0, -1]
        out[t] = float(entropy_bits_from_logits(logits))
    return out


@torch.no_grad()
def batch_profiles(model: ToyLM, seqs: list[list[int]], batch_size: int = 64) -> list[np.ndarray]:
    """Entropy profiles for many sequences; equal-length groups share a forward pass."""
    out: list = [None] * len(seqs)
    W = model.context_length
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(seqs):
        if len(s) <= W + 1:
            groups.setdefault(len(s), []).append(i)
        else:
            out[i] = profile_bits(model, list(s))
    for n, ids in sorted(groups.items()):
        for b in range(0, len(ids), batch_size):
            chunk = ids[b : b + batch_size]
            x = model.with_bos([seqs[i][: n - 1] for i in chunk])
            H = entropy_bits_from_logits(model(x)).numpy()
            for row, i in enumerate(chunk):
                out[i] = H[row]
    return out
