"""Entropy-maximizing snippet optimization (greedy coordinate search)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import torch

from ..lm.entropy import entropy_bits_from_logits
from ..lm.model import ToyLM
from .baselines import AttackSnippet

OBJECTIVES = ("average_snippet_entropy", "last_token_entropy")
PROPOSALS = ("gradient_guided", "sampled")


class GradientUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class CIAConfig:
    steps: int = 200
    top_k: int = 64
    candidates_per_step: int = 256
    objective: str = "average_snippet_entropy"
    proposal: str = "gradient_guided"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.top_k < 1 or self.candidates_per_step < 1:
            raise ValueError("top_k and candidates_per_step must be positive")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")


def _objective_from_logits(logits: torch.Tensor, objective: str) -> torch.Tensor:
    # logits: B x (L+1) x V over BOS + snippet; position t predicts s_{t+1}
    H = entropy_bits_from_logits(logits)
    if objective == "average_snippet_entropy":
        return H[:, :-1].mean(dim=1)
    return H[:, -1]


@torch.no_grad()
def _score(model: ToyLM, snippets: np.ndarray, objective: str, batch: int = 1024) -> np.ndarray:
    out = []
    for b in range(0, len(snippets), batch):
        out.append(_objective_from_logits(model(model.with_bos(snippets[b : b + batch])), objective).numpy())
    return np.concatenate(out)


def cia_objective(model: ToyLM, snippet, objective: str = "average_snippet_entropy") -> float:
    """Mean of H(P(.|s_<t)) over t=1..L, or H(P(.|S)) for the last-token variant; bits."""
    toks = snippet.tokens if isinstance(snippet, AttackSnippet) else tuple(snippet)
    if len(toks) < 1:
        raise ValueError("snippet must be non-empty")
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if len(toks) > model.context_length:
        raise ValueError("snippet longer than the model context")
    return float(_score(model, np.asarray([toks], dtype=np.int64), objective)[0])


def _token_gradients(model: ToyLM, snippets: np.ndarray, objective: str) -> torch.Tensor:
    """d objective / d one-hot input, shape ``N x L x V``."""
    if not getattr(model, "supports_input_gradients", False):
        raise GradientUnavailable("model exposes no input gradients; use proposal='sampled'")
    V = model.cfg.vocab_size
    x = model.with_bos(snippets)
    onehot = torch.nn.functional.one_hot(x, V).float()
    onehot.requires_grad_(True)
    emb = onehot @ model.wte.weight
    obj = _objective_from_logits(model.forward_embeddings(emb), objective)
    (grad,) = torch.autograd.grad(obj.sum(), onehot)
    return grad[:, 1:, :]


def cia_optimize(model: ToyLM, init: AttackSnippet, cfg: CIAConfig) -> tuple[AttackSnippet, list[float]]:
    snippets, traces = cia_optimize_batch(model, [init], cfg)
    return snippets[0], traces[0]


def cia_optimize_batch(model: ToyLM, inits: Sequence[AttackSnippet], cfg: CIAConfig, offset: int = 0,
                       ) -> tuple[list[AttackSnippet], list[list[float]]]:
    """Optimize several snippets in lock-step; snippet ``i`` draws from ``(seed, offset + i)``.

    Each round proposes single-token substitutions, scores them exactly, and
    keeps the best one only if it strictly improves the objective.
    """
    if not inits:
        return [], []
    L = len(inits[0].tokens)
    if any(len(s.tokens) != L for s in inits):
        raise ValueError("snippets optimized together must share a length")
    if L < 1:
        raise ValueError("snippet must be non-empty")
    if cfg.proposal == "gradient_guided" and not getattr(model, "supports_input_gradients", False):
        raise GradientUnavailable("model exposes no input gradients; use proposal='sampled'")
    model.eval()
    vocab = model.vocab
    allowed = np.array([i for i in range(vocab.size) if i not in vocab.reserved_ids], dtype=np.int64)
    if cfg.top_k > len(allowed):
        raise ValueError("top_k exceeds the number of substitutable tokens")
    rngs = [np.random.default_rng([cfg.seed, offset + i]) for i in range(len(inits))]
    cur = np.asarray([s.tokens for s in inits], dtype=np.int64)
    best = _score(model, cur, cfg.objective)
    traces = [[float(v)] for v in best]
    N, C = len(inits), cfg.candidates_per_step
    reserved = torch.tensor(sorted(vocab.reserved_ids))
    for _ in range(cfg.steps):
        if cfg.proposal == "gradient_guided":
            grad = _token_gradients(model, cur, cfg.objective)
            grad[:, :, reserved] = -float("inf")
            top = torch.topk(grad, cfg.top_k, dim=-1).indices.numpy()  # N x L x k
        cands = np.repeat(cur[:, None, :], C, axis=1)  # N x C x L
        for i in range(N):
            pos = rngs[i].integers(0, L, size=C)
            if cfg.proposal == "gradient_guided":
                tok = top[i, pos, rngs[i].integers(0, cfg.top_k, size=C)]
            else:
                tok = allowed[rngs[i].integers(0, len(allowed), size=C)]
            cands[i, np.arange(C), pos] = tok
        scores = _score(model, cands.reshape(N * C, L), cfg.objective).reshape(N, C)
        j = scores.argmax(axis=1)
        for i in range(N):
            if scores[i, j[i]] > best[i]:
                best[i] = scores[i, j[i]]
                cur[i] = cands[i, j[i]]
            traces[i].append(float(best[i]))
    out = []
    for i, s in enumerate(inits):
        prov = dict(s.provenance)
        prov.update({"attack": "cia", "init": s.provenance.get("attack", "?"), "cia_seed": cfg.seed,
                     "objective": cfg.objective, "proposal": cfg.proposal, "steps": cfg.steps,
                     "initial_objective": traces[i][0], "final_objective": traces[i][-1],
                     "accepted_steps": sum(1 for a, b in zip(traces[i], traces[i][1:]) if b > a)})
        out.append(replace(s, tokens=tuple(int(t) for t in cur[i]), name="cia", provenance=prov))
    return out, traces
