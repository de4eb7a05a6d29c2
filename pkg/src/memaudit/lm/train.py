"""Next-token pretraining and prompt-masked supervised fine-tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch.nn import functional as F

from .model import ToyLM

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    max_steps: int | None = None  # overrides epochs when set
    batch_size: int = 32
    seq_len: int = 128
    lr: float = 3e-3
    min_lr_ratio: float = 0.1
    warmup_ratio: float = 0.05
    schedule: str = "cosine"  # or "constant"
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or (self.max_steps is not None and self.max_steps < 0):
            raise ValueError("epochs/max_steps must be non-negative")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass
class TrainResult:
    model: ToyLM
    epoch_losses: list[float] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)


def lm_loss(model: ToyLM, batch: torch.Tensor) -> torch.Tensor:
    """Mean next-token cross-entropy (nats) over ``batch`` of shape ``B x (T+1)``."""
    logits = model(batch[:, :-1])
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), batch[:, 1:].reshape(-1))


def masked_pair_loss(model: ToyLM, seqs: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Sum of target-token NLL per row, averaged over rows.

    ``seqs`` holds ``BOS + prompt + target`` (right padded); ``mask[b, t]`` is
    True where token ``t+1`` is a target token.
    """
    logits = model(seqs[:, :-1])
    nll = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), seqs[:, 1:].reshape(-1), reduction="none")
    nll = nll.view(seqs.shape[0], -1) * mask
    return nll.sum(dim=1).mean()


def _lr_at(cfg: TrainConfig, step: int, total: int) -> float:
    warm = int(round(cfg.warmup_ratio * total))
    if step < warm:
        return cfg.lr * (step + 1) / warm
    if cfg.schedule == "constant" or total <= warm:
        return cfg.lr
    frac = (step - warm) / max(1, total - warm)
    lo = cfg.lr * cfg.min_lr_ratio
    return lo + 0.5 * (cfg.lr - lo) * (1 + math.cos(math.pi * frac))


def _optimizer(model: ToyLM, cfg: TrainConfig) -> torch.optim.Optimizer:
    decay = [p for n, p in model.named_parameters() if p.dim() >= 2]
    no_decay = [p for n, p in model.named_parameters() if p.dim() < 2]
    return torch.optim.AdamW(
        [{"params": decay, "weight_decay": cfg.weight_decay}, {"params": no_decay, "weight_decay": 0.0}],
        lr=cfg.lr, betas=(0.9, 0.95),
    )


def _stream(corpus, bos: int) -> np.ndarray:
    parts = []
    for d in corpus:
        parts.append(np.array([bos], dtype=np.int64))
        parts.append(np.asarray(d.tokens, dtype=np.int64))
    return np.concatenate(parts)


def _step(model, opt, cfg, loss, step, total) -> float:
    val = float(loss.detach())
    if not math.isfinite(val):
        raise TrainingDiverged(f"non-finite loss {val} at step {step}")
    for g in opt.param_groups:
        g["lr"] = _lr_at(cfg, step, total)
    opt.zero_grad(set_to_none=True)
    loss.backward()
    if cfg.grad_clip:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    opt.step()
    return val


def train_lm(model: ToyLM, corpus: Sequence, cfg: TrainConfig) -> TrainResult:
    """Pretrain on documents joined as ``BOS doc BOS doc ...``.

    Each epoch visits every non-overlapping ``seq_len + 1`` chunk of the
    stream once in a seeded random order.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    stream = _stream(corpus, model.bos_id)
    L = cfg.seq_len + 1
    n_chunks = max(1, (len(stream) - 1) // cfg.seq_len)
    steps_per_epoch = math.ceil(n_chunks / cfg.batch_size)
    total = cfg.max_steps if cfg.max_steps is not None else cfg.epochs * steps_per_epoch
    result = TrainResult(model)
    if total == 0:
        return result
    opt = _optimizer(model, cfg)
    model.train()
    step = 0
    while step < total:
        # random phase so chunk boundaries differ between epochs
        phase = int(rng.integers(0, cfg.seq_len))
        starts = np.arange(phase, len(stream) - L + 1, cfg.seq_len)
        if len(starts) == 0:
            starts = np.array([0])
        rng.shuffle(starts)
        losses = []
        for b in range(0, len(starts), cfg.batch_size):
            if step >= total:
                break
            idx = starts[b : b + cfg.batch_size]
            batch = torch.from_numpy(np.stack([_pad(stream[s : s + L], L, model.bos_id) for s in idx]))
            losses.append(_step(model, opt, cfg, lm_loss(model, batch), step, total))
            step += 1
        result.step_losses.extend(losses)
        result.epoch_losses.append(float(np.mean(losses)))
        log.info("epoch %d: mean loss %.4f", len(result.epoch_losses), result.epoch_losses[-1])
    model.eval()
    return result


def _pad(x: np.ndarray, L: int, fill: int) -> np.ndarray:
    if len(x) == L:
        return x
    return np.concatenate([x, np.full(L - len(x), fill, dtype=np.int64)])


def encode_pairs(model: ToyLM, pairs) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-padded ``BOS + prompt + target`` rows and their target masks."""
    rows, masks = [], []
    for prompt, target in pairs:
        prompt, target = [int(t) for t in prompt], [int(t) for t in target]
        if not target:
            raise ValueError("empty SFT target")
        if len(prompt) + len(target) > model.context_length:
            raise ValueError("prompt + target exceeds the model context")
        rows.append([model.bos_id] + prompt + target)
        masks.append([False] * len(prompt) + [True] * len(target))
    T = max(len(r) for r in rows)
    seqs = torch.full((len(rows), T), model.bos_id, dtype=torch.long)
    mask = torch.zeros((len(rows), T - 1), dtype=torch.bool)
    for i, (r, m) in enumerate(zip(rows, masks)):
        seqs[i, : len(r)] = torch.tensor(r)
        mask[i, : len(m)] = torch.tensor(m)
    return seqs, mask


@torch.no_grad()
def pair_losses(model: ToyLM, pairs) -> list[float]:
    """Per-pair summed target NLL in nats."""
    model.eval()
    out = []
    for p in pairs:
        seqs, mask = encode_pairs(model, [p])
        out.append(float(masked_pair_loss(model, seqs, mask)))
    return out


def sft(model: ToyLM, pairs, cfg: TrainConfig) -> TrainResult:
    """Fine-tune on ``(prompt, target)`` token pairs; only target tokens are scored."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no SFT pairs")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    encode_pairs(model, pairs)  # validate lengths up front
    steps_per_epoch = math.ceil(len(pairs) / cfg.batch_size)
    total = cfg.max_steps if cfg.max_steps is not None else cfg.epochs * steps_per_epoch
    result = TrainResult(model)
    if total == 0:
        return result
    opt = _optimizer(model, cfg)
    model.train()
    step = 0
    while step < total:
        order = rng.permutation(len(pairs))
        losses = []
        for b in range(0, len(order), cfg.batch_size):
            if step >= total:
                break
            seqs, mask = encode_pairs(model, [pairs[i] for i in order[b : b + cfg.batch_size]])
            losses.append(_step(model, opt, cfg, masked_pair_loss(model, seqs, mask), step, total))
            step += 1
        result.step_losses.extend(losses)
        result.epoch_losses.append(float(np.mean(losses)))
    model.eval()
    return result
