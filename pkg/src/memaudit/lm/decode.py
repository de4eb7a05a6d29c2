"""Greedy / temperature decoding with a KV cache."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .model import ToyLM


@dataclass(frozen=True)
class DecodeConfig:
    temperature: float = 0.0
    max_new_tokens: int = 512
    min_new_tokens: int = 100
    stop_at_eos: bool = True

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")
        if not 0 <= self.min_new_tokens <= self.max_new_tokens:
            raise ValueError("need 0 <= min_new_tokens <= max_new_tokens")


def generate(model: ToyLM, prompt, cfg: DecodeConfig, seed: int = 0) -> list[int]:
    return generate_batch(model, [prompt], cfg, seed)[0]


@torch.no_grad()
def generate_batch(model: ToyLM, prompts, cfg: DecodeConfig, seed: int = 0) -> list[list[int]]:
    """Decode every prompt; prompts of equal length are batched together.

    At temperature 0 each token is the argmax (lowest id on ties).  End of
    sequence is masked out until ``min_new_tokens`` have been emitted; the
    sentinel id is never emitted.  Sampling uses one generator per prompt,
    seeded with ``seed + prompt_index``.
    """
    prompts = [[int(t) for t in p] for p in prompts]
    out: list = [None] * len(prompts)
    groups: dict[int, list[int]] = {}
    for i, p in enumerate(prompts):
        groups.setdefault(len(p), []).append(i)
    for _, ids in sorted(groups.items()):
        res = _generate_group(model, [prompts[i] for i in ids], cfg, [seed + i for i in ids])
        for i, r in zip(ids, res):
            out[i] = r
    return out


def _generate_group(model: ToyLM, prompts: list[list[int]], cfg: DecodeConfig, seeds: list[int]) -> list[list[int]]:
    model.eval()
    B = len(prompts)
    W = model.context_length
    V = model.cfg.vocab_size
    eos, sentinel = model.vocab.eos_id, model.vocab.sentinel_id
    gens = [torch.Generator().manual_seed(s) for s in seeds] if cfg.temperature > 0 else None
    seqs = [list(p) for p in prompts]
    new = [[] for _ in range(B)]
    done = [False] * B
    cache = None
    filled = 0  # positions held in the cache (BOS included)
    logits = None
    for step in range(cfg.max_new_tokens):
        n_ctx = len(seqs[0])
        if n_ctx <= W and cache is not None:
            x = torch.tensor([[s[-1]] for s in seqs], dtype=torch.long)
            logits = model(x, cache=cache, start_pos=filled)[:, -1]
            filled += 1
        elif n_ctx <= W:
            cache = model.new_cache()
            x = model.with_bos(seqs)
            logits = model(x, cache=cache)[:, -1]
            filled = x.shape[1]
        else:
            # sliding window: keep the most recent W tokens, recompute
            cache = None
            logits = model(model.with_bos([s[-W:] for s in seqs]))[:, -1]
        logits = logits.double().clone()
        logits[:, sentinel] = float("-inf")
        if step < cfg.min_new_tokens:
            logits[:, eos] = float("-inf")
        if cfg.temperature == 0:
            nxt = torch.argmax(logits, dim=-1).tolist()
        else:
            probs = torch.softmax(logits / cfg.temperature, dim=-1)
            nxt = [int(torch.multinomial(probs[b], 1, generator=gens[b])) for b in range(B)]
        for b in range(B):
            seqs[b].append(int(nxt[b]))
            if done[b]:
                continue
            if cfg.stop_at_eos and nxt[b] == eos:
                done[b] = True
            else:
                new[b].append(int(nxt[b]))
        if all(done):
            break
    assert all(0 <= t < V for g in new for t in g)
    return new
