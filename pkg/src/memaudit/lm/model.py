"""Small decoder-only transformer used as the audited model.

Every forward pass is prefixed with a begin-of-sequence token (the eos id), so
an empty context is a valid query.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
from torch.nn import functional as F

from ..binio import read_container, write_container
from .vocab import Vocabulary

CKPT_MAGIC = "MEMAUDIT-CKPT"
CKPT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layer: int = 2
    n_embd: int = 128
    n_head: int = 4
    context_length: int = 256

    def __post_init__(self):
        if self.n_embd % self.n_head:
            raise ValueError("n_embd must be divisible by n_head")


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_head = cfg.n_head
        self.c_attn = nn.Linear(cfg.n_embd, 3 * cfg.n_embd)
        self.c_proj = nn.Linear(cfg.n_embd, cfg.n_embd)

    def forward(self, x, cache=None):
        B, T, C = x.shape
        q, k, v = self.c_attn(x).split(C, dim=2)
        q = q.view(B, T, self.n_head, C // self.n_head).transpose(1, 2)
        k = k.view(B, T, self.n_head, C // self.n_head).transpose(1, 2)
        v = v.view(B, T, self.n_head, C // self.n_head).transpose(1, 2)
        if cache is not None:
            if "k" in cache:
                k = torch.cat([cache["k"], k], dim=2)
                v = torch.cat([cache["v"], v], dim=2)
            cache["k"], cache["v"] = k, v
        if k.shape[2] == T:
            y = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        else:
            # incremental decoding: new queries see every cached key
            y = F.scaled_dot_product_attention(q, k, v, is_causal=False) if T == 1 else \
                F.scaled_dot_product_attention(q, k, v, attn_mask=_offset_mask(T, k.shape[2], x.device))
        y = y.transpose(1, 2).contiguous().view(B, T, C)
        return self.c_proj(y)


def _offset_mask(t_new: int, t_all: int, device) -> torch.Tensor:
    i = torch.arange(t_new, device=device)[:, None] + (t_all - t_new)
    j = torch.arange(t_all, device=device)[None, :]
    return j <= i


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln_1 = nn.LayerNorm(cfg.n_embd)
        self.attn = CausalSelfAttention(cfg)
        self.ln_2 = nn.LayerNorm(cfg.n_embd)
        self.c_fc = nn.Linear(cfg.n_embd, 4 * cfg.n_embd)
        self.c_out = nn.Linear(4 * cfg.n_embd, cfg.n_embd)

    def forward(self, x, cache=None):
        x = x + self.attn(self.ln_1(x), cache)
        return x + self.c_out(F.gelu(self.c_fc(self.ln_2(x))))


class ToyLM(nn.Module):
    """GPT-style LM over a character vocabulary.

    Positions run ``0..context_length``: slot 0 holds the begin-of-sequence
    token, the remaining ``context_length`` slots hold the context.
    """

    supports_input_gradients = True

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, seed: int = 0):
        super().__init__()
        if cfg.vocab_size != vocab.size:
            raise ValueError(f"config vocab_size {cfg.vocab_size} != vocabulary size {vocab.size}")
        self.cfg = cfg
        self.vocab = vocab
        self.wte = nn.Embedding(cfg.vocab_size, cfg.n_embd)
        self.wpe = nn.Embedding(cfg.context_length + 1, cfg.n_embd)
        self.blocks = nn.ModuleList([Block(cfg) for _ in range(cfg.n_layer)])
        self.ln_f = nn.LayerNorm(cfg.n_embd)
        self.lm_head = nn.Linear(cfg.n_embd, cfg.vocab_size)
        self.reset_parameters(seed)

    @property
    def bos_id(self) -> int:
        return self.vocab.eos_id

    @property
    def context_length(self) -> int:
        return self.cfg.context_length

    def reset_parameters(self, seed: int) -> None:
        g = torch.Generator().manual_seed(seed)
        std = 0.02
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                nn.init.zeros_(p)
            elif "ln" in name:
                nn.init.ones_(p)
            else:
                s = std / math.sqrt(2 * self.cfg.n_layer) if name.endswith(("c_proj.weight", "c_out.weight")) else std
                with torch.no_grad():
                    p.copy_(torch.randn(p.shape, generator=g) * s)

    def zero_output_layer(self) -> None:
        """Zero the unembedding so every next-token distribution is uniform."""
        with torch.no_grad():
            self.lm_head.weight.zero_()
            self.lm_head.bias.zero_()

    def forward_embeddings(self, emb: torch.Tensor, cache=None, start_pos: int = 0) -> torch.Tensor:
        T = emb.shape[1]
        if start_pos + T > self.cfg.context_length + 1:
            raise ValueError("sequence longer than the model context")
        pos = torch.arange(start_pos, start_pos + T, device=emb.device)
        x = emb + self.wpe(pos)
        for i, blk in enumerate(self.blocks):
            x = blk(x, None if cache is None else cache[i])
        return self.lm_head(self.ln_f(x))

    def forward(self, idx: torch.Tensor, cache=None, start_pos: int = 0) -> torch.Tensor:
        """Logits for every position of ``idx`` (shape ``B x T``), BOS included by the caller."""
        return self.forward_embeddings(self.wte(idx), cache, start_pos)

    def new_cache(self) -> list[dict]:
        return [{} for _ in self.blocks]

    def with_bos(self, tokens) -> torch.Tensor:
        t = torch.as_tensor(np.asarray(tokens, dtype=np.int64))
        if t.ndim == 1:
            t = t[None, :]
        bos = torch.full((t.shape[0], 1), self.bos_id, dtype=torch.long)
        return torch.cat([bos, t], dim=1)

    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())


def save_checkpoint(model: ToyLM, path, extra: dict | None = None) -> None:
    params = {name: t.detach().cpu().numpy().astype(np.float32) for name, t in model.state_dict().items()}
    meta = {"architecture": asdict(model.cfg), "vocabulary": model.vocab.to_json(), "extra": extra or {}}
    write_container(path, CKPT_MAGIC, CKPT_VERSION, meta, params)


def load_checkpoint(path) -> ToyLM:
    meta, arrays = read_container(path, CKPT_MAGIC, CKPT_VERSION)
    cfg = ModelConfig(**meta["architecture"])
    model = ToyLM(cfg, Vocabulary.from_json(meta["vocabulary"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in arrays.items()})
    model.eval()
    return model
