"""Small models shared by several test modules."""

from __future__ import annotations

import numpy as np

from memaudit.index import Document
from memaudit.lm.model import ModelConfig, ToyLM
from memaudit.lm.train import TrainConfig, train_lm
from memaudit.lm.vocab import Vocabulary


def peaky_model(n_symbols: int = 16, seed: int = 0, steps: int = 150) -> ToyLM:
    """Tiny LM trained on a corpus with both deterministic and random stretches,
    so snippet entropies range over several bits."""
    v = Vocabulary.synthetic(n_symbols + 2)
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(60):
        toks = []
        while len(toks) < 40:
            a = int(rng.integers(n_symbols))
            if a < n_symbols // 2:
                toks += [a, (a * 3 + 1) % n_symbols, (a * 5 + 2) % n_symbols]
            else:
                toks += [a] + rng.integers(0, n_symbols, size=2).tolist()
        docs.append(Document(i, tuple(toks)))
    m = ToyLM(ModelConfig(v.size, n_layer=1, n_embd=32, n_head=2, context_length=16), v, seed=seed)
    train_lm(m, docs, TrainConfig(max_steps=steps, batch_size=16, seq_len=15, lr=1e-2, seed=seed))
    return m


# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail
