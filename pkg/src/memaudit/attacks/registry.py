"""Name -> snippet-builder lookup used by the evaluator and the command line."""

from __future__ import annotations

from typing import Sequence

from ..index import Document
from ..lm.model import ToyLM
from .baselines import AttackSnippet, eos_prompt, repetition_prompt, rsa_snippet, rwa_snippet
from .cia import CIAConfig, cia_optimize_batch

ATTACKS = ("ra", "ea", "rwa", "rsa", "cia")

# default instruction words for the repetition baseline; prompt i uses word i mod len
RA_WORDS = ("Debug", "poem", "company", "book", "data", "Hello", "word", "stone", "river", "light")

_CIA_KEYS = ("steps", "top_k", "candidates_per_step", "objective", "proposal")


def build_snippets(name: str, model: ToyLM, n: int, seed: int, params: dict | None = None,
                   public_corpus: Sequence[Document] | None = None,
                   ) -> tuple[list[AttackSnippet], list[list[float]] | None]:
    """``n`` prompts for attack ``name``; prompt ``i`` is seeded with ``seed + i``.

    CIA starts from the RSA snippet with the same seed, so a zero-step CIA run
    reproduces RSA exactly.  Returns optimization traces for CIA, else None.
    """
    params = dict(params or {})
    vocab = model.vocab
    if name not in ATTACKS:
        raise KeyError(f"unknown attack {name!r}; known: {', '.join(ATTACKS)}")
    if name == "ra":
        words = params.get("words", RA_WORDS)
        hint = int(params.get("repeat_hint", 50))
        return [repetition_prompt(vocab, words[i % len(words)], hint) for i in range(n)], None
    if name == "ea":
        return [eos_prompt(vocab, int(params.get("n", 20))) for _ in range(n)], None
    if name == "rwa":
        if not public_corpus:
            raise ValueError("the rwa attack needs a public corpus")
        span = int(params.get("span_len", 5))
        return [rwa_snippet(public_corpus, span, seed + i) for i in range(n)], None
    length = int(params.get("length", 20))
    inits = [rsa_snippet(vocab, length, seed + i) for i in range(n)]
    if name == "rsa":
        return inits, None
    cfg = CIAConfig(seed=seed, **{k: params[k] for k in _CIA_KEYS if k in params})
    out: list[AttackSnippet] = []
    traces: list[list[float]] = []
    chunk = int(params.get("batch", 64))
    for b in range(0, n, chunk):
        # random streams are keyed by global prompt index, so chunking does not matter
        s, t = cia_optimize_batch(model, inits[b : b + chunk], cfg, offset=b)
        out.extend(s)
        traces.extend(t)
    return out, traces
