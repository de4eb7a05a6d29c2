import itertools
import json

import numpy as np
import pytest
from scipy import stats

from memaudit.attacks import (ATTACKS, CIAConfig, GradientUnavailable, build_mismatched_dataset, build_snippets,
                              cia_objective, cia_optimize, cia_optimize_batch, dedupe_questions, eos_prompt,
                              mismatched_sft, repetition_prompt, rsa_snippet, rwa_snippet)
from memaudit.attacks.cia import _score
from memaudit.attacks.mismatch import encode_text_pairs
from memaudit.index import Document
from memaudit.lm.entropy import entropy_profile
from memaudit.lm.model import ModelConfig, ToyLM
from memaudit.lm.train import TrainConfig, pair_losses
from memaudit.lm.vocab import Vocabulary
from memaudit.matcher import diversity_score

from helpers import peaky_model
from oracles import exhaustive_objective_max


@pytest.fixture(scope="module")
def peaky():
    return peaky_model()


def uniform_model(size=256, ctx=32):
    v = Vocabulary.synthetic(size)
    m = ToyLM(ModelConfig(size, n_layer=1, n_embd=16, n_head=2, context_length=ctx), v)
    m.zero_output_layer()
    return m


# --- baselines ---------------------------------------------------------------------


def test_repetition_prompt_text():
    v = Vocabulary.default()
    s = repetition_prompt(v, "Debug", 50)
    assert v.decode(s.tokens) == 'Repeat "Debug" 50 times.'
    assert s == repetition_prompt(v, "Debug", 50)
    with pytest.raises(ValueError):
        repetition_prompt(v, "", 50)


def test_eos_prompt():
    v = Vocabulary.default()
    assert eos_prompt(v, 1).tokens == (v.eos_id,)
    s = eos_prompt(v, 20)
    assert s.tokens == (v.eos_id,) * 20
    assert diversity_score(s.tokens) == 1 / 20
    with pytest.raises(ValueError):
        eos_prompt(v, 0)


def test_rwa_forced_and_seeded():
    doc = Document(0, (5, 6, 7, 8, 9))
    assert rwa_snippet([doc], 5, seed=3).tokens == doc.tokens
    corpus = [Document(i, tuple(range(i, i + 20))) for i in range(5)]
    assert rwa_snippet(corpus, 5, 11) == rwa_snippet(corpus, 5, 11)
    with pytest.raises(ValueError):
        rwa_snippet([Document(0, (1, 2))], 5, 0)


def test_rwa_start_distribution_uniform():
    doc = Document(0, tuple(range(12)))  # 8 possible starts for span 5
    starts = [rwa_snippet([doc], 5, seed=s).tokens[0] for s in range(10_000)]
    counts = np.bincount(starts, minlength=8)
    assert stats.chisquare(counts).pvalue > 0.01


def test_rsa_legal_and_seeded():
    v = Vocabulary.default()
    s = rsa_snippet(v, 20, seed=4)
    assert len(s.tokens) == 20 and all(0 <= t < v.size and t not in v.reserved_ids for t in s.tokens)
    assert s == rsa_snippet(v, 20, seed=4)
    s.check(v)


def test_rsa_marginals_uniform():
    v = Vocabulary.synthetic(12)  # 10 ordinary ids
    draws = np.array([rsa_snippet(v, 3, seed=s).tokens for s in range(10_000)])
    for pos in range(3):
        assert stats.chisquare(np.bincount(draws[:, pos], minlength=10)).pvalue > 0.01


# --- objective ------------------------------------------------------------------------


def test_uniform_model_objectives_are_8_bits():
    m = uniform_model()
    for obj in ("average_snippet_entropy", "last_token_entropy"):
        assert abs(cia_objective(m, [1, 2, 3], obj) - 8.0) < 1e-9


def test_single_token_objective_is_empty_context_entropy(peaky):
    assert abs(cia_objective(peaky, [3]) - entropy_profile(peaky, [3]).entropies[0]) < 1e-9


def test_objective_matches_profile_mean(peaky):
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = rng.integers(0, 16, size=int(rng.integers(1, 16))).tolist()
        assert abs(cia_objective(peaky, s) - entropy_profile(peaky, s).mean()) < 1e-9
        assert cia_objective(peaky, s) <= np.log2(peaky.cfg.vocab_size)


def test_objective_errors(peaky):
    with pytest.raises(ValueError):
        cia_objective(peaky, [])
    with pytest.raises(ValueError):
        cia_objective(peaky, [1], "median")


# --- optimizer ---------------------------------------------------------------------------


def test_zero_steps_returns_init(peaky):
    init = rsa_snippet(peaky.vocab, 5, seed=1)
    out, trace = cia_optimize(peaky, init, CIAConfig(steps=0, top_k=8))
    assert out.tokens == init.tokens and trace == [pytest.approx(cia_objective(peaky, init))]


def test_uniform_model_never_moves():
    m = uniform_model(size=40)
    init = rsa_snippet(m.vocab, 6, seed=0)
    out, trace = cia_optimize(m, init, CIAConfig(steps=5, top_k=8, candidates_per_step=16, proposal="sampled"))
    assert out.tokens == init.tokens and len(set(trace)) == 1


@pytest.mark.parametrize("proposal", ["gradient_guided", "sampled"])
@pytest.mark.parametrize("objective", ["average_snippet_entropy", "last_token_entropy"])
def test_trace_monotone_and_deterministic(peaky, proposal, objective):
    cfg = CIAConfig(steps=15, top_k=8, candidates_per_step=16, objective=objective, proposal=proposal, seed=3)
    inits = [rsa_snippet(peaky.vocab, 6, seed=i) for i in range(5)]
    a, ta = cia_optimize_batch(peaky, inits, cfg)
    b, tb = cia_optimize_batch(peaky, inits, cfg)
    assert [s.tokens for s in a] == [s.tokens for s in b] and ta == tb
    for s, t in zip(a, ta):
        assert all(y >= x for x, y in zip(t, t[1:]))
        assert len(t) == cfg.steps + 1
        assert abs(t[-1] - cia_objective(peaky, s, objective)) < 1e-9
        s.check(peaky.vocab)


def test_chunking_does_not_change_results(peaky):
    cfg = CIAConfig(steps=5, top_k=8, candidates_per_step=8, seed=1)
    inits = [rsa_snippet(peaky.vocab, 4, seed=i) for i in range(6)]
    whole, _ = cia_optimize_batch(peaky, inits, cfg)
    parts = cia_optimize_batch(peaky, inits[:2], cfg)[0] + cia_optimize_batch(peaky, inits[2:], cfg, offset=2)[0]
    assert [s.tokens for s in whole] == [s.tokens for s in parts]


def test_gradient_hint_required(peaky, monkeypatch):
    monkeypatch.setattr(type(peaky), "supports_input_gradients", False)
    init = rsa_snippet(peaky.vocab, 3, seed=0)
    with pytest.raises(GradientUnavailable):
        cia_optimize(peaky, init, CIAConfig(steps=1, top_k=4, candidates_per_step=4))
    out, _ = cia_optimize(peaky, init, CIAConfig(steps=2, top_k=4, candidates_per_step=4, proposal="sampled"))
    assert len(out.tokens) == 3


def test_config_validation():
    for bad in (dict(steps=-1), dict(top_k=0), dict(candidates_per_step=0), dict(objective="x"), dict(proposal="y")):
        with pytest.raises(ValueError):
            CIAConfig(**bad)


def test_sampled_search_finds_exhaustive_optimum(peaky):
    ids = list(range(16))
    best = exhaustive_objective_max(lambda x: _score(peaky, x, "average_snippet_entropy"), ids, 3)
    inits = [rsa_snippet(peaky.vocab, 3, seed=s) for s in range(20)]
    _, traces = cia_optimize_batch(peaky, inits, CIAConfig(steps=40, candidates_per_step=32, top_k=16,
                                                            proposal="sampled", seed=0))
    assert sum(t[-1] >= best - 0.1 for t in traces) >= 18


def test_registry_names_and_cia_zero_steps_is_rsa(peaky):
    assert ATTACKS == ("ra", "ea", "rwa", "rsa", "cia")
    rsa, _ = build_snippets("rsa", peaky, 4, 7, {"length": 5})
    cia, tr = build_snippets("cia", peaky, 4, 7, {"length": 5, "steps": 0, "top_k": 8})
    assert [s.tokens for s in rsa] == [s.tokens for s in cia] and len(tr) == 4
    with pytest.raises(KeyError):
        build_snippets("nope", peaky, 1, 0)
    with pytest.raises(ValueError):
        build_snippets("rwa", peaky, 1, 0)


# --- mismatched data -----------------------------------------------------------------------


def test_rotation_by_one():
    qa = [("question 0?", "a" * 50 + "0"), ("question 1?", "a" * 50 + "1"), ("question 2?", "a" * 50 + "2")]
    ds = build_mismatched_dataset(qa, shift=1)
    assert [(p.question, p.answer) for p in ds.pairs] == [(qa[0][0], qa[1][1]), (qa[1][0], qa[2][1]),
                                                          (qa[2][0], qa[0][1])]
    assert [(p.q_index, p.a_index) for p in ds.pairs] == [(0, 1), (1, 2), (2, 0)]


def test_filters_and_dedup():
    long_a = "x" * 50
    qa = [("123456789", long_a), ("question A", long_a + "A"), ("question A", "dup"), ("question B", "short"),
          ("question C", long_a + "C")]
    assert dedupe_questions(qa) == [qa[0], qa[1], qa[3], qa[4]]
    ds = build_mismatched_dataset(qa, shift=1)
    # dedup -> [9-char q, A, B, C]; rotate -> A gets "short" (dropped), B gets C's, C gets the 9-char q's answer
    assert [(p.question, p.answer) for p in ds.pairs] == [("question B", long_a + "C"), ("question C", long_a)]
    assert ds.n_input == 5 and ds.n_deduplicated == 4


def test_mismatch_errors():
    with pytest.raises(ValueError):
        build_mismatched_dataset([], 1)
    with pytest.raises(ValueError):
        build_mismatched_dataset([("q" * 20, "a" * 60)], 0)
    with pytest.raises(ValueError):
        build_mismatched_dataset([("short", "a" * 60), ("tiny q", "b")], 1)


def test_records_and_jsonl_are_pure(tmp_path):
    qa = [(f"question number {i}?", f"answer number {i} " + "z" * 50) for i in range(10)]
    a = build_mismatched_dataset(qa, shift=3)
    b = build_mismatched_dataset(qa, shift=3)
    a.write_jsonl(tmp_path / "a.jsonl")
    b.write_jsonl(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    rec = json.loads((tmp_path / "a.jsonl").read_text().splitlines()[0])
    assert rec == {"instruction": qa[0][0], "input": "", "output": qa[3][1]}
    assert all(p.q_index != p.a_index for p in a.pairs)


def test_mismatched_sft_moves_mass_to_shifted_answers():
    v = Vocabulary.default()
    m = ToyLM(ModelConfig(v.size, n_layer=1, n_embd=32, n_head=2, context_length=128), v, seed=0)
    qa = [(f"what is item {i}?", f"item {i} is " + "abcdefghij"[i] * 45 + ".") for i in range(6)]
    ds = build_mismatched_dataset(qa, shift=1)
    enc = encode_text_pairs(m, [(p.question, p.answer) for p in ds.pairs])
    before = pair_losses(m, enc)
    res = mismatched_sft(m, ds, TrainConfig(max_steps=60, batch_size=6, lr=5e-3, seed=0))
    after = pair_losses(m, enc)
    assert res.step_losses[-1] < res.step_losses[0]
    assert all(a < b for a, b in zip(after, before))  # log P(a'_i | q_i) rises for every pair
