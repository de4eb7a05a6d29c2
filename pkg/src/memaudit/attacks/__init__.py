from .baselines import AttackSnippet, eos_prompt, repetition_prompt, rsa_snippet, rwa_snippet
from .cia import CIAConfig, GradientUnavailable, cia_objective, cia_optimize, cia_optimize_batch
from .mismatch import (MismatchedDataset, MismatchedPair, build_mismatched_dataset, dedupe_questions,
                       encode_text_pairs, mismatched_sft)
from .registry import ATTACKS, build_snippets

__all__ = [
    "AttackSnippet", "eos_prompt", "repetition_prompt", "rsa_snippet", "rwa_snippet",
    "CIAConfig", "GradientUnavailable", "cia_objective", "cia_optimize", "cia_optimize_batch",
    "MismatchedDataset", "MismatchedPair", "build_mismatched_dataset", "dedupe_questions",
    "encode_text_pairs", "mismatched_sft",
    "ATTACKS", "build_snippets",
]
