"""Command-line entry point.

    memaudit [--config FILE] [--seed N] [--out-dir DIR] [--threads N] COMMAND ...

Commands: world, index, train, attack, sft, profile.  Relative output paths
are resolved against ``--out-dir`` (default: $MEMAUDIT_OUT_DIR or ./runs).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__

log = logging.getLogger("memaudit")

OUT_DIR_ENV = "MEMAUDIT_OUT_DIR"
EXIT_USAGE = 2
EXIT_FAIL = 1


class CLIError(Exception):
    pass


# --- config -----------------------------------------------------------------


def load_config(path) -> dict:
    """JSON or TOML, chosen by file extension."""
    if path is None:
        return {}
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise CLIError(f"cannot read config {p}: {e.strerror}") from None
    if p.suffix.lower() == ".toml":
        try:
            import tomllib as toml
        except ImportError:
            import tomli as toml
        try:
            cfg = toml.loads(raw.decode("utf-8"))
        except toml.TOMLDecodeError as e:
            raise CLIError(f"{p}: {e}") from None
    else:
        try:
            cfg = json.loads(raw)
        except json.JSONDecodeError as e:
            raise CLIError(f"{p}:{e.lineno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise CLIError(f"{p}: top level must be a table/object")
    return cfg


def _section(cfg: dict, name: str, cls, **override):
    """Build dataclass ``cls`` from ``cfg[name]``; unknown keys are an error."""
    sec = dict(cfg.get(name, {}))
    known = {f.name for f in fields(cls)}
    extra = set(sec) - known
    if extra:
        raise CLIError(f"[{name}] has unknown keys: {', '.join(sorted(extra))}")
    sec.update({k: v for k, v in override.items() if v is not None})
    try:
        return cls(**sec)
    except (TypeError, ValueError) as e:
        raise CLIError(f"[{name}]: {e}") from None


# --- run manifest -------------------------------------------------------------


class RunManifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.data = {
            "tool": "memaudit",
            "version": __version__,
            "command": command,
            "config_path": str(args.config) if args.config else None,
            "seed": args.seed,
            "threads": args.threads,
            "inputs": {},
            "outputs": {},
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }

    def input(self, name: str, path) -> None:
        self.data["inputs"][name] = str(path)

    def output(self, name: str, path) -> Path:
        self.data["outputs"][name] = str(path)
        return Path(path)

    def set(self, key: str, value) -> None:
        self.data[key] = value

    def write(self, out_dir: Path) -> Path:
        missing = [p for p in self.data["outputs"].values() if not Path(p).exists()]
        if missing:
            raise CLIError(f"declared outputs missing: {', '.join(missing)}")
        self.data["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        path = out_dir / f"manifest-{self.data['command']}.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _out(args, path) -> Path:
    p = Path(path)
    if not p.is_absolute():
        p = args.out_dir / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CLIError(f"{what} not found: {p}")
    return p


def _vocab(path):
    from .lm.vocab import Vocabulary

    if path is None:
        return Vocabulary.default()
    try:
        return Vocabulary.from_json(json.loads(_require(path, "vocabulary").read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as e:
        raise CLIError(f"bad vocabulary file {path}: {e}") from None


def _write_loss_csv(path, losses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss"])
        for i, v in enumerate(losses):
            w.writerow([i, repr(float(v))])


def _load_model(path):
    from .binio import FormatError
    from .lm.model import load_checkpoint

    try:
        return load_checkpoint(_require(path, "checkpoint"))
    except FormatError as e:
        raise CLIError(f"bad checkpoint {path}: {e}") from None


# --- commands -------------------------------------------------------------------


def cmd_world(args, cfg, man: RunManifest) -> int:
    """Write the synthetic canary corpus and its companion files."""
    from .index import write_corpus_jsonl
    from .synth import CanaryWorldConfig, make_canary_world, make_qa_pairs, public_prose

    wcfg = _section(cfg, "world", CanaryWorldConfig, seed=args.seed)
    world = make_canary_world(wcfg)
    d = _out(args, args.prefix)
    d.mkdir(parents=True, exist_ok=True)
    write_corpus_jsonl(man.output("corpus", d / "corpus.jsonl"), world.documents)
    (man.output("vocab", d / "vocab.json")).write_text(json.dumps(world.vocab.to_json()) + "\n", encoding="utf-8")
    (man.output("canaries", d / "canaries.json")).write_text(
        json.dumps({"canaries": world.canaries, "counts": world.canary_counts}, indent=1) + "\n", encoding="utf-8")
    write_corpus_jsonl(man.output("public", d / "public.jsonl"),
                       public_prose(world.lexicon, 200, seed=wcfg.seed + 1, vocab=world.vocab))
    qa = make_qa_pairs(world.lexicon, args.n_qa, seed=wcfg.seed + 2)
    _write_records(man.output("qa", d / "qa.jsonl"), [{"instruction": q, "input": "", "output": a} for q, a in qa])
    print(f"{len(world.documents)} documents, {sum(len(x.tokens) for x in world.documents)} tokens, "
          f"{sum(world.canary_counts)} canary insertions -> {d}")
    return 0


def _write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def cmd_index(args, cfg, man: RunManifest) -> int:
    from .index import build_index, load_corpus_jsonl, save_index

    vocab = _vocab(args.vocab)
    docs = load_corpus_jsonl(_require(args.corpus, "corpus"), vocab)
    man.input("corpus", args.corpus)
    index = build_index(docs, vocab)
    save_index(index, man.output("index", _out(args, args.output)))
    print(f"{index.n_documents} documents, {index.n_tokens} tokens -> {args.output}")
    return 0


def cmd_train(args, cfg, man: RunManifest) -> int:
    import torch

    from .index import load_corpus_jsonl
    from .lm.model import ModelConfig, ToyLM, save_checkpoint
    from .lm.train import TrainConfig, train_lm

    vocab = _vocab(args.vocab)
    docs = load_corpus_jsonl(_require(args.corpus, "corpus"), vocab)
    man.input("corpus", args.corpus)
    mcfg = _section(cfg, "model", ModelConfig, vocab_size=vocab.size)
    tcfg = _section(cfg, "train", TrainConfig, seed=args.seed, epochs=args.epochs)
    model = ToyLM(mcfg, vocab, seed=args.seed)
    res = train_lm(model, docs, tcfg)
    out = _out(args, args.output)
    save_checkpoint(model, man.output("checkpoint", out), {"train": asdict(tcfg)})
    _write_loss_csv(man.output("loss_curve", out.with_suffix(".loss.csv")), res.step_losses)
    man.set("final_loss", res.epoch_losses[-1] if res.epoch_losses else None)
    print(f"{len(res.step_losses)} steps, final epoch loss "
          f"{res.epoch_losses[-1] if res.epoch_losses else float('nan'):.4f} -> {args.output}")
    del torch
    return 0


def _read_qa(path) -> list[tuple[str, str]]:
    pairs = []
    with open(_require(path, "dataset"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if "instruction" in obj:
                    q = obj["instruction"] + (("\n" + obj["input"]) if obj.get("input") else "")
                    a = obj["output"]
                else:
                    q, a = obj["question"], obj["answer"]
                if not isinstance(q, str) or not isinstance(a, str):
                    raise TypeError
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError):
                raise CLIError(f"{path}:{lineno}: expected instruction/input/output or question/answer strings")
            pairs.append((q, a))
    return pairs


def cmd_sft(args, cfg, man: RunManifest) -> int:
    from .attacks.mismatch import build_mismatched_dataset, encode_text_pairs
    from .lm.model import save_checkpoint
    from .lm.train import TrainConfig, sft

    model = _load_model(args.model)
    man.input("model", args.model)
    man.input("dataset", args.dataset)
    qa = _read_qa(args.dataset)
    sec = dict(cfg.get("sft", {}))
    shift = int(sec.pop("shift", 1))
    min_q = int(sec.pop("min_q_chars", 10))
    min_a = int(sec.pop("min_a_chars", 50))
    tcfg = _section({"sft": sec}, "sft", TrainConfig, seed=args.seed, max_steps=args.max_steps)
    out = _out(args, args.output)
    if args.mode == "mismatched":
        ds = build_mismatched_dataset(qa, shift=shift, min_q_chars=min_q, min_a_chars=min_a)
        ds.write_jsonl(man.output("dataset_echo", out.with_suffix(".dataset.jsonl")))
        pairs = [(p.question, p.answer) for p in ds.pairs]
        man.set("dataset_sizes", {"input": ds.n_input, "deduplicated": ds.n_deduplicated, "kept": len(ds)})
    else:
        pairs = qa
        if not pairs:
            raise CLIError("dataset is empty")
        _write_records(man.output("dataset_echo", out.with_suffix(".dataset.jsonl")),
                       [{"instruction": q, "input": "", "output": a} for q, a in pairs])
    try:
        enc = encode_text_pairs(model, pairs)
    except ValueError as e:
        raise CLIError(f"cannot tokenize dataset: {e}") from None
    res = sft(model, enc, tcfg)
    save_checkpoint(model, man.output("checkpoint", out), {"sft": asdict(tcfg), "mode": args.mode})
    _write_loss_csv(man.output("loss_curve", out.with_suffix(".loss.csv")), res.step_losses)
    print(f"{args.mode} SFT on {len(pairs)} pairs, {len(res.step_losses)} steps -> {args.output}")
    return 0


def cmd_attack(args, cfg, man: RunManifest) -> int:
    from .attacks.registry import ATTACKS
    from .binio import FormatError
    from .evaluator import ExperimentConfig, run_attack_suite
    from .index import load_corpus_jsonl, load_index

    if args.attack not in ATTACKS:
        raise CLIError(f"unknown attack {args.attack!r}; available: {', '.join(ATTACKS)}")
    model = _load_model(args.model)
    try:
        index = load_index(_require(args.index, "index"))
    except FormatError as e:
        raise CLIError(f"bad index {args.index}: {e}") from None
    man.input("model", args.model)
    man.input("index", args.index)
    exp = dict(cfg.get("experiment", {}))
    params = dict(exp.pop("attack_params", {}))
    params.update(cfg.get("attacks", {}).get(args.attack, {}))
    exp.update({"attack": args.attack, "attack_params": params, "seed": args.seed})
    if args.n_prompts is not None:
        exp["n_prompts"] = args.n_prompts
    if args.canaries:
        man.input("canaries", args.canaries)
        canaries = json.loads(_require(args.canaries, "canary manifest").read_text(encoding="utf-8"))["canaries"]
        exp["canaries"] = [model.vocab.encode(c) for c in canaries]
    try:
        ecfg = ExperimentConfig.from_dict(exp)
    except (TypeError, ValueError) as e:
        raise CLIError(f"[experiment]: {e}") from None
    public = None
    if args.public:
        man.input("public", args.public)
        public = load_corpus_jsonl(_require(args.public, "public corpus"), model.vocab)
    try:
        report = run_attack_suite(model, index, ecfg, public)
    except ValueError as e:
        raise CLIError(str(e)) from None
    out = _out(args, args.output)
    js, side = report.write(out, model.vocab)
    man.output("report", js)
    man.output("generations", side)
    pdir = man.output("profiles", out.with_name(out.stem + "_profiles"))
    pdir.mkdir(exist_ok=True)
    from .lm.entropy import EntropyProfile

    for r in report.records:
        ent = tuple(float(x) for x in r.profile)
        EntropyProfile(ent, tuple(range(len(ent)))).to_csv(pdir / f"sample_{r.sample_id:04d}.csv")
    s = report.summary()
    print(" ".join(f"{k}={s[k]:.2f}" for k in ("vm_rate", "m5_rate", "m10_rate") if k in s)
          + f" canary_hits={report.canary_hits} -> {args.output}")
    return 0


def cmd_profile(args, cfg, man: RunManifest) -> int:
    from .lm.decode import DecodeConfig, generate_batch
    from .lm.entropy import entropy_profile

    model = _load_model(args.model)
    man.input("model", args.model)
    try:
        lines = Path(args.prompts).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CLIError(f"cannot read prompt file {args.prompts}: {e.strerror}") from None
    man.input("prompts", args.prompts)
    prompts = [ln for ln in lines if ln]
    if not prompts:
        raise CLIError("prompt file has no prompts")
    try:
        toks = [model.vocab.encode(p) for p in prompts]
    except ValueError as e:
        raise CLIError(str(e)) from None
    if args.generate:
        dcfg = DecodeConfig(max_new_tokens=args.generate, min_new_tokens=min(args.generate, args.min_new_tokens))
        gens = generate_batch(model, toks, dcfg, seed=args.seed)
        toks = [t + g for t, g in zip(toks, gens)]
    out = _out(args, args.output)
    for i, t in enumerate(toks):
        path = out if len(toks) == 1 else out.with_name(f"{out.stem}_{i:04d}{out.suffix}")
        entropy_profile(model, t).to_csv(man.output(f"profile_{i}", path))
    print(f"{len(toks)} profile(s) -> {args.output}")
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memaudit", description="Training-data extraction audits for small LMs.")
    ap.add_argument("--config", type=Path, help="JSON or TOML experiment config")
    ap.add_argument("--seed", type=int, default=None, help="root seed (default: config 'seed' or 0)")
    ap.add_argument("--out-dir", type=Path, default=None,
                    help=f"directory for relative outputs (default: ${OUT_DIR_ENV} or ./runs)")
    ap.add_argument("--threads", type=int, default=None, help="torch intra-op threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("world", help="write the synthetic canary corpus")
    p.add_argument("--prefix", default="world", help="output directory (relative to --out-dir)")
    p.add_argument("--n-qa", type=int, default=600)
    p.set_defaults(func=cmd_world)

    p = sub.add_parser("index", help="build a suffix index over a JSONL corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", default="index.bin")
    p.add_argument("--vocab", help="vocabulary JSON (default: printable ASCII)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="pretrain the toy LM")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", default="model.ckpt")
    p.add_argument("--vocab")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run one attack and score it")
    p.add_argument("model")
    p.add_argument("index")
    p.add_argument("attack", help="ra, ea, rwa, rsa or cia")
    p.add_argument("-o", "--output", default=None, help="report path (default: report-<attack>.json)")
    p.add_argument("--n-prompts", type=int, default=None)
    p.add_argument("--canaries", help="canary manifest JSON")
    p.add_argument("--public", help="public corpus JSONL (needed by rwa)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sft", help="supervised fine-tuning on question/answer data")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--mode", required=True, help="mismatched or benign")
    p.add_argument("-o", "--output", default="sft.ckpt")
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(func=cmd_sft)

    p = sub.add_parser("profile", help="per-position entropy profiles for prompts")
    p.add_argument("model")
    p.add_argument("prompts", help="text file, one prompt per line")
    p.add_argument("-o", "--output", default="profile.csv")
    p.add_argument("--generate", type=int, default=0, help="append this many greedy tokens first")
    p.add_argument("--min-new-tokens", type=int, default=0)
    p.set_defaults(func=cmd_profile)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        args.out_dir = args.out_dir or Path(os.environ.get(OUT_DIR_ENV) or "runs")
        args.out_dir.mkdir(parents=True, exist_ok=True)
        if args.threads is not None:
            if args.threads < 1:
                raise CLIError("--threads must be >= 1")
            import torch

            torch.set_num_threads(args.threads)
        if args.command == "sft" and args.mode not in ("mismatched", "benign"):
            raise CLIError(f"--mode must be 'mismatched' or 'benign', not {args.mode!r}")
        if args.command == "attack" and args.output is None:
            args.output = f"report-{args.attack}.json"
        man = RunManifest(args.command, args)
        rc = args.func(args, cfg, man)
        man.write(args.out_dir)
        return rc
    except CLIError as e:
        print(f"memaudit: error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as e:  # noqa: BLE001 - surface domain errors without a traceback
        from .index import CorpusFormatError
        from .lm.train import TrainingDiverged

        if isinstance(e, (CorpusFormatError, TrainingDiverged, ValueError)):
            print(f"memaudit: error: {e}", file=sys.stderr)
            return EXIT_FAIL
        raise


if __name__ == "__main__":
    sys.exit(main())
