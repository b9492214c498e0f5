"""Command-line front end.

Subcommands::

    treespec make-model   random toy target model
    treespec train-ngram  fit an n-gram model on a corpus file
    treespec run          generate over a prompt set, print metrics JSON
    treespec sweep        repeat ``run`` over a parameter grid, write CSV
    treespec rouge        token-level Rouge-L of two token files

Exit codes: 0 success, 2 configuration error, 3 input/output error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import EngineConfig
from .engine import (BASELINES, aggregate_metrics, random_prompts, run_baseline,
                     target_only_generate)
from .lm import LinearSoftmaxModel, NGramModel, load_model, perturbed_copy, save_model
from .metrics import rouge_l, write_csv, write_json
from .pipeline import CostModel

RUN_SCHEMA = "treespec.run/v1"
SWEEP_PARAMS = ("alpha", "noise", "branch_threshold", "max_branches", "max_draft",
                "memory_upper_bound", "resident_fraction")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class ConfigError(Exception):
    pass


# -- corpus / prompt parsing ---------------------------------------------------

def read_id_lines(path, vocab_size: int | None = None) -> list[list[int]]:
    """Newline-delimited whitespace-separated integer ids; blank lines skipped."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            toks = [int(t) for t in line.split()]
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: expected integer token ids") from None
        for t in toks:
            if t < 0 or (vocab_size is not None and t >= vocab_size):
                raise ConfigError(f"{path}:{lineno}: token id {t} out of range")
        out.append(toks)
    return out


def read_corpus(path, fmt: str):
    """Return (sequences, vocab labels or None, vocab_size, eos_id)."""
    if fmt == "ids":
        seqs = read_id_lines(path)
        if not seqs:
            raise ConfigError(f"{path}: empty corpus")
        top = max((t for s in seqs for t in s), default=0)
        return seqs, None, top + 2, top + 1
    if fmt == "bytes":
        lines = [l for l in Path(path).read_bytes().split(b"\n") if l]
        if not lines:
            raise ConfigError(f"{path}: empty corpus")
        return [list(l) for l in lines], None, 257, 256
    # words: whitespace tokens, vocabulary in first-seen order
    vocab: dict[str, int] = {}
    seqs = []
    for line in Path(path).read_text().splitlines():
        words = line.split()
        if words:
            seqs.append([vocab.setdefault(w, len(vocab)) for w in words])
    if not seqs:
        raise ConfigError(f"{path}: empty corpus")
    labels = list(vocab) + ["<eos>"]
    return seqs, labels, len(labels), len(labels) - 1


# -- argument handling -------------------------------------------------------------

def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", required=True, help="target model file")
    p.add_argument("--draft", help="draft model file (default: perturbed target)")
    p.add_argument("--perturb-noise", type=float, default=0.1,
                   help="noise of the perturbed draft when --draft is absent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.01, help="initial fallback threshold")
    p.add_argument("--branch-threshold", type=float, default=0.3)
    p.add_argument("--max-branches", type=int, default=8)
    p.add_argument("--max-draft", type=int, default=64, help="draft tokens per tree")
    p.add_argument("--max-output", type=int, default=64)
    p.add_argument("--cost-config", help="JSON file with CostModel fields")
    p.add_argument("--baseline", choices=BASELINES, default="none")
    p.add_argument("--sp-length", type=int, default=4, help="draft length of sequence-sp")
    p.add_argument("--prompts", help="prompt file (one id sequence per line)")
    p.add_argument("--n-prompts", type=int, default=20,
                   help="number of seeded random prompts when --prompts is absent")
    p.add_argument("--no-speculative", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treespec", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-model", help="write a random toy model")
    p.add_argument("--kind", choices=("ngram", "linear"), default="ngram")
    p.add_argument("--vocab-size", type=int, default=32)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--sharpness", type=float, default=2.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-ngram", help="fit an n-gram model")
    p.add_argument("corpus")
    p.add_argument("--format", choices=("ids", "words", "bytes"), default="ids")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--smoothing", type=float, default=0.01)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="generate over prompts and report metrics")
    _add_run_args(p)
    p.add_argument("--out", help="metrics JSON path (default: stdout)")
    p.add_argument("--trace", help="JSON-lines trace path")

    p = sub.add_parser("sweep", help="run over a parameter grid")
    _add_run_args(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated grid values")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("rouge", help="token-level Rouge-L")
    p.add_argument("candidate")
    p.add_argument("reference")
    return parser


def _config_from_args(args, cost: CostModel) -> EngineConfig:
    return EngineConfig(branch_threshold=args.branch_threshold,
                        max_branches=args.max_branches, max_draft_tokens=args.max_draft,
                        initial_alpha=args.alpha, max_output_tokens=args.max_output,
                        cost=cost, speculative=not args.no_speculative, seed=args.seed)


def _load_setup(args):
    target = load_model(args.target)
    draft = load_model(args.draft) if args.draft else perturbed_copy(
        target, args.perturb_noise, seed=args.seed)
    if not draft.same_vocabulary(target):
        raise ConfigError("draft and target vocabularies differ")
    cost = CostModel.load(args.cost_config) if args.cost_config else CostModel()
    if args.prompts:
        prompts = read_id_lines(args.prompts, target.vocab_size)
        if not prompts:
            raise ConfigError(f"{args.prompts}: no prompts")
    else:
        prompts = random_prompts(args.n_prompts, target.vocab_size, target.eos_id,
                                 seed=args.seed)
    return target, draft, cost, prompts


def run_once(target, draft, prompts, cfg: EngineConfig, baseline: str,
             sp_length: int = 4, trace_lines: list | None = None) -> dict:
    """Metrics document for one configuration over ``prompts``."""
    per_prompt = []
    metrics = []
    std = []
    for i, prompt in enumerate(prompts):
        res = run_baseline(prompt, draft, target, cfg, baseline, sp_length)
        std.append(target_only_generate(prompt, target, cfg).metrics)
        metrics.append(res.metrics)
        per_prompt.append({"id": i, "prompt": prompt, "tokens": res.tokens,
                           "metrics": res.metrics.to_dict(),
                           "ledger": res.ledger.as_dict()})
        if trace_lines is not None:
            for ev in res.trace:
                trace_lines.append({"prompt": i, **ev})
            for ev in res.timeline.events:
                trace_lines.append({"prompt": i, "event": "pipeline", **ev.to_dict()})
    agg = aggregate_metrics(metrics)
    std_agg = aggregate_metrics(std)
    t = agg["simulated_per_token_time"]
    return {
        "schema": RUN_SCHEMA,
        "baseline": baseline,
        "config": {"branch_threshold": cfg.branch_threshold, "max_branches": cfg.max_branches,
                   "max_draft_tokens": cfg.max_draft_tokens, "initial_alpha": cfg.initial_alpha,
                   "max_output_tokens": cfg.max_output_tokens, "speculative": cfg.speculative,
                   "seed": cfg.seed, "cost": cfg.cost.to_dict()},
        "aggregate": agg,
        "std_per_token_time": std_agg["simulated_per_token_time"],
        "speedup_vs_std": std_agg["simulated_per_token_time"] / t if t > 0 else None,
        "prompts": per_prompt,
    }


def _sweep_point(args, param: str, raw: str, target, draft, cost: CostModel):
    try:
        value = int(raw) if param in ("max_branches", "max_draft") else float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {param}") from None
    if param == "noise":
        draft = perturbed_copy(target, value, seed=args.seed)
    elif param == "memory_upper_bound":
        cost = replace(cost, memory_upper_bound=value)
    elif param == "resident_fraction":
        cost = cost.with_resident_fraction(value)
    cfg = _config_from_args(args, cost)
    if param == "alpha":
        cfg = replace(cfg, initial_alpha=value)
    elif param == "branch_threshold":
        cfg = replace(cfg, branch_threshold=value)
    elif param == "max_branches":
        cfg = replace(cfg, max_branches=value)
    elif param == "max_draft":
        cfg = replace(cfg, max_draft_tokens=value)
    return value, draft, cfg


# -- commands ----------------------------------------------------------------------

def cmd_make_model(args) -> int:
    if args.kind == "ngram":
        model = NGramModel.random(args.vocab_size, order=args.order, seed=args.seed,
                                  sharpness=args.sharpness)
    else:
        model = LinearSoftmaxModel.random(args.vocab_size, seed=args.seed)
    save_model(model, args.out)
    return EXIT_OK


def cmd_train_ngram(args) -> int:
    seqs, labels, vocab_size, eos = read_corpus(args.corpus, args.format)
    model = NGramModel.fit(seqs, args.order, vocab_size, eos, smoothing=args.smoothing,
                           vocab=labels)
    save_model(model, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    target, draft, cost, prompts = _load_setup(args)
    cfg = _config_from_args(args, cost)
    trace = [] if args.trace else None
    doc = run_once(target, draft, prompts, cfg, args.baseline, args.sp_length, trace)
    text = write_json(doc, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if trace is not None:
        Path(args.trace).write_text(
            "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in trace))
    return EXIT_OK


def cmd_sweep(args) -> int:
    target, draft, cost, prompts = _load_setup(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("empty sweep grid")
    rows = []
    for raw in values:
        value, d, cfg = _sweep_point(args, args.param, raw, target, draft, cost)
        doc = run_once(target, d, prompts, cfg, args.baseline, args.sp_length)
        agg = doc["aggregate"]
        rows.append({"param": args.param, "value": value,
                     "per_token_time": agg["simulated_per_token_time"],
                     "acceptance_rate": agg["acceptance_rate"],
                     "verifications": agg["verifications"],
                     "speedup_vs_std": doc["speedup_vs_std"]})
    text = write_csv(rows, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rouge(args) -> int:
    cand = read_id_lines(args.candidate)
    ref = read_id_lines(args.reference)
    if len(cand) != len(ref):
        raise ConfigError("candidate and reference files differ in line count")
    scores = [rouge_l(c, r) for c, r in zip(cand, ref)]
    mean = sum(scores) / len(scores) if scores else 0.0
    sys.stdout.write(write_json({"per_line": scores, "mean": mean}))
    return EXIT_OK


COMMANDS = {"make-model": cmd_make_model, "train-ngram": cmd_train_ngram,
            "run": cmd_run, "sweep": cmd_sweep, "rouge": cmd_rouge}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"treespec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"treespec: io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
