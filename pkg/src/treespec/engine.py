"""Generate-then-verify loop and the baselines it is compared against."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .config import EngineConfig
from .decoder import generate_until_fallback
from .fallback import FallbackController
from .lm import CallLedger, LanguageModel, MaskedContext, argmax_token, next_distribution
from .pipeline import PipelineSimulator, Timeline, speculative_tokens_usable
from .tree import TokenTree, tree_cumulative_confidence
from .verifier import rollback_and_commit, verify_tree


@dataclass
class EngineMetrics:
    committed_tokens: int = 0
    draft_steps: int = 0
    speculative_steps: int = 0
    speculative_used: int = 0
    verifications: int = 0
    rollbacks: int = 0
    n_all_total: int = 0
    n_correct_total: int = 0
    target_rows: int = 0
    dropped_forks: int = 0
    simulated_total_time: float = 0.0

    @property
    def acceptance_rate(self) -> float:
        if self.n_all_total == 0:
            return 1.0
        return self.n_correct_total / self.n_all_total

    @property
    def simulated_per_token_time(self) -> float:
        if self.committed_tokens == 0:
            return 0.0
        return self.simulated_total_time / self.committed_tokens

    def to_dict(self) -> dict:
        d = asdict(self)
        d["acceptance_rate"] = self.acceptance_rate
        d["simulated_per_token_time"] = self.simulated_per_token_time
        return d


@dataclass
class RunResult:
    tokens: list[int]
    metrics: EngineMetrics
    trace: list[dict]
    timeline: Timeline
    ledger: CallLedger


def greedy_decode(model: LanguageModel, prompt, max_tokens: int) -> list[int]:
    """Plain one-token-at-a-time argmax decoding; stops after EOS."""
    prompt = [int(t) for t in prompt]
    model.check_tokens(prompt)
    out: list[int] = []
    while len(out) < max_tokens:
        tok = argmax_token(model.next_distribution(MaskedContext(tuple(prompt + out))))
        out.append(tok)
        if tok == model.eos_id:
            break
    return out


def _check_models(prompt, draft: LanguageModel, target: LanguageModel) -> list[int]:
    if not draft.same_vocabulary(target):
        raise ValueError("draft and target models must share one vocabulary and EOS id")
    prompt = [int(t) for t in prompt]
    target.check_tokens(prompt)
    return prompt


def _finish(out: list[int], new: list[int], eos_id: int, max_tokens: int) -> list[int]:
    """Tokens of ``new`` that may still be committed after ``out``."""
    take = []
    for tok in new:
        if len(out) + len(take) >= max_tokens:
            break
        take.append(tok)
        if tok == eos_id:
            break
    return take


def _done(out: list[int], eos_id: int, max_tokens: int) -> bool:
    return len(out) >= max_tokens or (bool(out) and out[-1] == eos_id)


def _speculate(tree: TokenTree, branch: int, draft: LanguageModel, n: int,
               ledger: CallLedger) -> tuple[list[int], list[float]]:
    """Greedy continuation of ``branch`` drafted while the target is loading."""
    base = tree.prompt + tree.path_tokens(branch)
    toks: list[int] = []
    confs: list[float] = []
    while len(toks) < n and not (toks and toks[-1] == draft.eos_id):
        d = next_distribution(draft, MaskedContext(tuple(base + toks)), ledger, role="draft")
        t = argmax_token(d)
        toks.append(t)
        confs.append(float(d[t]))
    return toks, confs


def generate(prompt, draft: LanguageModel, target: LanguageModel,
             cfg: EngineConfig | None = None) -> RunResult:
    """Token-tree speculative generation; output equals target greedy decoding."""
    cfg = cfg or EngineConfig()
    prompt = _check_models(prompt, draft, target)
    eos = target.eos_id
    ctrl = FallbackController(cfg.initial_alpha)
    ledger = CallLedger()
    sim = PipelineSimulator(cfg.cost, cfg.pipeline_mode)
    metrics = EngineMetrics()
    trace: list[dict] = []
    out: list[int] = []
    tree = TokenTree(prompt, cfg.max_branches)

    while not _done(out, eos, cfg.max_output_tokens):
        remaining = cfg.max_output_tokens - len(out)
        mark = len(trace)
        generate_until_fallback(tree, draft, ctrl, cfg, ledger, trace, budget=remaining)
        for ev in trace[mark:]:
            sim.draft(branch=ev["branch"])
        metrics.draft_steps += len(trace) - mark

        tc = tree_cumulative_confidence(tree)
        best = tree.best_branch()
        rows = sum(b.length + 1 for b in tree.branches)
        trace.append({"event": "fallback", "reason": tree.stop_reason, "tree_confidence": tc,
                      "alpha": ctrl.alpha, "rows": rows, "tree": tree.to_dict()})
        sim.fallback(rows=rows)

        spec_toks: list[int] = []
        spec_confs: list[float] = []
        best_len = tree.branches[best].length
        if cfg.speculative and tree.leaf_token(best) != eos:
            n = min(sim.speculative_capacity(), cfg.max_draft_tokens,
                    max(remaining - best_len - 1, 0))
            if n > 0:
                spec_toks, spec_confs = _speculate(tree, best, draft, n, ledger)

        report = verify_tree(tree, target, ledger)
        usable = speculative_tokens_usable(report, spec_toks, best)
        for tok in spec_toks:
            trace.append({"event": "speculative", "token": tok, "usable": bool(usable)})
            sim.speculative(usable=bool(usable))
        metrics.speculative_steps += len(spec_toks)

        trace.append({"event": "verify", "rows": report.rows, **report.to_dict()})
        sim.verify(rows=report.rows)
        metrics.verifications += 1
        metrics.target_rows += report.rows
        metrics.dropped_forks += tree.dropped_forks
        if report.n_all > 0:
            ctrl.update_threshold(report.n_all, report.n_correct, tc)
            metrics.n_all_total += report.n_all
            metrics.n_correct_total += report.n_correct
        if report.rollback_needed:
            metrics.rollbacks += 1

        commit = _finish(out, report.verified_sequence, eos, cfg.max_output_tokens)
        out.extend(commit)
        trace.append({"event": "commit", "tokens": commit, "alpha": ctrl.alpha})
        tree = rollback_and_commit(tree, commit)

        # the first speculative token sits where the target's bonus token went
        if (usable and commit == report.verified_sequence
                and usable[0] == commit[-1] and len(usable) > 1
                and not _done(out, eos, cfg.max_output_tokens)):
            tree.append_chain(usable[1:], spec_confs[1:len(usable)])
            metrics.speculative_used += len(usable) - 1

    metrics.committed_tokens = len(out)
    timeline = sim.finish()
    metrics.simulated_total_time = timeline.total_time
    return RunResult(out, metrics, trace, timeline, ledger)


def target_only_generate(prompt, target: LanguageModel, cfg: EngineConfig | None = None
                         ) -> RunResult:
    """Std baseline: every token is one target pass with its full loading cost."""
    cfg = cfg or EngineConfig()
    prompt = [int(t) for t in prompt]
    target.check_tokens(prompt)
    sim = PipelineSimulator(cfg.cost, "gated")
    ledger = CallLedger()
    trace: list[dict] = []
    out: list[int] = []
    while not _done(out, target.eos_id, cfg.max_output_tokens):
        d = next_distribution(target, MaskedContext(tuple(prompt + out)), ledger, role="target")
        tok = argmax_token(d)
        trace.append({"event": "fallback", "reason": "target-only", "rows": 1})
        sim.fallback(rows=1)
        trace.append({"event": "verify", "rows": 1, "token": tok})
        sim.verify(rows=1)
        out.append(tok)
        trace.append({"event": "commit", "tokens": [tok]})
    timeline = sim.finish()
    metrics = EngineMetrics(committed_tokens=len(out), verifications=len(out),
                            target_rows=len(out), simulated_total_time=timeline.total_time)
    return RunResult(out, metrics, trace, timeline, ledger)


def sequence_speculative_generate(prompt, draft: LanguageModel, target: LanguageModel,
                                  cfg: EngineConfig | None = None, draft_length: int = 4
                                  ) -> RunResult:
    """Linear speculative decoding: draft ``draft_length`` tokens, verify, repeat.

    No token tree, no adaptive threshold and no speculative pipeline.
    """
    cfg = cfg or EngineConfig()
    if draft_length < 1:
        raise ValueError("draft_length must be >= 1")
    prompt = _check_models(prompt, draft, target)
    eos = target.eos_id
    sim = PipelineSimulator(cfg.cost, "gated")
    ledger = CallLedger()
    metrics = EngineMetrics()
    trace: list[dict] = []
    out: list[int] = []
    tree = TokenTree(prompt, max_branches=1)
    while not _done(out, eos, cfg.max_output_tokens):
        remaining = cfg.max_output_tokens - len(out)
        k = min(draft_length, remaining)
        while tree.n_drafted < k and tree.leaf_token(0) != eos:
            d = next_distribution(draft, tree.leaf_context(0), ledger, role="draft")
            tok = argmax_token(d)
            tree.append_chain([tok], [float(d[tok])])
            trace.append({"event": "draft", "branch": 0, "token": tok})
            sim.draft(branch=0)
            metrics.draft_steps += 1
        rows = tree.n_drafted + 1
        trace.append({"event": "fallback", "reason": "fixed-length", "rows": rows})
        sim.fallback(rows=rows)
        report = verify_tree(tree, target, ledger)
        trace.append({"event": "verify", "rows": report.rows, **report.to_dict()})
        sim.verify(rows=report.rows)
        metrics.verifications += 1
        metrics.target_rows += report.rows
        metrics.n_all_total += report.n_all
        metrics.n_correct_total += report.n_correct
        metrics.rollbacks += int(report.rollback_needed)
        commit = _finish(out, report.verified_sequence, eos, cfg.max_output_tokens)
        out.extend(commit)
        trace.append({"event": "commit", "tokens": commit})
        tree = rollback_and_commit(tree, commit)
    metrics.committed_tokens = len(out)
    timeline = sim.finish()
    metrics.simulated_total_time = timeline.total_time
    return RunResult(out, metrics, trace, timeline, ledger)


BASELINES = ("none", "target-greedy", "sequence-sp", "naive-parallel")


def run_baseline(prompt, draft: LanguageModel, target: LanguageModel, cfg: EngineConfig,
                 baseline: str = "none", draft_length: int = 4) -> RunResult:
    """Dispatch one prompt to the engine or one of the comparison baselines."""
    if baseline == "none":
        return generate(prompt, draft, target, cfg)
    if baseline == "target-greedy":
        return target_only_generate(prompt, target, cfg)
    if baseline == "sequence-sp":
        return sequence_speculative_generate(prompt, draft, target, cfg, draft_length)
    if baseline == "naive-parallel":
        return generate(prompt, draft, target, replace(cfg, pipeline_mode="naive"))
    raise ValueError(f"unknown baseline {baseline!r}; choose from {', '.join(BASELINES)}")


def aggregate_metrics(metrics: list[EngineMetrics]) -> dict:
    """Sum counters over prompts; rates are ratios of sums (order-independent)."""
    total = EngineMetrics()
    for m in metrics:
        for f in fields(EngineMetrics):
            setattr(total, f.name, getattr(total, f.name) + getattr(m, f.name))
    out = total.to_dict()
    out["prompts"] = len(metrics)
    out["target_passes"] = total.verifications
    return out


def random_prompts(n: int, vocab_size: int, eos_id: int, seed: int = 0,
                   min_len: int = 1, max_len: int = 6) -> list[list[int]]:
    """Seeded prompts that never contain EOS."""
    if n < 1 or min_len < 1 or max_len < min_len:
        raise ValueError("need n >= 1 and 1 <= min_len <= max_len")
    rng = np.random.default_rng(seed)
    ids = np.array([t for t in range(vocab_size) if t != eos_id])
    return [[int(t) for t in rng.choice(ids, size=int(rng.integers(min_len, max_len + 1)))]
            for _ in range(n)]
