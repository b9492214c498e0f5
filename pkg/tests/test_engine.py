import json

import numpy as np
import pytest

from helpers import peaked
from oracles import greedy_loop
from treespec.config import EngineConfig
from treespec.engine import (aggregate_metrics, generate, greedy_decode, random_prompts,
                             run_baseline, sequence_speculative_generate, target_only_generate)
from treespec.lm import LinearSoftmaxModel, NGramModel, perturbed_copy


def test_identical_models():
    t = NGramModel.random(24, seed=1)
    res = generate([3, 4], perturbed_copy(t, 0.0), t, EngineConfig(max_output_tokens=40))
    assert res.tokens == greedy_decode(t, [3, 4], 40)
    assert res.metrics.acceptance_rate == 1.0
    assert res.metrics.rollbacks == 0


@pytest.mark.parametrize("noise", [0.1, 0.4, 0.9])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_perturbed_draft_same_output(noise, seed):
    t = NGramModel.random(24, seed=seed)
    d = perturbed_copy(t, noise, seed=seed)
    out = generate([5, 6], d, t, EngineConfig(max_output_tokens=48)).tokens
    assert out == greedy_loop(t, [5, 6], 48)


def test_linear_models():
    t = LinearSoftmaxModel.random(20, seed=4)
    d = perturbed_copy(t, 0.3, seed=4)
    assert generate([1], d, t, EngineConfig(max_output_tokens=30)).tokens == greedy_loop(t, [1], 30)


def test_immediate_eos():
    v = 6
    t = NGramModel(1, v, {(2,): peaked(v, {5: 0.9})}, eos_id=5)
    res = generate([2], t, t, EngineConfig())
    assert res.tokens == [5]
    assert res.metrics.verifications == 1


def test_forced_chain_greedy():
    v = 4
    a, b, eos = 0, 1, 3
    t = NGramModel(1, v, {(a,): peaked(v, {b: 0.9}), (b,): peaked(v, {eos: 0.9})}, eos_id=eos)
    assert greedy_decode(t, [a], 10) == [b, eos]
    assert greedy_decode(t, [a], 10) == greedy_decode(t, [a], 10)


def test_vocab_mismatch():
    with pytest.raises(ValueError):
        generate([1], NGramModel.random(8, seed=0), NGramModel.random(9, seed=0))


def test_determinism():
    t = NGramModel.random(24, seed=5)
    d = perturbed_copy(t, 0.3, seed=5)
    a = generate([1, 2], d, t, EngineConfig(max_output_tokens=40))
    b = generate([1, 2], d, t, EngineConfig(max_output_tokens=40))
    assert a.tokens == b.tokens
    assert a.metrics == b.metrics
    assert json.dumps(a.trace, sort_keys=True) == json.dumps(b.trace, sort_keys=True)


def test_trace_order_and_progress():
    t = NGramModel.random(24, seed=6)
    d = perturbed_copy(t, 0.3, seed=6)
    res = generate([1], d, t, EngineConfig(max_output_tokens=50))
    kinds = [e["event"] for e in res.trace]
    assert kinds.count("fallback") == kinds.count("verify") == kinds.count("commit")
    commits = [e["tokens"] for e in res.trace if e["event"] == "commit"]
    assert all(len(c) >= 1 for c in commits)
    assert sum(commits, []) == res.tokens
    assert res.ledger.passes["target"] == res.metrics.verifications <= res.metrics.committed_tokens
    assert res.metrics.committed_tokens <= 50


def test_baselines_exact():
    t = NGramModel.random(24, seed=7)
    d = perturbed_copy(t, 0.2, seed=7)
    ref = greedy_decode(t, [2, 3], 40)
    cfg = EngineConfig(max_output_tokens=40)
    assert target_only_generate([2, 3], t, cfg).tokens == ref
    for k in (1, 4, 9):
        assert sequence_speculative_generate([2, 3], d, t, cfg, k).tokens == ref
    for name in ("none", "target-greedy", "sequence-sp", "naive-parallel"):
        assert run_baseline([2, 3], d, t, cfg, name).tokens == ref
    with pytest.raises(ValueError):
        run_baseline([2, 3], d, t, cfg, "bld")


def test_speculation_only_helps():
    t = NGramModel.random(32, seed=8)
    d = perturbed_copy(t, 0.1, seed=8)
    on = generate([4], d, t, EngineConfig(max_output_tokens=64))
    off = generate([4], d, t, EngineConfig(max_output_tokens=64, speculative=False))
    assert on.tokens == off.tokens
    assert on.metrics.simulated_total_time <= off.metrics.simulated_total_time


def test_first_tree_grows_as_alpha_falls():
    t = NGramModel.random(32, seed=0)
    d = perturbed_copy(t, 0.1, seed=0)
    for p in random_prompts(20, 32, t.eos_id, seed=1):
        sizes = []
        for alpha in (1.0, 0.1, 0.01, 0.001):
            res = generate(p, d, t, EngineConfig(initial_alpha=alpha, max_output_tokens=48))
            kinds = [e["event"] for e in res.trace]
            sizes.append(kinds.index("fallback"))
        assert sizes == sorted(sizes)


@pytest.mark.xfail(strict=True, reason="alpha adapts after the first verification, so the "
                   "starting value does not order later cycles")
def test_alpha_sweep_verifications_monotone():
    t = NGramModel.random(32, seed=0)
    d = perturbed_copy(t, 0.1, seed=0)
    prompts = random_prompts(20, 32, t.eos_id, seed=1)
    counts = []
    for alpha in (1.0, 0.1, 0.01, 0.001):
        cfg = EngineConfig(initial_alpha=alpha, max_output_tokens=48)
        counts.append(aggregate_metrics([generate(p, d, t, cfg).metrics
                                         for p in prompts])["verifications"])
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_aggregate_is_order_independent():
    t = NGramModel.random(16, seed=9)
    d = perturbed_copy(t, 0.3, seed=9)
    ms = [generate(p, d, t).metrics for p in random_prompts(6, 16, t.eos_id)]
    assert aggregate_metrics(ms) == aggregate_metrics(ms[::-1])


def test_random_prompts():
    ps = random_prompts(50, 10, 9, seed=3)
    assert ps == random_prompts(50, 10, 9, seed=3)
    assert all(1 <= len(p) <= 6 and 9 not in p for p in ps)
    assert np.unique([len(p) for p in ps]).size > 1
