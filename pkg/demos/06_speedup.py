"""Per-token time against the baselines, and under tighter memory."""
from treespec import (CostModel, EngineConfig, NGramModel, aggregate_metrics, perturbed_copy,
                      random_prompts, run_baseline, speedup_table)

setups = []
for s in range(3):
    t = NGramModel.random(32, order=2, seed=s)
    setups.append((t, perturbed_copy(t, 0.1, seed=s), random_prompts(15, 32, t.eos_id, seed=s)))


def per_token(baseline, cfg):
    agg = aggregate_metrics([run_baseline(p, d, t, cfg, baseline).metrics
                             for t, d, ps in setups for p in ps])
    return agg["simulated_per_token_time"], agg["acceptance_rate"]


cfg = EngineConfig(max_output_tokens=64)
names = {"Std": "target-greedy", "SP": "sequence-sp", "naive": "naive-parallel", "engine": "none"}
runs = {k: per_token(v, cfg)[0] for k, v in names.items()}
for row in speedup_table(runs):
    print(f"{row['config']:>7}  {row['per_token_time']:7.2f}  x{row['speedup_vs_Std']:.2f}")

print("\nresident share  speedup vs Std")
for f in (0.9, 0.5, 0.2):
    c = EngineConfig(max_output_tokens=64, cost=CostModel().with_resident_fraction(f))
    print(f"{f:14.1f}  {per_token('target-greedy', c)[0] / per_token('none', c)[0]:.2f}")
