"""Simulated compute and loading lanes of a few verification cycles."""
from treespec import (CostModel, EngineConfig, NGramModel, check_timeline, generate,
                      perturbed_copy, simulate_run, target_only_generate)

cost = CostModel()
print("resident share", cost.target_load_resident_fraction,
      "| streamed load per pass", cost.streamed_load_time,
      "| plain target token", cost.target_token_time)

target = NGramModel.random(32, order=2, seed=0)
draft = perturbed_copy(target, 0.1, seed=0)
res = generate([4, 7], draft, target, EngineConfig(max_output_tokens=24))

# lane listing of the first events
for e in sorted(res.timeline.events, key=lambda e: (e.start, e.lane))[:12]:
    print(f"{e.lane:>18}  {e.start:7.1f} .. {e.end:7.1f}  {e.payload}")
n_spec = res.timeline.count("speculative_draft")
print(f"{n_spec} speculative steps ran while the resident share loaded; "
      f"{res.metrics.speculative_used} of them were reused")

# coarse text gantt, one column per 20 time units
span = res.timeline.total_time
cols = int(span // 20) + 1
for lane in ("draft_compute", "speculative_draft", "target_load", "target_compute"):
    row = [" "] * cols
    for e in res.timeline.lane(lane):
        for k in range(int(e.start // 20), int(e.end // 20) + 1):
            row[min(k, cols - 1)] = "#"
    print(f"{lane:>18} |{''.join(row)}|")

print("invariant problems:", check_timeline(res.timeline, cost))
off = simulate_run(res.trace, cost, speculative=False)
print(f"total time {res.timeline.total_time:.0f} with speculation, {off.total_time:.0f} without")
std = target_only_generate([4, 7], target, EngineConfig(max_output_tokens=24))
print(f"per-token time: engine {res.metrics.simulated_per_token_time:.1f}, "
      f"target only {std.metrics.simulated_per_token_time:.1f}")
