"""How the fallback threshold moves during a run."""
from treespec import EngineConfig, FallbackController, NGramModel, generate, perturbed_copy

# update rule on its own
c = FallbackController(0.01)
print("all correct:", c.update_threshold(4, 4, 0.3))
print("half wrong, T_c=0.04:", FallbackController(0.01).update_threshold(4, 2, 0.04))

# inside the engine: one line per verification
target = NGramModel.random(32, order=2, seed=2)
for noise in (0.1, 0.4):
    draft = perturbed_copy(target, noise, seed=2)
    res = generate([3, 9], draft, target, EngineConfig(max_output_tokens=60))
    print(f"\nnoise {noise}: acceptance {res.metrics.acceptance_rate:.2f}, "
          f"{res.metrics.verifications} verifications for {res.metrics.committed_tokens} tokens")
    fallbacks = [e for e in res.trace if e["event"] == "fallback"]
    commits = [e for e in res.trace if e["event"] == "commit"]
    for f, c in list(zip(fallbacks, commits))[:8]:
        print(f"  {f['reason']:>9}  T_c {f['tree_confidence']:.2e}  alpha {f['alpha']:.2e}"
              f" -> {c['alpha']:.2e}  committed {len(c['tokens'])}")
