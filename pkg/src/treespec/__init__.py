"""Token-tree speculative decoding with a simulated memory-bound pipeline."""

from .config import EngineConfig
from .decoder import draft_step, generate_until_fallback
from .engine import (BASELINES, EngineMetrics, RunResult, aggregate_metrics, generate,
                     greedy_decode, random_prompts, run_baseline,
                     sequence_speculative_generate, target_only_generate)
from .fallback import FallbackController, should_fallback, update_threshold
from .lm import (CallLedger, LanguageModel, LinearSoftmaxModel, MaskedContext, NGramModel,
                 argmax_token, batched_distributions, check_distribution, load_model,
                 next_distribution, perturbed_copy, save_model)
from .metrics import rouge_l, speedup_table, timeline_to_plot_data
from .pacer import PacerState, deficit, select_branch
from .pipeline import (CostModel, PipelineSimulator, Timeline, check_timeline, simulate_run,
                       speculative_tokens_usable)
from .tree import (Branch, TokenTree, TreeError, TreeNode, branch_contexts, build_mask_table,
                   extend_branch, mask_row, tree_cumulative_confidence)
from .verifier import (BranchCheck, VerificationReport, longest_verified_path,
                       rollback_and_commit, verify_tree)

__version__ = "0.1.0"
