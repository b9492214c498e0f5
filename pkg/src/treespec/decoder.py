"""Tree decoder: draft across branches by swapping mask rows only."""

from __future__ import annotations

from .fallback import FallbackController
from .lm import CallLedger, LanguageModel, next_distribution
from .pacer import PacerState, select_branch
from .tree import TokenTree, extend_branch, tree_cumulative_confidence


def open_branches(tree: TokenTree, eos_id: int) -> list[int]:
    return [i for i in range(len(tree.branches)) if tree.leaf_token(i) != eos_id]


def draft_step(tree: TokenTree, draft_model: LanguageModel, branch_threshold: float = 0.3,
               ledger: CallLedger | None = None, trace: list | None = None) -> list[int]:
    """Draft one token on the branch chosen by the pacer.

    The draft model sees every tree token but only the selected leaf's mask
    row, so the newest token is simply appended and no branch context is
    rebuilt.  Costs exactly one draft-model call.
    """
    candidates = open_branches(tree, draft_model.eos_id)
    if not candidates:
        raise ValueError("every branch has ended with EOS")
    chosen = select_branch(PacerState.from_tree(tree), candidates)
    dist = next_distribution(draft_model, tree.leaf_context(chosen), ledger, role="draft")
    n_before = tree.n_drafted
    dropped_before = tree.dropped_forks
    affected = extend_branch(tree, chosen, dist, branch_threshold)
    if trace is not None:
        trace.append({
            "event": "draft",
            "branch": chosen,
            "token": tree.nodes[n_before].token,
            "confidence": tree.nodes[n_before].confidence,
            "forks": [{"branch": b, "token": tree.nodes[tree.branches[b].leaf].token}
                      for b in affected[1:]],
            "dropped_forks": tree.dropped_forks - dropped_before,
        })
    return affected


def generate_until_fallback(tree: TokenTree, draft_model: LanguageModel,
                            fallback: FallbackController, config,
                            ledger: CallLedger | None = None, trace: list | None = None,
                            budget: int | None = None) -> TokenTree:
    """Draft until the fallback rule fires and return the grown tree.

    The reason is left in ``tree.stop_reason``: ``"threshold"`` (T_c < alpha),
    ``"eos"`` (the most confident branch ended with EOS), ``"cap"`` (``max_draft_tokens`` drafted),
    ``"budget"`` (the most confident branch already covers the remaining
    output budget) and ``"closed"`` (every branch ended with EOS).
    """
    eos = draft_model.eos_id
    tree.stop_reason = _drafting_loop(tree, draft_model, fallback, config, ledger, trace,
                                      budget, eos)
    return tree


def _drafting_loop(tree, draft_model, fallback, config, ledger, trace, budget, eos) -> str:
    while True:
        if tree.n_drafted > 0:
            tc = tree_cumulative_confidence(tree)
            best = tree.best_branch()
            if fallback.should_fallback(tc, tree.leaf_token(best) == eos):
                return "eos" if tc >= fallback.alpha else "threshold"
            if budget is not None and tree.branches[best].length >= budget:
                return "budget"
        if tree.n_drafted >= config.max_draft_tokens:
            return "cap"
        if not open_branches(tree, eos):
            return "closed"
        draft_step(tree, draft_model, config.branch_threshold, ledger, trace)
