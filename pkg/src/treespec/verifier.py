"""Batched verification of a token tree against the target model."""

from __future__ import annotations

from dataclasses import dataclass, field

from .lm import CallLedger, LanguageModel, MaskedContext, argmax_token, batched_distributions
from .tree import TokenTree


@dataclass
class BranchCheck:
    """Target verdict for one branch.

    ``target[p]`` is the target argmax given the prompt and the first ``p``
    drafted tokens, so it has one more entry than ``drafted``; the last
    entry is the target's next token after a fully correct branch.
    """

    branch: int
    drafted: list[int]
    target: list[int]
    first_error: int | None
    correct_sequence: list[int]
    cumulative_confidence: float

    @property
    def n_all(self) -> int:
        return len(self.drafted)

    @property
    def n_correct(self) -> int:
        return len(self.drafted) if self.first_error is None else self.first_error

    @property
    def flags(self) -> list[bool]:
        return [d == t for d, t in zip(self.drafted, self.target)]


@dataclass
class VerificationReport:
    branches: list[BranchCheck]
    best: int = -1
    verified_sequence: list[int] = field(default_factory=list)
    rollback_needed: bool = False
    rows: int = 0

    @property
    def n_all(self) -> int:
        return self.branches[self.best].n_all

    @property
    def n_correct(self) -> int:
        return self.branches[self.best].n_correct

    def to_dict(self) -> dict:
        return {
            "branches": [{"branch": b.branch, "drafted": b.drafted, "target": b.target,
                          "first_error": b.first_error,
                          "correct_sequence": b.correct_sequence} for b in self.branches],
            "best": self.best,
            "verified_sequence": self.verified_sequence,
            "rollback_needed": self.rollback_needed,
            "n_all": self.n_all,
            "n_correct": self.n_correct,
        }


def _check_branch(index, drafted, target, confidence) -> BranchCheck:
    first_error = next((p for p, (d, t) in enumerate(zip(drafted, target)) if d != t), None)
    if first_error is None:
        correct = list(drafted)
    else:
        correct = list(drafted[:first_error]) + [target[first_error]]
    return BranchCheck(index, list(drafted), list(target), first_error, correct, confidence)


def verify_tree(tree: TokenTree, target_model: LanguageModel,
                ledger: CallLedger | None = None) -> VerificationReport:
    """Check every drafted position of every branch in one target pass.

    Each branch is linearized and expanded into its prefixes; all prefixes of
    all branches form one batch.  A drafted token is correct iff it equals the
    target argmax for its prefix.
    """
    target_model.check_tokens(tree.prompt)
    target_model.check_tokens(n.token for n in tree.nodes)
    paths = [tree.path_tokens(i) for i in range(len(tree.branches))]
    rows = []
    for path in paths:
        for p in range(len(path) + 1):
            rows.append(MaskedContext(tuple(tree.prompt + path[:p])))
    dists = batched_distributions(target_model, rows, ledger, role="target")
    checks = []
    k = 0
    for i, path in enumerate(paths):
        target = [argmax_token(d) for d in dists[k:k + len(path) + 1]]
        k += len(path) + 1
        checks.append(_check_branch(i, path, target, tree.branches[i].cumulative_confidence))
    report = VerificationReport(checks, rows=len(rows))
    report.verified_sequence = longest_verified_path(report, tree, target_model.eos_id)
    report.rollback_needed = report.branches[report.best].first_error is not None
    return report


def _effective(check: BranchCheck, eos_id: int | None) -> list[int]:
    seq = list(check.correct_sequence)
    if check.first_error is None and not (seq and seq[-1] == eos_id):
        seq.append(check.target[-1])
    return seq


def longest_verified_path(report: VerificationReport, tree: TokenTree,
                          eos_id: int | None = None) -> list[int]:
    """Longest path through the tree of branch correct sequences.

    A fully correct branch is extended by the target's next token (it was
    computed in the same pass).  The correct sequences are merged into a
    prefix tree and searched depth-first; equal depths go to the branch with
    the higher cumulative confidence, then the lower index.  Sets
    ``report.best`` to the owning branch.
    """
    root: dict = {}
    ends = []  # (node dict, branch index)
    for check in report.branches:
        node = root
        for tok in _effective(check, eos_id):
            node = node.setdefault(tok, {})
        ends.append((id(node), check.branch))

    owners: dict[int, list[int]] = {}
    for node_id, b in ends:
        owners.setdefault(node_id, []).append(b)

    def rank(b):
        return (-report.branches[b].cumulative_confidence, b)

    best_key = None
    best_path: list[int] = []
    stack = [(root, [])]
    while stack:
        node, path = stack.pop()
        for b in owners.get(id(node), ()):
            key = (-len(path), rank(b))
            if best_key is None or key < best_key:
                best_key, best_path = key, path
                report.best = b
        for tok in sorted(node, reverse=True):
            stack.append((node[tok], path + [tok]))
    return best_path


def rollback_and_commit(tree: TokenTree, verified: list[int]) -> TokenTree:
    """Append ``verified`` to the prompt and drop every drafted node."""
    if not verified:
        raise ValueError("cannot commit an empty verified sequence")
    return TokenTree(tree.prompt + list(verified), max_branches=tree.max_branches)
