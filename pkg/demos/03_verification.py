"""Verifying a two-branch tree in one target pass."""
import numpy as np

from treespec import CallLedger, NGramModel, TokenTree, extend_branch, verify_tree
from treespec import rollback_and_commit


def dist(v, probs):
    d = np.zeros(v)
    for t, q in probs.items():
        d[t] = q
    free = [i for i in range(v) if i not in probs]
    d[free] = (1 - d.sum()) / len(free)
    return d


# branch 0 drafts 2,3,4 and branch 1 drafts 2,5,6,7
tree = TokenTree([1])
extend_branch(tree, 0, dist(10, {2: 0.9}))
extend_branch(tree, 0, dist(10, {3: 0.6, 5: 0.35}))
extend_branch(tree, 0, dist(10, {4: 0.9}))
extend_branch(tree, 1, dist(10, {6: 0.9}))
extend_branch(tree, 1, dist(10, {7: 0.9}))

# the target wants 1 -> 2 -> 5 -> 6 -> 8
target = NGramModel(4, 10, {(1,): dist(10, {2: 0.9}), (1, 2): dist(10, {5: 0.9}),
                            (1, 2, 5): dist(10, {6: 0.9}), (1, 2, 5, 6): dist(10, {8: 0.9})},
                    eos_id=0)

ledger = CallLedger()
report = verify_tree(tree, target, ledger)
for c in report.branches:
    print(f"branch {c.branch}: drafted {c.drafted} target {c.target} "
          f"first error {c.first_error} -> correct {c.correct_sequence}")
print("verified sequence:", report.verified_sequence, "from branch", report.best)
print("target passes:", ledger.passes["target"], "rows:", ledger.rows["target"])

# commit: the verified tokens join the prompt, drafts are dropped
tree = rollback_and_commit(tree, report.verified_sequence)
print("new prompt:", tree.prompt, "drafted nodes:", tree.n_drafted)
