"""Growing a token tree: forks, confidences, mask rows, pacing."""
import numpy as np

from treespec import (PacerState, TokenTree, build_mask_table, deficit, extend_branch,
                      select_branch, tree_cumulative_confidence)


def dist(v, probs):
    d = np.full(v, 0.0)
    for t, q in probs.items():
        d[t] = q
    free = [i for i in range(v) if i not in probs]
    d[free] = (1 - d.sum()) / len(free)
    return d


# prompt token 1; draft 2 then 3; at the third step token 5 is strong enough to fork
tree = TokenTree([1])
extend_branch(tree, 0, dist(10, {2: 0.9}))
extend_branch(tree, 0, dist(10, {3: 0.9}))
print("forks:", extend_branch(tree, 0, dist(10, {4: 0.6, 5: 0.35})))
extend_branch(tree, 0, dist(10, {6: 0.9}))
for b in range(len(tree.branches)):
    print(f"branch {b}: tokens {tree.path_tokens(b)}  C = {tree.branches[b].cumulative_confidence:.4f}")
print("tree confidence T_c =", round(tree_cumulative_confidence(tree), 4))

# rows of the mask table: prompt causal, drafted rows = ancestor closure
print(build_mask_table(tree).astype(int))
print("branch 1 leaf sees positions", [int(i) + 1 for i in np.flatnonzero(tree.leaf_context(1).mask)])

# pacing: each branch's share of drafted tokens follows its confidence
state = PacerState(6, (0.6, 0.2), (3, 3))
print("deficits:", [round(deficit(i, state), 3) for i in range(2)], "-> pick", select_branch(state))
lengths = [0, 0, 0]
for m in range(60):
    lengths[select_branch(PacerState(m, (0.5, 0.3, 0.2), tuple(lengths)))] += 1
print("60 tokens paced over C = 0.5/0.3/0.2:", lengths)
