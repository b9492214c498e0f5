"""Token tree: drafted tokens with branching successors.

Nodes are stored in insertion order.  A node's global position is
``len(prompt) + index``, which is also its column in the mask table, so
interleaved drafting across branches never renumbers existing rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lm import MaskedContext, argmax_token

ROOT = -1


class TreeError(Exception):
    """Structural misuse of a token tree."""


@dataclass(frozen=True)
class TreeNode:
    token: int
    confidence: float
    parent: int  # node index, or ROOT for the prompt
    position: int


@dataclass
class Branch:
    leaf: int
    length: int
    cumulative_confidence: float


class TokenTree:
    """Verified prompt plus a tree of drafted tokens.

    A prompt-only tree has a single empty branch whose leaf is ``ROOT`` and
    whose cumulative confidence is 1.
    """

    def __init__(self, prompt, max_branches: int = 8):
        if max_branches < 1:
            raise ValueError("max_branches must be >= 1")
        self.prompt = [int(t) for t in prompt]
        self.max_branches = int(max_branches)
        self.nodes: list[TreeNode] = []
        self.children: list[list[int]] = []
        self.branches: list[Branch] = [Branch(ROOT, 0, 1.0)]
        self.dropped_forks = 0
        self.stop_reason: str | None = None

    def __len__(self):
        return len(self.nodes)

    @property
    def n_drafted(self) -> int:
        return len(self.nodes)

    @property
    def n_positions(self) -> int:
        return len(self.prompt) + len(self.nodes)

    def add_node(self, token: int, confidence: float, parent: int) -> int:
        if not 0.0 < confidence <= 1.0:
            raise TreeError(f"confidence {confidence!r} outside (0, 1]")
        if parent != ROOT and not 0 <= parent < len(self.nodes):
            raise TreeError(f"unknown parent node {parent}")
        idx = len(self.nodes)
        self.nodes.append(TreeNode(int(token), float(confidence), parent,
                                   len(self.prompt) + idx))
        self.children.append([])
        if parent != ROOT:
            self.children[parent].append(idx)
        return idx

    def is_leaf(self, node: int) -> bool:
        if node == ROOT:
            return not self.nodes or all(n.parent != ROOT for n in self.nodes)
        return not self.children[node]

    def path(self, node: int) -> list[int]:
        """Node indices from the root down to ``node`` inclusive."""
        out = []
        while node != ROOT:
            out.append(node)
            node = self.nodes[node].parent
        out.reverse()
        return out

    def path_tokens(self, branch: int) -> list[int]:
        return [self.nodes[i].token for i in self.path(self.branches[branch].leaf)]

    def path_confidences(self, branch: int) -> list[float]:
        return [self.nodes[i].confidence for i in self.path(self.branches[branch].leaf)]

    def leaf_token(self, branch: int) -> int | None:
        leaf = self.branches[branch].leaf
        return None if leaf == ROOT else self.nodes[leaf].token

    def all_tokens(self) -> list[int]:
        return self.prompt + [n.token for n in self.nodes]

    def best_branch(self) -> int:
        """Branch with the highest cumulative confidence (lowest index on ties)."""
        if not self.branches:
            raise TreeError("tree has no branches")
        best = 0
        for i, b in enumerate(self.branches):
            if b.cumulative_confidence > self.branches[best].cumulative_confidence:
                best = i
        return best

    def leaf_context(self, branch: int) -> MaskedContext:
        """All tree tokens with the mask row of ``branch``'s leaf."""
        return MaskedContext(tuple(self.all_tokens()),
                             tuple(mask_row(self, self.branches[branch].leaf)))

    def append_chain(self, tokens, confidences) -> None:
        """Append a linear chain below the leaf of the single branch of a fresh tree."""
        if len(self.branches) != 1:
            raise TreeError("append_chain needs a single-branch tree")
        b = self.branches[0]
        for tok, conf in zip(tokens, confidences):
            b.leaf = self.add_node(tok, conf, b.leaf)
            b.length += 1
            b.cumulative_confidence *= conf

    def to_dict(self) -> dict:
        return {
            "prompt": list(self.prompt),
            "nodes": [{"token": n.token, "confidence": n.confidence, "parent": n.parent}
                      for n in self.nodes],
            "branches": [{"leaf": b.leaf, "length": b.length,
                          "cumulative_confidence": b.cumulative_confidence}
                         for b in self.branches],
        }


def extend_branch(tree: TokenTree, branch: int, dist: np.ndarray,
                  branch_threshold: float = 0.3) -> list[int]:
    """Grow ``branch`` by the argmax of ``dist`` and fork strong alternatives.

    Every non-argmax token with probability strictly above
    ``branch_threshold`` becomes a new branch forking at the current leaf.
    Forks beyond ``tree.max_branches`` are dropped lowest-probability first
    and counted in ``tree.dropped_forks``.  Returns the indices of the
    extended branch followed by any new branches.
    """
    if not 0.0 < branch_threshold < 1.0:
        raise ValueError("branch_threshold must lie in (0, 1)")
    if not 0 <= branch < len(tree.branches):
        raise TreeError(f"no branch {branch}")
    b = tree.branches[branch]
    if not tree.is_leaf(b.leaf):
        raise TreeError(f"branch {branch} does not end at a leaf")
    dist = np.asarray(dist)
    top = argmax_token(dist)
    parent = b.leaf
    c_parent = b.cumulative_confidence
    length = b.length

    # lowest-probability candidates are dropped first; ties keep lower ids
    candidates = [t for t in np.flatnonzero(dist > branch_threshold) if t != top]
    candidates.sort(key=lambda t: (-dist[t], t))
    room = tree.max_branches - len(tree.branches)
    kept = candidates[:max(room, 0)]
    tree.dropped_forks += len(candidates) - len(kept)

    p_top = float(dist[top])
    b.leaf = tree.add_node(top, p_top, parent)
    b.length = length + 1
    b.cumulative_confidence = c_parent * p_top
    affected = [branch]
    for tok in kept:
        p = float(dist[tok])
        node = tree.add_node(int(tok), p, parent)
        tree.branches.append(Branch(node, length + 1, c_parent * p))
        affected.append(len(tree.branches) - 1)
    return affected


def tree_cumulative_confidence(tree: TokenTree) -> float:
    """Maximum cumulative confidence over the tree's branches."""
    if not tree.branches:
        raise TreeError("tree has no branches")
    return max(b.cumulative_confidence for b in tree.branches)


def ancestors(tree: TokenTree, node: int) -> set[int]:
    """Node indices on the path to ``node``, including itself."""
    return set(tree.path(node))


def mask_row(tree: TokenTree, node: int) -> np.ndarray:
    """Attention row for predicting the successor of ``node``.

    True at every prompt position and at the positions of ``node`` and its
    ancestors.  ``ROOT`` yields the prompt-only row.
    """
    row = np.zeros(tree.n_positions, dtype=bool)
    row[:len(tree.prompt)] = True
    while node != ROOT:
        n = tree.nodes[node]
        row[n.position] = True
        node = n.parent
    return row


def build_mask_table(tree: TokenTree) -> np.ndarray:
    """Square boolean table over all positions (prompt rows are causal)."""
    n_prompt = len(tree.prompt)
    size = tree.n_positions
    table = np.zeros((size, size), dtype=bool)
    for i in range(n_prompt):
        table[i, :i + 1] = True
    for idx in range(len(tree.nodes)):
        table[n_prompt + idx] = mask_row(tree, idx)
    return table


def branch_contexts(tree: TokenTree) -> list[MaskedContext]:
    """One fully visible context (prompt + path) per branch."""
    if not tree.branches:
        raise TreeError("tree has no branches")
    return [MaskedContext(tuple(tree.prompt + tree.path_tokens(i)))
            for i in range(len(tree.branches))]
