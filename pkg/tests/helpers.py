"""Shared builders for tests."""

import numpy as np

from treespec.lm import NGramModel
from treespec.tree import TokenTree, extend_branch


def peaked(vocab_size, probs: dict):
    """Distribution with the given token masses, rest spread evenly."""
    d = np.zeros(vocab_size)
    for t, p in probs.items():
        d[t] = p
    rest = 1.0 - d.sum()
    free = [i for i in range(vocab_size) if i not in probs]
    d[free] = rest / len(free)
    return d


def forked_tree():
    """Prompt token 1; branch b1 = 2-3-4-6 and fork b2 = 5 below token 3."""
    tree = TokenTree([1])
    extend_branch(tree, 0, peaked(10, {2: 0.9}))
    extend_branch(tree, 0, peaked(10, {3: 0.9}))
    extend_branch(tree, 0, peaked(10, {4: 0.6, 5: 0.35}))
    extend_branch(tree, 0, peaked(10, {6: 0.9}))
    return tree


def rectify_setup():
    """Two branches sharing token 2; the target rectifies one slot in each.

    branch 0 drafts 2,3,4 (target wants 5 after 2);
    branch 1 drafts 2,5,6,7 (target wants 8 instead of 7).
    """
    tree = TokenTree([1])
    extend_branch(tree, 0, peaked(10, {2: 0.9}))
    extend_branch(tree, 0, peaked(10, {3: 0.6, 5: 0.35}))
    extend_branch(tree, 0, peaked(10, {4: 0.9}))
    extend_branch(tree, 1, peaked(10, {6: 0.9}))
    extend_branch(tree, 1, peaked(10, {7: 0.9}))
    table = {(1,): peaked(10, {2: 0.9}), (1, 2): peaked(10, {5: 0.9}),
             (1, 2, 5): peaked(10, {6: 0.9}), (1, 2, 5, 6): peaked(10, {8: 0.9}),
             (1, 2, 3): peaked(10, {9: 0.9})}
    target = NGramModel(4, 10, table, eos_id=0)
    return tree, target


def random_tree(rng, n_nodes, vocab_size=12, prompt_len=3, max_branches=64):
    """Tree grown by extending random branches with random distributions."""
    prompt = [int(t) for t in rng.integers(1, vocab_size, size=prompt_len)]
    tree = TokenTree(prompt, max_branches=max_branches)
    while tree.n_drafted < n_nodes:
        b = int(rng.integers(len(tree.branches)))
        d = rng.dirichlet(np.full(vocab_size, 0.3))
        extend_branch(tree, b, d, branch_threshold=0.25)
    return tree
