"""Toy language models: lookup, masking, perturbed drafts, files."""
import os
import tempfile

import numpy as np

from treespec import MaskedContext, NGramModel, LinearSoftmaxModel, perturbed_copy
from treespec import load_model, save_model

np.set_printoptions(precision=3, suppress=True)

# a random order-2 n-gram target over 12 token ids, id 11 is EOS
target = NGramModel.random(12, order=2, seed=0)
ctx = MaskedContext((3, 5))
p = target.next_distribution(ctx)
print("next-token distribution after [3, 5]:", p)
print("argmax:", int(np.argmax(p)), "prob", round(float(p.max()), 3))

# a mask row hides positions; the model only sees the visible tokens
masked = MaskedContext((3, 7, 5), (True, False, True))
print("masked [3, (7), 5] == [3, 5]:", np.array_equal(target.next_distribution(masked), p))

# drafts are noisy copies of the target; agreement falls with noise
for noise in (0.0, 0.1, 0.3, 0.6):
    draft = perturbed_copy(target, noise, seed=1)
    agree = np.mean([np.argmax(target.table[k]) == np.argmax(draft.table[k])
                     for k in target.table])
    print(f"noise {noise:.1f}: draft argmax agrees on {agree:.0%} of contexts")

# a second backend with continuous weights
lin = LinearSoftmaxModel.random(12, dim=6, seed=4)
print("linear model row sums to", lin.next_distribution(ctx).sum())

# models round-trip through a versioned JSON file
path = os.path.join(tempfile.mkdtemp(), "target.json")
save_model(target, path)
print("reloaded model equal:", load_model(path) == target)
