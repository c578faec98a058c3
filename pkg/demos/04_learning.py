"""
Learning rank-k trees from examples
===================================
"""

# %%
import numpy as np

from rankcot.core import Domain
from rankcot.learning import SampleSource, pac_learn, pac_sample_size, solve_consistency
from rankcot.trees import random_tree

rng = np.random.default_rng(0)
d = Domain.binary(6)
hidden = random_tree(d, 1, 1, rng)
print("sample size for eps=delta=0.1:", pac_sample_size(d, 1, 0.1, 0.1))

# %%
errors = []
for trial in range(20):
    src = SampleSource(d, hidden, seed=trial)
    res = pac_learn(src, 1, 0.1, 0.1)
    errors.append(src.true_error(res.tree))
print("true errors:", np.round(errors, 3))

# %%
# A sample that no depth-1 tree fits.
from rankcot.learning import Sample  # noqa: E402
from rankcot.core import FunctionTable  # noqa: E402

xor = Sample.from_table(FunctionTable(Domain.binary(2), [0, 1, 1, 0]))
print("XOR at k=1:", solve_consistency(xor, 1).reason, "| at k=2:", solve_consistency(xor, 2).reason)
