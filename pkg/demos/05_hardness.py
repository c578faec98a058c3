"""
From NAE-3-SAT to two-head samples
==================================
"""

# %%
from rankcot.hardness import (
    NAEFormula,
    orders_from_assignment,
    reduce_2order_to_sample,
    reduce_nae_to_2order,
    sample_orders_from_pair,
    sample_separates,
    separates,
    two_order_separable_bruteforce,
    worked_instance,
)

print("bundled instance separable?", two_order_separable_bruteforce(worked_instance()))

# %%
phi = NAEFormula.parse("p nae3 3 1\n1 2 3\n")
inst = reduce_nae_to_2order(phi)
print(f"|U| = {len(inst.universe)}, |F| = {len(inst.F)}, |G| = {len(inst.G)}")
sample = reduce_2order_to_sample(inst)
print("sample rows", len(sample), "coordinates", sample.domain.n)

# %%
for a in phi.satisfying_assignments():
    pair = orders_from_assignment(phi, a)
    lifted = sample_orders_from_pair(inst, pair)
    print(a, separates(pair, inst), sample_separates(lifted, sample))
