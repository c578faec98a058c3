"""
Rank of a function over assignment queries
==========================================

A query lists every (position, letter) claim; its answer on a word is the
first claim that is true. Rank is the least depth of a tree of such queries.
"""

# %%
import numpy as np

from rankcot.core import Domain, FunctionTable, build_one_table, one_eval
from rankcot.rank import rank_exact_minimax, rank_exact_yesdepth
from rankcot.trees import aquery_to_yesno, one_tree, yes_depth

# XOR on two bits needs two queries, whichever order we pick.
xor = FunctionTable(Domain.binary(2), [0, 1, 1, 0])
print("rank(XOR) =", rank_exact_yesdepth(xor).value, "/ minimax:", rank_exact_minimax(xor).value)

# %%
# Position of the k-th one: k queries suffice ("next one after the last found")
# and, once n is large enough, are needed.
for n, k in [(2, 2), (6, 2), (12, 3)]:
    tree = one_tree(n, k)
    r = rank_exact_yesdepth(build_one_table(n, k)).value
    print(f"one^{k}_{n}: tree depth {tree.depth}, exact rank {r}")

# %%
# The same tree as YES/NO questions: each root-to-leaf path hears YES at most twice.
tree = one_tree(6, 2)
print("YES-depth:", yes_depth(aquery_to_yesno(tree)))
w = np.array([0, 1, 0, 0, 1, 1])
print("word", w, "-> position", tree.eval(w) + 1, "=", one_eval(6, 2, w))
