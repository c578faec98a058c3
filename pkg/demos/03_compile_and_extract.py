"""
Trees to decoders and back
==========================

Compiling a depth-r tree gives an exact rational machine that runs r
iterations; each intermediate output is the one-hot code of the tree node
reached so far. Extraction reads any machine back as a tree.
"""

# %%
from rankcot.compiler import compile_layout, compile_tree, extract_tree
from rankcot.decoder import build_comp_decoder, decoder_compute, decoder_run
from rankcot.trees import comp_tree, one_tree

tree = one_tree(5, 2)
layout = compile_layout(tree)
machine = compile_tree(tree)
print("embedding dimension", machine.d, "iterations", machine.iterations)

w = (0, 1, 0, 1, 1)
for t, y in enumerate(decoder_run(machine, w).ys):
    print(f"y_{t} non-zero coordinates:", {k: str(v) for k, v in y.items()})
print("machine:", decoder_compute(machine, w), " tree:", tree.eval(w))

# %%
back = extract_tree(machine)
print("extracted depth", back.depth, "same function:", back.table() == tree.table())

# %%
# The float comp machine also extracts to a depth-2 tree equal to comp^2_5.
print(extract_tree(build_comp_decoder(5, 2), 2).table() == comp_tree(5, 2).table())
