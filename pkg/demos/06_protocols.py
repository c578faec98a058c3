"""
Two-party protocols from trees
==============================

Alice holds some positions, Bob the rest. Every query costs one message per
party, and alternating who opens lets adjacent messages merge.
"""

# %%
import json

from rankcot.commcomp import PositionSplit, embed_pointer_chasing, one_k_two_round, run_protocol, tree_to_protocol
from rankcot.core import comp_eval
from rankcot.trees import comp_tree, one_tree

split = PositionSplit.prefix(8, 4)
alice_first, bob_first = tree_to_protocol(one_tree(8, 2), split)
print("rounds", alice_first.num_rounds, "bits", alice_first.total_bits)
out, transcript = run_protocol(alice_first, split, (0, 1, 0, 0, 1, 0, 0, 0))
print("output position", out + 1)
print(json.dumps(transcript.dump(alice_first), indent=1))

# %%
# Pointer chasing is iterated composition with the halves split between the parties.
w, split = embed_pointer_chasing([3, 1, 2], [2, 2, 1])
p, _ = tree_to_protocol(comp_tree(6, 2), split)
print(w, "comp^2 =", comp_eval(6, 2, w), "protocol =", run_protocol(p, split, [x - 1 for x in w])[0] + 1)

# %%
p = one_k_two_round(8, 2, PositionSplit.prefix(8, 4))
print("two-round protocol bits:", p.total_bits)
