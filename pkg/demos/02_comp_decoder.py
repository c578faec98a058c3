"""
Iterated composition with a six-dimensional decoder
===================================================

Each iteration attends to the token whose position matches the current
pointer and copies its value forward.
"""

# %%
import numpy as np

from rankcot.core import comp_eval
from rankcot.decoder import build_comp_decoder, decoder_run

n, t = 5, 3
w = (2, 3, 1, 5, 4)  # f(1)=2, f(2)=3, ...
m = build_comp_decoder(n, t)
trace = decoder_run(m, [x - 1 for x in w])

for step, y in enumerate(trace.ys[1:], start=1):
    print(f"y_{step}: value coordinate {y[5]:.3f}, head picked token {trace.heads[step - 1][0] + 1}")
print("comp_eval says", comp_eval(n, t, w))

# %%
# Attention scores are cos(i - current pointer); the pointer's own token scores 1.
np.set_printoptions(precision=3, suppress=True)
print(np.array(trace.scores[0][0][:n]))
