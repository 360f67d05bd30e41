"""One exponentiated-gradient step on the simplex.

The mirror step is the minimizer of eta <g, w> + KL(w, s) over the simplex;
with the entropy mirror map it has the closed form s * exp(-eta g) / Z.
"""

# %%
import numpy as np

from sobol_mirror.simplex import bregman_divergence, mirror_step, uniform_init

s = uniform_init(2)
print("start          :", s)
g = np.array([0.0, 1.0, -1.0, 0.0])
for eta in (0.1, 1.0, 5.0):
    w = mirror_step(s, g, eta)
    print(f"eta = {eta:4.1f} -> {np.round(w, 4)}  KL(w, s) = {bregman_divergence(w, s):.4f}")

# %% [markdown]
# Large gradients do not overflow: the exponent is shifted by its minimum
# over the support before exponentiating.

# %%
print(mirror_step(s, np.array([0.0, 1e6, -1e6, 0.0]), 1.0))
