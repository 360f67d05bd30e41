"""Subsets as bitmasks, and moving between Sobol' and closed indices.

Variable i lives in bit i - 1, so with p = 3 the mask 0b101 is {1, 3}.
Every length-2**p vector in the package is indexed this way.
"""

# %%
import numpy as np

from sobol_mirror.subsets import (
    dense_mobius_matrix,
    format_subset,
    mobius_transform,
    subsets_of,
    vp_spectrum,
    zeta_transform,
)

p = 3
for u in range(1 << p):
    print(f"mask {u:03b} -> {format_subset(u):8s} subsets: {[format_subset(v) for v in subsets_of(u)]}")

# %% [markdown]
# Closed indices are subset sums of Sobol' indices (the zeta transform);
# the Mobius transform undoes it.  Both run in O(p 2**p) without building
# a matrix.

# %%
sobol = np.array([0, 0.125, 0.125, 0, 0.25, 0.25, 0.25, 0])  # disc2
closed = zeta_transform(sobol)
print("closed :", closed)
print("back   :", mobius_transform(closed))

# %% [markdown]
# For small p the dense matrix is available for checking.  The eigenvalues
# of M M^T are powers of the golden-ratio pair, and their product is 1.

# %%
m = dense_mobius_matrix(p)
print(m)
print("spectrum:", np.round(vp_spectrum(p), 6))
print("eigvalsh:", np.round(np.sort(np.linalg.eigvalsh((m @ m.T).astype(float))), 6))
