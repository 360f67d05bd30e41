"""Classical Pick-Freeze estimator of closed indices ("PF1").

For one subset ``u`` and ``N`` pairs ``(Y_i, Y_i^u)``, with the pooled
mean ``zbar = mean((Y + Y^u) / 2)``::

    T = (mean(Y Y^u) - zbar**2) / (mean((Y**2 + (Y^u)**2) / 2) - zbar**2)

This is the asymptotically efficient form of Janon et al. (2014).  The
``"printed"`` variant replaces the denominator by ``mean(Z**2) - zbar**2``
with ``Z = (Y + Y^u) / 2``; it converges to ``2 S / (1 + S)`` instead of
``S`` and is kept only for comparison.

Every nonempty subset gets its own independent design, so estimating all
of them costs ``2 N (2**p - 1)`` model evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError
from .mirror import make_rng
from .models import ModelSpec, pick_freeze_sample
from .oracle import total_order_indices
from .subsets import mobius_transform


def pf1_estimate(y, y_u, variant: str = "efficient") -> float:
    """``T_{u,N}`` from paired outputs; not clipped to [0, 1]."""
    y = np.asarray(y, dtype=float)
    y_u = np.asarray(y_u, dtype=float)
    if y.shape != y_u.shape or y.ndim != 1:
        raise ValueError("y and y_u must be 1-d arrays of equal length")
    if y.shape[0] < 2:
        raise ValueError("need at least two pairs")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_u))):
        raise ValueError("non-finite values in the sample")
    if variant not in ("efficient", "printed"):
        raise ValueError(f"unknown PF1 variant {variant!r}")
    z = 0.5 * (y + y_u)
    zbar = z.mean()
    if variant == "efficient":
        den = 0.5 * np.mean(y * y + y_u * y_u) - zbar * zbar
    else:
        den = np.mean(z * z) - zbar * zbar
    if not den > 0:
        raise DegenerateSampleError("pooled sample has zero variance")
    return float((np.mean(y * y_u) - zbar * zbar) / den)


@dataclass
class PfResult:
    closed: np.ndarray
    sobol: np.ndarray
    total: np.ndarray
    evals: int
    n: int

    def first_order(self) -> np.ndarray:
        return np.array([self.sobol[1 << i] for i in range(self.total.shape[0])])


def pf1_all(model: ModelSpec, n: int, seed=0) -> PfResult:
    """PF1 estimates of every closed index, one fresh design per subset.

    The closed index of the empty set is 0 by convention; the Sobol'
    vector is the raw Mobius transform, without projection on the simplex.
    """
    if n < 2:
        raise ValueError("N must be >= 2")
    rng = make_rng(seed)
    q = 1 << model.p
    closed = np.zeros(q)
    for u in range(1, q):
        y, y_u = pick_freeze_sample(rng, model, u, n)
        closed[u] = pf1_estimate(y, y_u)
    return PfResult(
        closed=closed,
        sobol=mobius_transform(closed),
        total=total_order_indices(closed),
        evals=2 * n * (q - 1),
        n=n,
    )
