"""Negative entropy on the simplex, its Bregman divergence, and the
exponentiated-gradient (entropic mirror) step.

Vectors live on ``{s >= 0, s[0] == 0, sum(s) == 1}`` where index 0 is the
empty subset.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericalError
from .subsets import SubsetUniverse

SIMPLEX_TOL = 1e-12


def is_on_simplex(v, tol: float = SIMPLEX_TOL, pinned_empty: bool = True) -> bool:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0):
        return False
    if pinned_empty and v[0] != 0.0:
        return False
    return abs(v.sum() - 1.0) <= tol


def _require_simplex(v, name, tol=1e-9):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or not np.all(np.isfinite(v)):
        raise DomainError(f"{name} must be a finite 1-d vector")
    if np.any(v < 0):
        raise DomainError(f"{name} has a negative coordinate")
    if abs(v.sum() - 1.0) > tol:
        raise DomainError(f"{name} sums to {v.sum()!r}, not 1")
    return v


def entropy(v) -> float:
    """Negative entropy ``sum v_i log v_i`` with ``0 log 0 = 0``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("entropy is undefined for negative coordinates")
    pos = v[v > 0]
    return float(np.sum(pos * np.log(pos)))


def entropy_gradient(v) -> np.ndarray:
    """``log v + 1``; ``-inf`` on zero coordinates."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(v) + 1.0


def bregman_divergence(w, v, on_simplex: bool = True) -> float:
    """Bregman divergence of the negative entropy, ``D(w, v)``.

    On the simplex this is the relative entropy ``sum w log(w / v)``.
    Returns ``inf`` when ``w`` charges a coordinate where ``v`` is zero.

    With ``on_simplex=False`` the defining expression
    ``h(w) - h(v) - <grad h(v), w - v>`` is evaluated for arbitrary
    nonnegative vectors (used for finite-difference checks off the simplex).
    """
    if on_simplex:
        w = _require_simplex(w, "w")
        v = _require_simplex(v, "v")
    else:
        w = np.asarray(w, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.any(w < 0) or np.any(v < 0):
            raise DomainError("Bregman divergence needs nonnegative vectors")
    if w.shape != v.shape:
        raise DomainError("w and v have different lengths")
    if np.any((w > 0) & (v == 0)):
        return float("inf")
    sw = w > 0
    kl = float(np.sum(w[sw] * np.log(w[sw] / v[sw])))
    if on_simplex:
        return kl
    return kl - float(w.sum()) + float(v.sum())


def mirror_step(s, g, eta: float) -> np.ndarray:
    """One entropic mirror-descent step ``s * exp(-eta g) / Z``.

    The exponent is shifted by its minimum over the support of ``s`` so
    that no factor overflows; coordinates where ``s`` is zero stay zero.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    if s.shape != g.shape:
        raise ValueError("s and g have different lengths")
    if eta < 0:
        raise ValueError("step size must be nonnegative")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    support = s > 0
    if not np.any(support):
        raise NumericalError("s has empty support")
    expo = np.zeros_like(s)
    expo[support] = eta * g[support]
    expo[support] -= expo[support].min()
    out = np.zeros_like(s)
    out[support] = s[support] * np.exp(-expo[support])
    z = out.sum()
    if not z > 0:
        raise NumericalError("mirror step normalizer underflowed")
    return out / z


def uniform_init(universe: SubsetUniverse | int) -> np.ndarray:
    """Zero on the empty set, ``1 / (q - 1)`` on every nonempty subset."""
    if not isinstance(universe, SubsetUniverse):
        universe = SubsetUniverse(int(universe))
    s = np.full(universe.q, 1.0 / (universe.q - 1))
    s[0] = 0.0
    return s


def normalize_weights(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("weights must be finite and nonnegative")
    total = a.sum()
    if total <= 0:
        raise DomainError("weights sum to zero")
    return a / total
