"""Subsets of {1, ..., p} as bitmasks, and the linear maps M and M^-1.

A subset ``u`` is the integer whose bit ``i - 1`` is set iff variable ``i``
belongs to ``u``.  Every length-``2**p`` array in this package is indexed
by that integer, so the canonical order is ascending mask value
(``{} < {1} < {2} < {1,2} < {3} < ...``).

``M`` maps closed indices to Sobol' indices and ``M^-1`` maps back:

    M[u, v]    = (-1)**(|u| - |v|) * 1{v subset of u}
    M^-1[u, v] = 1{v subset of u}

Both are applied with the O(p 2^p) subset-sum sweep, never densely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt

import numpy as np

from .errors import CapacityError

MAX_P = 24
MAX_DENSE_P = 12

GOLDEN_HI = (3.0 + sqrt(5.0)) / 2.0
GOLDEN_LO = (3.0 - sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class SubsetUniverse:
    """The lattice of all subsets of ``{1, ..., p}``."""

    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or not 1 <= self.p <= MAX_P:
            raise ValueError(f"p must be an integer in [1, {MAX_P}], got {self.p!r}")

    @property
    def q(self) -> int:
        return 1 << self.p

    @property
    def full(self) -> int:
        return self.q - 1

    def singleton(self, i: int) -> int:
        """Mask of ``{i}`` with 1-based ``i``."""
        if not 1 <= i <= self.p:
            raise ValueError(f"variable index {i} outside 1..{self.p}")
        return 1 << (i - 1)

    def complement(self, u: int) -> int:
        _check_mask(u, self.q)
        return self.full ^ u

    def masks(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def cardinalities(self) -> np.ndarray:
        return popcounts(self.p)


def _check_mask(u, q: int) -> None:
    if not 0 <= u < q:
        raise ValueError(f"subset mask {u} out of range [0, {q})")


def _check_vector(x, name: str = "x") -> tuple[np.ndarray, int]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    q = x.shape[0]
    if q < 2 or q & (q - 1):
        raise ValueError(f"{name} has length {q}, expected a power of two >= 2")
    p = q.bit_length() - 1
    if p > MAX_P:
        raise ValueError(f"{name} has p = {p} > {MAX_P}")
    return x, p


def cardinality(u: int, q: int | None = None) -> int:
    """Number of variables in subset ``u``."""
    if u < 0 or (q is not None and u >= q):
        raise ValueError(f"subset mask {u} out of range")
    return int(u).bit_count()


@lru_cache(maxsize=32)
def popcounts(p: int) -> np.ndarray:
    """Cardinality of every subset, as an int array of length ``2**p``."""
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(p):
        counts = np.concatenate([counts, counts + 1])
    counts.setflags(write=False)
    return counts


def subsets_of(u: int, q: int | None = None) -> list[int]:
    """All ``v`` contained in ``u``, ascending."""
    if u < 0 or (q is not None and u >= q):
        raise ValueError(f"subset mask {u} out of range")
    out = []
    v = 0
    # standard submask enumeration in increasing order: v -> (v - u) & u
    while True:
        out.append(v)
        if v == u:
            return out
        v = (v - u) & u


@lru_cache(maxsize=32)
def submask_table(p: int) -> tuple[np.ndarray, ...]:
    """``table[u]`` is the int array of ``subsets_of(u)``.

    Cached per ``p``; the mirror iteration reads it on every step.
    """
    if p > 16:
        raise ValueError("submask table is only built for p <= 16")
    table = []
    for u in range(1 << p):
        arr = np.array(subsets_of(u), dtype=np.intp)
        arr.setflags(write=False)
        table.append(arr)
    return tuple(table)


def zeta_transform(s) -> np.ndarray:
    """Subset sums ``r[u] = sum_{v subset of u} s[v]``, i.e. ``M^-1 s``."""
    r, p = _check_vector(s, "s")
    r = r.copy()
    q = r.shape[0]
    for i in range(p):
        step = 1 << i
        view = r.reshape(q // (2 * step), 2, step)
        view[:, 1, :] += view[:, 0, :]
    return r


def mobius_transform(x) -> np.ndarray:
    """Inverse of :func:`zeta_transform`, i.e. ``M x``."""
    r, p = _check_vector(x, "x")
    r = r.copy()
    q = r.shape[0]
    for i in range(p):
        step = 1 << i
        view = r.reshape(q // (2 * step), 2, step)
        view[:, 1, :] -= view[:, 0, :]
    return r


def closed_coordinate(s, u: int) -> float:
    """``[M^-1 s]_u`` in O(2^|u|), touching only subsets of ``u``."""
    s = np.asarray(s)
    _check_mask(u, s.shape[0])
    total = 0.0
    v = 0
    while True:
        total += s[v]
        if v == u:
            return float(total)
        v = (v - u) & u


def dense_mobius_matrix(p: int, inverse: bool = False) -> np.ndarray:
    """Dense ``M_p`` (or ``M_p^-1`` with ``inverse=True``) as an int64 array.

    Built from the block recursion ``M_{p+1} = [[M_p, 0], [-M_p, M_p]]``.
    """
    if not 0 <= p <= MAX_DENSE_P:
        raise CapacityError(f"dense matrices are capped at p = {MAX_DENSE_P}, got p = {p}")
    m = np.ones((1, 1), dtype=np.int64)
    sign = 1 if inverse else -1
    for _ in range(p):
        z = np.zeros_like(m)
        m = np.block([[m, z], [sign * m, m]])
    return m


def vp_spectrum(p: int) -> np.ndarray:
    """Eigenvalues of ``M_p M_p^T``, ascending, with multiplicities.

    Each eigenvalue is ``GOLDEN_HI**k * GOLDEN_LO**(p - k)`` repeated
    ``C(p, k)`` times.
    """
    if not 0 <= p <= 20:
        raise ValueError(f"vp_spectrum supports 0 <= p <= 20, got {p}")
    values = []
    for k in range(p + 1):
        values.extend([GOLDEN_HI**k * GOLDEN_LO ** (p - k)] * comb(p, k))
    return np.sort(np.array(values))


def format_subset(u: int) -> str:
    """Human-readable ``{1,3}`` form; ``{}`` for the empty set."""
    members = [str(i + 1) for i in range(int(u).bit_length()) if u >> i & 1]
    return "{" + ",".join(members) + "}"


def parse_subset(text: str) -> int:
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ValueError(f"cannot parse subset {text!r}")
    body = body[1:-1].strip()
    if not body:
        return 0
    mask = 0
    for item in body.split(","):
        i = int(item)
        if i < 1:
            raise ValueError(f"variable index {i} must be >= 1")
        mask |= 1 << (i - 1)
    return mask
