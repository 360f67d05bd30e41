"""Reference closed and Sobol' indices by tensor-product quadrature.

The model is evaluated once on a product grid; ``E[Y | X_u]`` is obtained by
contracting the grid against the quadrature weights of the axes outside
``u``, and its variance by a second contraction over the axes in ``u``.
Gauss-Legendre nodes serve uniform inputs, Gauss-Hermite nodes serve
Gaussian inputs.  A Gaussian axis with a discontinuity is split at the jump
and each half-line is integrated with Gauss-Legendre against the normal
density on a truncated interval, so no rule straddles the jump.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .errors import InconsistencyError, UnsupportedModelError
from .models import InputLaw, ModelSpec
from .subsets import mobius_transform

DEFAULT_RESOLUTION = 64
GRID_BUDGET = 1 << 21
TAIL_SIGMAS = 12.0
CACHE_ENV = "SOBOL_MIRROR_CACHE"


@dataclass
class ReferenceTable:
    """Ground-truth indices of a model."""

    closed: np.ndarray
    sobol: np.ndarray
    total: np.ndarray
    variance: float
    mean: float
    error_bound: float
    model: str = ""
    params: dict = field(default_factory=dict)
    resolution: int = 0

    @property
    def p(self) -> int:
        return self.total.shape[0]

    def first_order(self) -> np.ndarray:
        return np.array([self.sobol[1 << i] for i in range(self.p)])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "resolution": self.resolution,
            "mean": self.mean,
            "variance": self.variance,
            "closed": self.closed.tolist(),
            "sobol": self.sobol.tolist(),
            "total": self.total.tolist(),
            "error_bound": self.error_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceTable":
        return cls(
            closed=np.array(d["closed"], dtype=float),
            sobol=np.array(d["sobol"], dtype=float),
            total=np.array(d["total"], dtype=float),
            variance=float(d["variance"]),
            mean=float(d["mean"]),
            error_bound=float(d["error_bound"]),
            model=d.get("model", ""),
            params=d.get("params", {}),
            resolution=int(d.get("resolution", 0)),
        )


def sobol_from_closed(closed) -> np.ndarray:
    """Sobol' indices ``M closed``, cleaned of round-off.

    Negative coordinates down to ``-1e-6`` are set to zero; anything lower
    means the input was not a closed-index vector.
    """
    closed = np.asarray(closed, dtype=float)
    s = mobius_transform(closed)
    worst = s.min()
    if worst < -1e-6:
        u = int(np.argmin(s))
        raise InconsistencyError(f"Sobol' coordinate {u} is {worst:.3g} < -1e-6")
    s = np.where(s < 0, 0.0, s)
    s[0] = 0.0
    total = s.sum()
    if abs(total - 1.0) <= 1e-6:
        s = s / total
    return s


def total_order_indices(closed) -> np.ndarray:
    """``S_i^tot = 1 - closed[complement of {i}]`` for each variable."""
    closed = np.asarray(closed, dtype=float)
    q = closed.shape[0]
    p = q.bit_length() - 1
    full = q - 1
    return np.array([1.0 - closed[full ^ (1 << i)] for i in range(p)])


def _axis_rule(law: InputLaw, splits, n: int):
    """Nodes and probability weights for one input axis."""
    if law.kind == "uniform":
        t, w = leggauss(n)
        return law.a + (law.b - law.a) * (t + 1) / 2, w / 2
    if not splits:
        t, w = hermegauss(n)
        return law.a + law.b * t, w / np.sqrt(2 * np.pi)
    # piecewise on the standardized scale, each piece against the normal pdf
    cuts = sorted((c - law.a) / law.b for c in splits)
    edges = [-TAIL_SIGMAS] + [c for c in cuts if -TAIL_SIGMAS < c < TAIL_SIGMAS] + [TAIL_SIGMAS]
    t, w = leggauss(n)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        z = lo + (hi - lo) * (t + 1) / 2
        nodes.append(z)
        weights.append(w * (hi - lo) / 2 * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi))
    return law.a + law.b * np.concatenate(nodes), np.concatenate(weights)


def _rules(model: ModelSpec, resolution: int):
    splits = model.split_points or ((),) * model.p
    return [_axis_rule(law, sp, resolution) for law, sp in zip(model.laws, splits)]


def _grid_size(model: ModelSpec, resolution: int) -> int:
    return int(np.prod([len(x) for x, _ in _rules(model, resolution)]))


def effective_resolution(model: ModelSpec, resolution: int = DEFAULT_RESOLUTION) -> int:
    """Largest resolution <= ``resolution`` whose grid fits the memory budget."""
    r = int(resolution)
    while r > 2 and _grid_size(model, r) > GRID_BUDGET:
        r -= 1
    return r


def _closed_on_grid(model: ModelSpec, resolution: int):
    rules = _rules(model, resolution)
    p = model.p
    mesh = np.meshgrid(*[x for x, _ in rules], indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    values = model.evaluate(points).reshape(mesh[0].shape)
    weights = [w for _, w in rules]

    def contract(arr, axes):
        for ax in sorted(axes, reverse=True):
            arr = np.tensordot(arr, weights[ax], axes=([ax], [0]))
        return arr

    mean = float(contract(values, range(p)))
    second = float(contract(values * values, range(p)))
    variance = second - mean * mean
    if not variance > 0:
        raise InconsistencyError("model output has zero variance on the quadrature grid")
    q = 1 << p
    closed = np.zeros(q)
    for u in range(1, q):
        outside = [i for i in range(p) if not u >> i & 1]
        inside = [i for i in range(p) if u >> i & 1]
        cond = contract(values, outside)
        # remaining axes of cond are the members of u, in increasing order
        cw = [weights[i] for i in inside]
        sq = cond * cond
        for k in range(len(inside) - 1, -1, -1):
            sq = np.tensordot(sq, cw[k], axes=([k], [0]))
        closed[u] = (float(sq) - mean * mean) / variance
    closed[q - 1] = 1.0
    return closed, mean, variance


def closed_indices_reference(model: ModelSpec, resolution: int = DEFAULT_RESOLUTION) -> ReferenceTable:
    """Quadrature reference for a builtin model.

    The error bound is the largest change of any closed index between
    ``resolution`` and ``resolution // 2`` nodes per axis (floored at 1e-12).
    """
    if not model.is_builtin:
        raise UnsupportedModelError("the quadrature oracle needs a builtin model")
    r = effective_resolution(model, resolution)
    closed, mean, variance = _closed_on_grid(model, r)
    coarse, _, _ = _closed_on_grid(model, max(r // 2, 2))
    error_bound = max(float(np.max(np.abs(closed - coarse))), 1e-12)
    sobol = sobol_from_closed(closed)
    return ReferenceTable(
        closed=closed,
        sobol=sobol,
        total=total_order_indices(closed),
        variance=variance,
        mean=mean,
        error_bound=error_bound,
        model=model.name,
        params=_cache_params(model),
        resolution=r,
    )


def _cache_params(model: ModelSpec) -> dict:
    d = model.to_dict()
    d.pop("model")
    return d


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "sobol_mirror"


def _cache_path(model: ModelSpec, resolution: int, directory: Path) -> Path:
    key = json.dumps(_cache_params(model), sort_keys=True)
    digest = hashlib.sha1(key.encode()).hexdigest()[:12]
    return directory / f"{model.name}-p{model.p}-r{resolution}-{digest}.json"


def reference(model: ModelSpec, resolution: int = DEFAULT_RESOLUTION, directory=None, use_cache: bool = True) -> ReferenceTable:
    """Cached :func:`closed_indices_reference`."""
    if not use_cache:
        return closed_indices_reference(model, resolution)
    directory = Path(directory) if directory is not None else cache_dir()
    path = _cache_path(model, resolution, directory)
    if path.exists():
        return ReferenceTable.from_dict(json.loads(path.read_text()))
    table = closed_indices_reference(model, resolution)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_text(json.dumps(table.to_dict(), indent=1))
        tmp.replace(path)
    except OSError:
        pass
    return table
