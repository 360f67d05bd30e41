"""Black-box models ``Y = f(X)`` with independent inputs.

A :class:`ModelSpec` couples a product input law with an evaluator: either
one of the builtin test functions (vectorized, in-process) or an external
command speaking the line protocol of :mod:`sobol_mirror.external`.

All randomness enters through uniform variates from a
``numpy.random.Generator``; each coordinate of ``X`` consumes exactly one
uniform, mapped through the inverse CDF of its law.  Drawing a block of
uniforms at once therefore gives the same inputs as drawing them one row
at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtri

from .errors import EvaluationError
from .subsets import SubsetUniverse

_TINY_U = 2.0**-54


@dataclass(frozen=True)
class InputLaw:
    """Marginal law of one input: ``uniform(lo, hi)`` or ``gaussian(mu, sigma)``."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown input law {self.kind!r}")
        if self.kind == "uniform" and not self.b > self.a:
            raise ValueError("uniform law needs hi > lo")
        if self.kind == "gaussian" and not self.b > 0:
            raise ValueError("gaussian law needs sigma > 0")

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0):
        return cls("gaussian", float(mu), float(sigma))

    @classmethod
    def parse(cls, spec) -> "InputLaw":
        """Accept ``InputLaw``, ``"uniform(0,1)"``, ``"gaussian"`` or a dict."""
        if isinstance(spec, InputLaw):
            return spec
        if isinstance(spec, dict):
            kind = spec["kind"]
            if kind == "uniform":
                return cls.uniform(spec.get("lo", 0.0), spec.get("hi", 1.0))
            return cls.gaussian(spec.get("mu", 0.0), spec.get("sigma", 1.0))
        text = str(spec).strip().replace(" ", "")
        name, _, rest = text.partition("(")
        args = [float(t) for t in rest.rstrip(")").split(",") if t] if rest else []
        if name in ("uniform", "unif", "u"):
            return cls.uniform(*args)
        if name in ("gaussian", "normal", "n"):
            return cls.gaussian(*args)
        raise ValueError(f"cannot parse input law {spec!r}")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        u = np.where(u <= 0.0, _TINY_U, u)
        return self.a + self.b * ndtri(u)

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b) if self.kind == "uniform" else self.a

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            return (self.b - self.a) ** 2 / 12.0
        return self.b**2

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "lo": self.a, "hi": self.b}
        return {"kind": "gaussian", "mu": self.a, "sigma": self.b}


class PickFreezeTriple(NamedTuple):
    u: int
    y: float
    y_u: float


# ---------------------------------------------------------------------------
# builtin test functions, vectorized over rows of x


def bratley(x: np.ndarray) -> np.ndarray:
    p = x.shape[1]
    signs = np.where(np.arange(1, p + 1) % 2 == 0, 1.0, -1.0)
    return np.cumprod(x, axis=1) @ signs


def disc(x: np.ndarray) -> np.ndarray:
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    return np.where(x3 < 0, x1, 0.0) + np.where(x3 >= 0, x2 * x2, 0.0) + x3


def disc2(x: np.ndarray) -> np.ndarray:
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    # x3 == 0 hits neither indicator
    return np.where(x3 > 0, x1, 0.0) + np.where(x3 < 0, x2, 0.0) + x3


def _linear(coefficients):
    c = np.asarray(coefficients, dtype=float)

    def linear(x):
        return x @ c

    return linear


BUILTINS = ("bratley", "disc", "disc2", "linear")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A model ``f`` plus the product law of its inputs.

    Use :func:`make_model` for builtins and :func:`external_model` for
    user programs.
    """

    name: str
    laws: tuple
    params: dict = field(default_factory=dict)
    command: tuple | None = None
    split_points: tuple = ()
    _fn: Callable | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return len(self.laws)

    @property
    def universe(self) -> SubsetUniverse:
        return SubsetUniverse(self.p)

    @property
    def is_builtin(self) -> bool:
        return self.command is None

    def inputs_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map an ``(n, p)`` block of uniforms to inputs."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for i, law in enumerate(self.laws):
            out[..., i] = law.from_uniform(u[..., i])
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.inputs_from_uniform(rng.random((n, self.p)))

    def evaluate(self, x) -> np.ndarray:
        """Evaluate ``f`` on rows of ``x`` (shape ``(n, p)`` or ``(p,)``)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.p:
            raise ValueError(f"expected {self.p} inputs, got {x2.shape[1]}")
        if self.is_builtin:
            y = np.asarray(self._fn(x2), dtype=float)
        else:
            from .external import evaluator_for

            ev = evaluator_for(self.command, self.p)
            y = np.empty(x2.shape[0])
            for k, row in enumerate(x2):
                try:
                    y[k] = ev(row)
                except EvaluationError as exc:
                    raise EvaluationError(exc.message, inputs=row, row=k) from exc
        bad = ~np.isfinite(y)
        if np.any(bad):
            k = int(np.argmax(bad))
            row = x2[k]
            raise EvaluationError(f"model {self.name!r} returned a non-finite value at x = {row.tolist()}", inputs=row, row=k)
        return y[0] if single else y

    def to_dict(self) -> dict:
        d = {"model": self.name, "p": self.p, "laws": [law.to_dict() for law in self.laws]}
        if self.params:
            d["params"] = dict(self.params)
        if self.command is not None:
            d["command"] = list(self.command)
        return d


def make_model(name: str, p: int | None = None, laws=None, **params) -> ModelSpec:
    """Build a builtin model.

    ``bratley``: uniform [0, 1] inputs, ``p = 5`` by default.
    ``disc``, ``disc2``: three standard Gaussian inputs.
    ``linear``: ``sum c_i x_i`` with ``coefficients`` (default all ones) and
    standard Gaussian inputs unless ``laws`` is given.
    """
    if name == "bratley":
        p = 5 if p is None else int(p)
        default_law = InputLaw.uniform(0.0, 1.0)
        fn = bratley
        splits = ()
    elif name in ("disc", "disc2"):
        if p not in (None, 3):
            raise ValueError(f"{name} is defined for p = 3 only")
        p = 3
        default_law = InputLaw.gaussian(0.0, 1.0)
        fn = disc if name == "disc" else disc2
        splits = ((), (), (0.0,))
    elif name == "linear":
        coefficients = params.get("coefficients")
        if coefficients is None:
            p = 2 if p is None else int(p)
            coefficients = [1.0] * p
        coefficients = [float(c) for c in coefficients]
        if p is None:
            p = len(coefficients)
        if len(coefficients) != p:
            raise ValueError("linear model: len(coefficients) != p")
        params = {**params, "coefficients": coefficients}
        default_law = InputLaw.gaussian(0.0, 1.0)
        fn = _linear(coefficients)
        splits = ()
    else:
        raise ValueError(f"unknown builtin model {name!r}; choose from {BUILTINS}")
    SubsetUniverse(p)
    if laws is None:
        laws = (default_law,) * p
    else:
        laws = tuple(InputLaw.parse(law) for law in laws)
        if len(laws) != p:
            raise ValueError(f"{len(laws)} input laws given for p = {p}")
    if not splits:
        splits = ((),) * p
    return ModelSpec(name=name, laws=laws, params=params, split_points=splits, _fn=fn)


def external_model(command, laws, name: str = "external") -> ModelSpec:
    """Model evaluated by a child process (see :mod:`sobol_mirror.external`)."""
    if isinstance(command, str):
        import shlex

        command = shlex.split(command)
    laws = tuple(InputLaw.parse(law) for law in laws)
    SubsetUniverse(len(laws))
    return ModelSpec(name=name, laws=laws, command=tuple(command), split_points=((),) * len(laws))


def evaluate_builtin(name: str, params: dict | None, x) -> float:
    """Evaluate a builtin at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    model = make_model(name, p=x.shape[0], **(params or {}))
    return float(model.evaluate(x))


def hybridize(x, x_prime, u: int) -> np.ndarray:
    """Take coordinate ``i`` from ``x`` if ``i`` is in ``u``, else from ``x_prime``."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape or x.ndim != 1:
        raise ValueError("x and x_prime must be 1-d vectors of equal length")
    p = x.shape[0]
    if not 0 <= u < 1 << p:
        raise ValueError(f"subset mask {u} out of range for p = {p}")
    keep = (u >> np.arange(p)) & 1
    return np.where(keep.astype(bool), x, x_prime)


def hybridize_rows(x: np.ndarray, x_prime: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise :func:`hybridize` with one mask per row."""
    p = x.shape[1]
    keep = ((np.asarray(masks)[:, None] >> np.arange(p)) & 1).astype(bool)
    return np.where(keep, x, x_prime)


def pick_freeze_draw(rng: np.random.Generator, model: ModelSpec, u: int) -> PickFreezeTriple:
    """Draw ``X, X'`` and return ``(u, f(X), f(X^(u)))``; two evaluations."""
    if not 0 <= u < 1 << model.p:
        raise ValueError(f"subset mask {u} out of range for p = {model.p}")
    block = model.inputs_from_uniform(rng.random((2, model.p)))
    x, x_prime = block[0], block[1]
    pair = np.stack([x, hybridize(x, x_prime, u)])
    y, y_u = model.evaluate(pair)
    return PickFreezeTriple(int(u), float(y), float(y_u))


def pick_freeze_sample(rng: np.random.Generator, model: ModelSpec, u: int, n: int):
    """``n`` independent pick-freeze pairs for one subset, as two arrays."""
    x = model.sample(rng, n)
    x_prime = model.sample(rng, n)
    masks = np.full(n, u, dtype=np.int64)
    y = model.evaluate(x)
    y_u = model.evaluate(hybridize_rows(x, x_prime, masks))
    return y, y_u
