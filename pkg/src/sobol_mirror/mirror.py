"""Online Pick-Freeze mirror descent over all ``2**p`` Sobol' indices.

Each iteration draws a subset ``U`` from the sampling law ``a``, one
pick-freeze pair ``(Y, Y^U)``, and moves the current estimate ``S`` on the
simplex with an exponentiated-gradient step.  The stochastic gradient is

    c = (Y - m) * ((Y - m) * [M^-1 S]_U - (Y^U - m)),   g_v = c * 1{v subset of U}

where ``m`` is the running mean of ``Y`` *before* the current sample is
folded in.  Only the ``2**|U|`` coordinates below ``U`` are touched.

Random numbers: every iteration consumes one row of ``2p + 1`` uniforms
(``X``, ``X'`` and the variate that picks ``U``), so iterating step by step
or in blocks yields the same trajectory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError, EvaluationError
from .models import ModelSpec, PickFreezeTriple, hybridize_rows
from .simplex import mirror_step, normalize_weights, uniform_init
from .subsets import GOLDEN_LO, closed_coordinate, dense_mobius_matrix, popcounts, submask_table, zeta_transform
from .oracle import total_order_indices

DEFAULT_ETA0 = 0.3
DEFAULT_ALPHA = 0.5
DEFAULT_FLOOR = 1e-6
CHUNK = 4096


# ---------------------------------------------------------------------------
# sampling laws over subsets


def weight_exp_norm(a, ell: float) -> float:
    """``sum_u a_u 2**(ell |u|)``, the exponential size-moment of ``a``."""
    a = np.asarray(a, dtype=float)
    p = a.shape[0].bit_length() - 1
    return float(np.sum(a * np.exp2(ell * popcounts(p))))


@dataclass(frozen=True)
class SamplingStrategy:
    """How the subset ``U`` is drawn at each iteration.

    ``fixed`` uses ``base`` throughout; ``proportional_s`` and ``inverse_s``
    recompute ``a`` from the current estimate (``a ~ S`` and ``a ~ 1/S``)
    after flooring it at ``floor``.
    """

    kind: str = "fixed"
    base: np.ndarray | None = None
    floor: float = DEFAULT_FLOOR
    exclude_empty: bool = False

    def __post_init__(self):
        if self.kind not in ("fixed", "proportional_s", "inverse_s"):
            raise ValueError(f"unknown sampling strategy {self.kind!r}")
        if self.kind == "fixed":
            if self.base is None:
                raise ValueError("fixed strategy needs base weights")
            base = normalize_weights(self.base)
            if self.exclude_empty:
                base = base.copy()
                base[0] = 0.0
                base = normalize_weights(base)
            base.setflags(write=False)
            object.__setattr__(self, "base", base)
        if not self.floor > 0:
            raise ValueError("floor must be positive")

    @classmethod
    def uniform(cls, p: int, exclude_empty: bool = False) -> "SamplingStrategy":
        return cls("fixed", np.full(1 << p, 1.0), exclude_empty=exclude_empty)

    @classmethod
    def from_label(cls, label: str, p: int, exclude_empty: bool = False, floor: float = DEFAULT_FLOOR):
        """``unif``/``avg`` -> uniform, ``S`` -> proportional, ``1/S`` -> inverse."""
        if label in ("unif", "avg", "uniform"):
            return cls.uniform(p, exclude_empty)
        if label in ("S", "proportional_s"):
            return cls("proportional_s", floor=floor, exclude_empty=exclude_empty)
        if label in ("1/S", "inverse_s"):
            return cls("inverse_s", floor=floor, exclude_empty=exclude_empty)
        raise ValueError(f"unknown strategy label {label!r}")

    @property
    def adaptive(self) -> bool:
        return self.kind != "fixed"


def resolve_weights(strategy: SamplingStrategy, s_hat) -> np.ndarray:
    """Sampling law ``a`` for the current estimate.

    For the adaptive kinds the nonempty subsets get ``max(S_u, floor)`` (or
    its reciprocal) and the empty set gets ``floor`` times the total of
    those raw weights, so it keeps a small positive mass in both kinds.
    """
    if strategy.kind == "fixed":
        return strategy.base
    s = np.maximum(np.asarray(s_hat, dtype=float), strategy.floor)
    raw = s if strategy.kind == "proportional_s" else 1.0 / s
    raw[0] = 0.0 if strategy.exclude_empty else strategy.floor * raw[1:].sum()
    return raw / raw.sum()


def _draw_subset(cdf: np.ndarray, v: float) -> int:
    u = int(np.searchsorted(cdf, v * cdf[-1], side="right"))
    return min(u, cdf.shape[0] - 1)


# ---------------------------------------------------------------------------
# step sizes


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``eta_k`` for ``k >= 1``.

    ``power``: ``eta0 * (k + 1) ** -alpha``.
    ``theorem_constant``: ``1 / sqrt((1 + sqrt(||a||_exp,2)) * horizon)``
    for ``k <= horizon`` and zero afterwards.
    """

    kind: str = "power"
    eta0: float = DEFAULT_ETA0
    alpha: float = DEFAULT_ALPHA
    horizon: int | None = None
    a_exp2: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.eta0 < 0:
                raise ValueError("eta0 must be nonnegative")
            if not 0.5 <= self.alpha <= 1.0:
                raise ValueError("alpha must lie in [1/2, 1]")
        elif self.kind == "theorem_constant":
            if self.horizon is None or self.horizon < 1 or self.a_exp2 is None:
                raise ValueError("theorem_constant needs a horizon and ||a||_exp,2")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def theorem_constant(cls, horizon: int, a) -> "StepSchedule":
        return cls("theorem_constant", horizon=int(horizon), a_exp2=weight_exp_norm(a, 2.0))

    def __call__(self, k: int) -> float:
        if self.kind == "power":
            return self.eta0 * (k + 1) ** -self.alpha
        if k > self.horizon:
            return 0.0
        return 1.0 / math.sqrt((1.0 + math.sqrt(self.a_exp2)) * self.horizon)

    @property
    def horizon_free(self) -> bool:
        return self.kind == "power"

    def satisfies_robbins_monro(self) -> bool:
        """``sum eta = inf`` and ``sum eta**2 < inf``, decided from the form."""
        return self.kind == "power" and self.eta0 > 0 and 0.5 < self.alpha <= 1.0


# ---------------------------------------------------------------------------
# state


@dataclass
class EstimatorState:
    """Resumable state after ``n`` iterations."""

    n: int
    m_hat: float
    s_hat: np.ndarray
    cesaro_num: np.ndarray
    cesaro_den: float
    evals: int

    @classmethod
    def initial(cls, p: int) -> "EstimatorState":
        s = uniform_init(p)
        return cls(0, 0.0, s, np.zeros_like(s), 0.0, 0)

    @property
    def p(self) -> int:
        return self.s_hat.shape[0].bit_length() - 1

    def copy(self) -> "EstimatorState":
        return EstimatorState(self.n, self.m_hat, self.s_hat.copy(), self.cesaro_num.copy(), self.cesaro_den, self.evals)

    def to_dict(self, rng: np.random.Generator | None = None) -> dict:
        d = {
            "n": self.n,
            "m_hat": self.m_hat,
            "s_hat": self.s_hat.tolist(),
            "cesaro_num": self.cesaro_num.tolist(),
            "cesaro_den": self.cesaro_den,
            "evals": self.evals,
        }
        if rng is not None:
            d["rng_state"] = rng.bit_generator.state
        return d

    @classmethod
    def from_dict(cls, d: dict):
        """Return ``(state, rng)``; ``rng`` is None when absent."""
        state = cls(
            int(d["n"]),
            float(d["m_hat"]),
            np.array(d["s_hat"], dtype=float),
            np.array(d["cesaro_num"], dtype=float),
            float(d["cesaro_den"]),
            int(d["evals"]),
        )
        rng = None
        if "rng_state" in d:
            bg = getattr(np.random, d["rng_state"]["bit_generator"])()
            bg.state = d["rng_state"]
            rng = np.random.Generator(bg)
        return state, rng


def save_checkpoint(path, state: EstimatorState, rng: np.random.Generator) -> None:
    with open(path, "w") as fh:
        json.dump(state.to_dict(rng), fh)


def load_checkpoint(path):
    with open(path) as fh:
        return EstimatorState.from_dict(json.load(fh))


def cesaro_average(state: EstimatorState) -> np.ndarray:
    """Step-size weighted average ``sum eta_{k+1} S_k / sum eta_{k+1}``."""
    if state.n < 1 or not state.cesaro_den > 0:
        raise ValueError("Cesaro average of an empty trajectory")
    out = state.cesaro_num / state.cesaro_den
    return out / out.sum()


# ---------------------------------------------------------------------------
# gradient


def gradient_scalar(s_hat, m_hat: float, triple: PickFreezeTriple) -> float:
    """Common value ``c`` of the gradient on the coordinates below ``U``."""
    u, y, y_u = triple
    if not (math.isfinite(y) and math.isfinite(y_u)):
        raise EvaluationError(f"non-finite pick-freeze pair ({y}, {y_u})")
    dy = y - m_hat
    return dy * (dy * closed_coordinate(s_hat, u) - (y_u - m_hat))


def gradient_estimate(s_hat, m_hat: float, triple: PickFreezeTriple) -> np.ndarray:
    """Plug-in stochastic gradient as a dense vector (zero outside ``U``'s subsets)."""
    s_hat = np.asarray(s_hat, dtype=float)
    c = gradient_scalar(s_hat, m_hat, triple)
    g = np.zeros_like(s_hat)
    g[submask_table(s_hat.shape[0].bit_length() - 1)[triple.u]] = c
    return g


def gradient_samples(s_hat, mean: float, masks, y, y_u) -> np.ndarray:
    """Vectorized :func:`gradient_estimate` for many triples, shape ``(n, q)``."""
    s_hat = np.asarray(s_hat, dtype=float)
    q = s_hat.shape[0]
    masks = np.asarray(masks, dtype=np.int64)
    closed = zeta_transform(s_hat)
    dy = np.asarray(y) - mean
    c = dy * (dy * closed[masks] - (np.asarray(y_u) - mean))
    below = (masks[:, None] & np.arange(q)[None, :]) == np.arange(q)[None, :]
    return c[:, None] * below


def hessian_reference(a, variance: float):
    """Hessian of the objective and the eigenvalue floor.

    ``H = Var(Y) * (M^-1)^T diag(a) M^-1`` (constant, the objective being
    quadratic) and ``rho = Var(Y) * min(a) * ((3 - sqrt 5) / 2) ** p``.
    """
    a = np.asarray(a, dtype=float)
    p = a.shape[0].bit_length() - 1
    if p > 10:
        raise CapacityError(f"dense Hessian is capped at p = 10, got p = {p}")
    minv = dense_mobius_matrix(p, inverse=True).astype(float)
    h = variance * (minv.T * a) @ minv
    rho = variance * float(a.min()) * GOLDEN_LO**p
    return h, rho


def expected_gradient(s, a, sobol_true, variance: float) -> np.ndarray:
    """Exact ``grad Phi^a(s) = H (s - S*)`` for the known-mean objective."""
    h, _ = hessian_reference(a, variance)
    return h @ (np.asarray(s, dtype=float) - np.asarray(sobol_true, dtype=float))


# ---------------------------------------------------------------------------
# iteration


def _apply_step(s: np.ndarray, sub: np.ndarray, t: float) -> np.ndarray:
    """In-place ``s * exp(-t 1{. in sub}) / Z`` for a gradient that is
    constant ``t / eta`` on ``sub`` and zero elsewhere."""
    if t == 0.0:
        return s
    if t > 0.0:
        factor = math.exp(-t)
        if factor == 0.0:
            return mirror_step(s, np.isin(np.arange(s.shape[0]), sub) * 1.0, t)
        s[sub] *= factor
    else:
        factor = math.exp(t)
        kept = s[sub]
        s *= factor
        s[sub] = kept
    z = s.sum()
    s /= z
    return s


def _iterate(state, rng, model, strategy, schedule, steps, on_step=None):
    """Advance ``state`` in place by ``steps`` iterations."""
    p = model.p
    q = 1 << p
    if state.s_hat.shape[0] != q:
        raise ValueError("state and model disagree on p")
    table = submask_table(p)
    s = state.s_hat
    num = state.cesaro_num
    m = state.m_hat
    n = state.n
    den = state.cesaro_den
    fixed_cdf = None if strategy.adaptive else np.cumsum(strategy.base)
    done = 0
    while done < steps:
        b = min(CHUNK, steps - done)
        block = rng.random((b, 2 * p + 1))
        x = model.inputs_from_uniform(block[:, :p])
        xp = model.inputs_from_uniform(block[:, p : 2 * p])
        v = block[:, 2 * p]
        try:
            ys = model.evaluate(x)
        except EvaluationError as exc:
            raise exc.located(iteration=n + (exc.row or 0) + 1) from exc
        if fixed_cdf is not None:
            us = np.minimum(np.searchsorted(fixed_cdf, v * fixed_cdf[-1], side="right"), q - 1)
            try:
                yus = model.evaluate(hybridize_rows(x, xp, us))
            except EvaluationError as exc:
                raise exc.located(iteration=n + (exc.row or 0) + 1) from exc
            us = us.tolist()
            yus = yus.tolist()
        ys = ys.tolist()
        for i in range(b):
            if fixed_cdf is None:
                cdf = np.cumsum(resolve_weights(strategy, s))
                u = _draw_subset(cdf, v[i])
                try:
                    y_u = float(model.evaluate(hybridize_rows(x[i : i + 1], xp[i : i + 1], np.array([u])))[0])
                except EvaluationError as exc:
                    raise exc.located(iteration=n + 1) from exc
            else:
                u = us[i]
                y_u = yus[i]
            y = ys[i]
            sub = table[u]
            dy = y - m
            c = dy * (dy * float(s[sub].sum()) - (y_u - m))
            m += dy / (n + 1)
            eta = schedule(n + 1)
            _apply_step(s, sub, eta * c)
            n += 1
            eta_next = schedule(n + 1)
            if eta_next:
                num += eta_next * s
                den += eta_next
            if on_step is not None:
                on_step(n, u, y, y_u)
        done += b
    state.n = n
    state.m_hat = m
    state.cesaro_den = den
    state.evals += 2 * steps
    return state


def advance(state: EstimatorState, rng, model: ModelSpec, strategy: SamplingStrategy, schedule: StepSchedule) -> EstimatorState:
    """One iteration; returns a new state and leaves ``state`` untouched."""
    return _iterate(state.copy(), rng, model, strategy, schedule, 1)


@dataclass
class Snapshot:
    n: int
    sobol: np.ndarray
    sobol_cesaro: np.ndarray | None
    m_hat: float


@dataclass
class RunReport:
    """Outcome of :func:`run`."""

    sobol_final: np.ndarray
    sobol_cesaro: np.ndarray | None
    closed: np.ndarray
    closed_cesaro: np.ndarray | None
    total: np.ndarray
    total_cesaro: np.ndarray | None
    m_hat: float
    n: int
    evals: int
    snapshots: list = field(default_factory=list)
    state: EstimatorState | None = None

    def first_order(self, cesaro: bool = False) -> np.ndarray:
        s = self.sobol_cesaro if cesaro else self.sobol_final
        p = self.total.shape[0]
        return np.array([s[1 << i] for i in range(p)])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for replicate ``r`` of a master seed."""
    return make_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),)))


def run(
    model: ModelSpec,
    strategy: SamplingStrategy | None = None,
    schedule: StepSchedule | None = None,
    horizon: int = 1000,
    seed=0,
    averaging: bool = True,
    checkpoints=(),
    state: EstimatorState | None = None,
) -> RunReport:
    """Run the estimator for ``horizon`` iterations.

    ``checkpoints`` lists iteration counts at which snapshots of the
    estimate (and of its Cesaro average) are recorded.  ``state`` resumes
    a previous run; ``seed`` may then be the saved generator.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = model.p
    strategy = strategy or SamplingStrategy.uniform(p)
    schedule = schedule or StepSchedule()
    rng = make_rng(seed)
    state = EstimatorState.initial(p) if state is None else state.copy()
    stops = sorted({int(c) for c in checkpoints if state.n < c <= horizon} | {horizon})
    snapshots = []
    for stop in stops:
        _iterate(state, rng, model, strategy, schedule, stop - state.n)
        if stop in checkpoints:
            avg = cesaro_average(state) if averaging and state.cesaro_den > 0 else None
            snapshots.append(Snapshot(state.n, state.s_hat.copy(), avg, state.m_hat))
    avg = cesaro_average(state) if averaging and state.cesaro_den > 0 else None
    closed = zeta_transform(state.s_hat)
    closed_avg = zeta_transform(avg) if avg is not None else None
    return RunReport(
        sobol_final=state.s_hat.copy(),
        sobol_cesaro=avg,
        closed=closed,
        closed_cesaro=closed_avg,
        total=total_order_indices(closed),
        total_cesaro=total_order_indices(closed_avg) if avg is not None else None,
        m_hat=state.m_hat,
        n=state.n,
        evals=state.evals,
        snapshots=snapshots,
        state=state,
    )


def check_state(state: EstimatorState, tol: float = 1e-12) -> None:
    """Raise :class:`DomainError` if the estimate left the simplex."""
    s = state.s_hat
    if s[0] != 0.0 or np.any(s < 0) or abs(s.sum() - 1.0) > tol:
        raise DomainError(f"estimate left the simplex at n = {state.n}")
