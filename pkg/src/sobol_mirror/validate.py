"""Numerical self-checks run by ``sobol-mirror validate``.

Each suite returns a :class:`SuiteResult` with the measured quantity so the
CLI can print it next to the tolerance it was held to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mirror import SamplingStrategy, expected_gradient, gradient_samples, hessian_reference
from .models import hybridize_rows, make_model
from .oracle import reference
from .simplex import bregman_divergence, entropy_gradient, is_on_simplex, mirror_step
from .subsets import dense_mobius_matrix, mobius_transform, vp_spectrum, zeta_transform


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.measured.items())
        return f"[{status}] {self.name}: {detail}"


def _random_simplex(rng, n, q, interior=True):
    x = rng.dirichlet(np.ones(q), size=n)
    if interior:
        x = np.maximum(x, 1e-12)
        x /= x.sum(axis=1, keepdims=True)
    return x


def suite_inversion(p: int = 8, trials: int = 100, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    p = min(p, 8)
    q = 1 << p
    worst = 0.0
    for _ in range(trials):
        s = rng.normal(size=q)
        worst = max(worst, float(np.max(np.abs(mobius_transform(zeta_transform(s)) - s))))
    m = dense_mobius_matrix(p)
    minv = dense_mobius_matrix(p, inverse=True)
    exact = bool(np.array_equal(m @ minv, np.eye(q, dtype=np.int64)))
    return SuiteResult("inversion", worst <= 1e-12 and exact, {"p": p, "max_residual": worst, "dense_identity_exact": exact})


def suite_spectrum(p: int = 6) -> SuiteResult:
    p = min(p, 10)
    m = dense_mobius_matrix(p).astype(float)
    eig = np.sort(np.linalg.eigvalsh(m @ m.T))
    ref = vp_spectrum(p)
    dev = float(np.max(np.abs(eig - ref)))
    prod = float(np.exp(np.sum(np.log(ref))))
    ok = dev < 1e-9 and abs(prod - 1.0) < 1e-9
    return SuiteResult("spectrum", ok, {"p": p, "max_eigenvalue_deviation": dev, "product_minus_1": abs(prod - 1.0)})


def three_point_residuals(x, y, z) -> np.ndarray:
    out = []
    for a, b, c in zip(x, y, z):
        lhs = bregman_divergence(a, c)
        rhs = bregman_divergence(a, b) + bregman_divergence(b, c) - np.dot(entropy_gradient(c) - entropy_gradient(b), a - b)
        out.append(abs(lhs - rhs))
    return np.array(out)


def suite_bregman(q: int = 8, n: int = 10_000, seed: int = 1) -> SuiteResult:
    rng = np.random.default_rng(seed)
    x, y, z = (_random_simplex(rng, n, q) for _ in range(3))
    residual = float(three_point_residuals(x, y, z).max())
    gap = min(bregman_divergence(a, b) - 0.5 * np.sum((a - b) ** 2) for a, b in zip(x, y))
    # gradient in the first argument by central differences
    h = 1e-6
    fd_err = 0.0
    for a, b in zip(x[:50], y[:50]):
        grad = np.empty(q)
        for i in range(q):
            e = np.zeros(q)
            e[i] = h
            grad[i] = (bregman_divergence(a + e, b, on_simplex=False) - bregman_divergence(a - e, b, on_simplex=False)) / (2 * h)
        fd_err = max(fd_err, float(np.max(np.abs(grad - (entropy_gradient(a) - entropy_gradient(b))))))
    ok = residual < 1e-10 and gap >= 0 and fd_err < 1e-6
    return SuiteResult("bregman", ok, {"three_point_residual": residual, "min_strong_convexity_gap": float(gap), "fd_gradient_error": fd_err})


def suite_simplex(p: int = 4, n: int = 10_000, seed: int = 2) -> SuiteResult:
    rng = np.random.default_rng(seed)
    q = 1 << p
    s = np.full(q, 1.0 / (q - 1))
    s[0] = 0.0
    worst = 0.0
    off = 0
    for _ in range(n):
        g = rng.normal(size=q) * 10.0 ** rng.uniform(-3, 6)
        eta = rng.uniform(0, 1)
        s = mirror_step(s, g, eta)
        worst = max(worst, abs(s.sum() - 1.0))
        if not is_on_simplex(s):
            off += 1
        if rng.random() < 0.01 or np.count_nonzero(s) < 2:
            s = rng.dirichlet(np.ones(q))
            s[0] = 0.0
            s /= s.sum()
    return SuiteResult("simplex", off == 0, {"steps": n, "off_simplex": off, "max_sum_error": worst})


def suite_unbiasedness(n: int = 1_000_000, seed: int = 3) -> SuiteResult:
    """Mean of the stochastic gradient with the exact mean plugged in."""
    model = make_model("linear", p=3)
    table = reference(model, use_cache=False)
    p = model.p
    q = 1 << p
    a = SamplingStrategy.uniform(p).base
    rng = np.random.default_rng(seed)
    s = rng.dirichlet(np.ones(q))
    s[0] = 0.0
    s /= s.sum()
    x = model.sample(rng, n)
    xp = model.sample(rng, n)
    masks = rng.choice(q, size=n, p=a)
    y = model.evaluate(x)
    y_u = model.evaluate(hybridize_rows(x, xp, masks))
    g = gradient_samples(s, table.mean, masks, y, y_u)
    mean = g.mean(axis=0)
    se = g.std(axis=0, ddof=1) / np.sqrt(n)
    target = expected_gradient(s, a, table.sobol, table.variance)
    # coordinates with no sampling noise (the full set: Y^U = Y) must match exactly
    noisy = se > 0
    z = float(np.max(np.abs(mean - target)[noisy] / se[noisy]))
    exact_dev = float(np.max(np.abs(mean - target)[~noisy], initial=0.0))
    ok = z <= 3.0 and exact_dev <= 1e-12
    return SuiteResult("unbiasedness", ok, {"samples": n, "max_abs_z": z, "noiseless_max_dev": exact_dev})


def suite_hessian(p: int = 4, seed: int = 4) -> SuiteResult:
    worst = 0.0
    floor_ok = True
    rng = np.random.default_rng(seed)
    for pp in range(1, min(p, 4) + 1):
        q = 1 << pp
        var = 1.7
        h, rho = hessian_reference(np.full(q, 1.0 / q), var)
        m = dense_mobius_matrix(pp).astype(float)
        target = var / q * np.linalg.inv(m @ m.T)
        worst = max(worst, float(np.max(np.abs(h - target))))
        floor_ok &= bool(np.linalg.eigvalsh(h).min() >= rho - 1e-9)
        a = rng.dirichlet(np.ones(q))
        h, rho = hessian_reference(a, var)
        floor_ok &= bool(np.linalg.eigvalsh(h).min() >= rho - 1e-9)
    return SuiteResult("hessian", worst < 1e-9 and floor_ok, {"max_deviation": worst, "floor_respected": floor_ok})


SUITES = {
    "inversion": suite_inversion,
    "spectrum": suite_spectrum,
    "bregman": suite_bregman,
    "simplex": suite_simplex,
    "unbiasedness": suite_unbiasedness,
    "hessian": suite_hessian,
}


def run_suites(names=None, p: int | None = None) -> list:
    names = list(SUITES) if not names or names == ["all"] else names
    results = []
    for name in names:
        fn = SUITES[name]
        if p is not None and name in ("inversion", "spectrum", "simplex", "hessian"):
            results.append(fn(p=p))
        else:
            results.append(fn())
    return results
