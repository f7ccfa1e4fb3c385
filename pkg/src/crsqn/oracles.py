"""Stochastic first-order oracles over finite sums.

Two problem families: binary logistic regression (the benchmark problem) and
a least-squares quadratic whose design matrix can be made rank deficient,
giving a convex but not strongly convex objective with a known optimal value
of zero. Both expose per-sample losses/gradients so a drawn sample can be
re-evaluated at the next iterate, exact full-sum quantities, and a gradient
Lipschitz bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .linalg import SymMatrix, as_vector, ldlt_factorize, max_eigenvalue, solve_spd

__all__ = [
    "EmptyDatasetError",
    "InvalidRankError",
    "OracleEval",
    "StochasticOracle",
    "LogisticOracle",
    "QuadraticOracle",
    "RegularizedView",
    "logistic_per_sample_loss",
    "logistic_per_sample_gradient",
    "make_rank_deficient_quadratic",
    "regularized_gap_check",
    "variance_estimate",
]


class EmptyDatasetError(ValueError):
    """An oracle needs at least one sample."""


class InvalidRankError(ValueError):
    """Requested design-matrix rank is impossible."""


@dataclass(frozen=True)
class OracleEval:
    """A sampled gradient together with the index of the drawn datum."""

    gradient: np.ndarray
    sample_id: int


def _sigmoid(z: float) -> float:
    # Branch keeps exp() in the underflow-safe direction.
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logistic_per_sample_loss(x, u, v: float) -> float:
    """Cross-entropy of one sample: -v*ln(sigma(u.x)) - (1-v)*ln(1-sigma(u.x)).

    Evaluated as log1p(exp(-|z|)) plus a linear term, which stays finite for
    any finite z (the naive form overflows past |z| ~ 36).
    """
    z = float(np.dot(u, x))
    if z >= 0.0:
        return math.log1p(math.exp(-z)) + (1.0 - v) * z
    return math.log1p(math.exp(z)) - v * z


def logistic_per_sample_gradient(x, u, v: float) -> np.ndarray:
    """Gradient of the per-sample cross-entropy: (sigma(u.x) - v) * u."""
    u = np.asarray(u, dtype=np.float64)
    z = float(np.dot(u, x))
    return (_sigmoid(z) - v) * u


class StochasticOracle:
    """Finite-sum oracle contract.

    Uniform-with-replacement sampling lives here; subclasses provide the
    per-sample and full-sum evaluations. Oracles are immutable after
    construction and never hold RNG state.
    """

    dim: int
    n_samples: int

    def per_sample_loss(self, x, i: int) -> float:
        raise NotImplementedError

    def per_sample_gradient(self, x, i: int) -> np.ndarray:
        raise NotImplementedError

    def full_loss(self, x) -> float:
        raise NotImplementedError

    def full_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_bound(self) -> float:
        raise NotImplementedError

    def sample_gradient(self, x, rng: np.random.Generator) -> OracleEval:
        """Draw one sample index uniformly and return its gradient and id."""
        if self.n_samples == 0:
            raise EmptyDatasetError("oracle has no samples")
        i = int(rng.integers(self.n_samples))
        return OracleEval(gradient=self.per_sample_gradient(x, i), sample_id=i)


class LogisticOracle(StochasticOracle):
    """Average cross-entropy of a linear classifier over (features, labels)."""

    def __init__(self, features, labels):
        u = np.ascontiguousarray(features, dtype=np.float64)
        v = np.asarray(labels, dtype=np.float64).ravel()
        if u.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {u.shape}")
        if u.shape[0] == 0:
            raise EmptyDatasetError("no samples")
        if v.shape[0] != u.shape[0]:
            raise ValueError("features and labels disagree on sample count")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(u)):
            raise ValueError("features have non-finite entries")
        self._u = u
        self._v = v
        self.n_samples, self.dim = u.shape
        # Hessian of the average loss is bounded by U^T U / (4N).
        self._lipschitz = float(np.sum(u * u)) / (4.0 * self.n_samples)

    def per_sample_loss(self, x, i: int) -> float:
        return logistic_per_sample_loss(x, self._u[i], float(self._v[i]))

    def per_sample_gradient(self, x, i: int) -> np.ndarray:
        u = self._u[i]
        return (_sigmoid(float(u @ x)) - float(self._v[i])) * u

    def full_loss(self, x) -> float:
        z = self._u @ x
        return float(np.mean(np.logaddexp(0.0, z) - self._v * z))

    def full_gradient(self, x) -> np.ndarray:
        z = self._u @ x
        return self._u.T @ (expit(z) - self._v) / self.n_samples

    def lipschitz_bound(self) -> float:
        return self._lipschitz


class QuadraticOracle(StochasticOracle):
    """f(x) = ||Ax - b||^2 / (2N), one sample per row of A.

    When the optimal value is not supplied it is computed by least squares;
    for the seeded rank-deficient construction it is exactly zero with a
    known minimizer.
    """

    def __init__(self, a_matrix, targets, f_star: float | None = None, minimizer=None):
        a = np.ascontiguousarray(a_matrix, dtype=np.float64)
        b = np.asarray(targets, dtype=np.float64).ravel()
        if a.ndim != 2:
            raise ValueError(f"design matrix must be 2-D, got shape {a.shape}")
        if a.shape[0] == 0:
            raise EmptyDatasetError("no samples")
        if b.shape[0] != a.shape[0]:
            raise ValueError("design matrix and targets disagree on sample count")
        self._a = a
        self._b = b
        self.n_samples, self.dim = a.shape
        self._hessian = a.T @ a / self.n_samples
        self._normal_rhs = a.T @ b / self.n_samples
        self._lipschitz = max_eigenvalue(SymMatrix(np.tril(self._hessian) + np.tril(self._hessian, -1).T))
        if minimizer is None:
            minimizer = np.linalg.lstsq(a, b, rcond=None)[0]
        self.minimizer = np.asarray(minimizer, dtype=np.float64)
        if f_star is None:
            f_star = self.full_loss(self.minimizer)
        self.f_star = float(f_star)

    def per_sample_loss(self, x, i: int) -> float:
        r = float(self._a[i] @ x) - self._b[i]
        return 0.5 * r * r

    def per_sample_gradient(self, x, i: int) -> np.ndarray:
        row = self._a[i]
        return (float(row @ x) - self._b[i]) * row

    def full_loss(self, x) -> float:
        r = self._a @ x - self._b
        return float(r @ r) / (2.0 * self.n_samples)

    def full_gradient(self, x) -> np.ndarray:
        return self._a.T @ (self._a @ x - self._b) / self.n_samples

    def lipschitz_bound(self) -> float:
        return self._lipschitz

    def hessian(self) -> np.ndarray:
        """A^T A / N (constant Hessian of the full loss)."""
        return self._hessian


def make_rank_deficient_quadratic(
    dim: int, rank: int, n_samples: int = 200, seed: int = 0
) -> QuadraticOracle:
    """Seeded least-squares instance with a rank-deficient design matrix.

    A is built from seeded random orthogonal factors with its nonzero
    spectrum drawn log-uniformly in [0.2, 1], then rescaled so the gradient
    Lipschitz bound is exactly 1; keeping the nonzero curvature well
    conditioned makes the decay behaviour predictable for tests.
    b = A x_hat, so the optimal value is 0 with x_hat a known minimizer.
    Convex but not strongly convex whenever rank < dim.
    """
    if not 1 <= rank < dim:
        raise InvalidRankError(f"need 1 <= rank < dim, got rank={rank}, dim={dim}")
    if n_samples < rank:
        raise InvalidRankError(f"need n_samples >= rank, got {n_samples} < {rank}")
    rng = np.random.default_rng(seed)
    left, _ = np.linalg.qr(rng.standard_normal((n_samples, rank)))
    right, _ = np.linalg.qr(rng.standard_normal((dim, rank)))
    spectrum = np.exp(rng.uniform(math.log(0.2), 0.0, size=rank))
    a = (left * np.sqrt(spectrum * n_samples)) @ right.T
    a /= math.sqrt(float(np.linalg.eigvalsh(a.T @ a / n_samples)[-1]))
    x_hat = rng.standard_normal(dim)
    return QuadraticOracle(a, a @ x_hat, f_star=0.0, minimizer=x_hat)


class RegularizedView(StochasticOracle):
    """A base oracle with (mu/2)*||x||^2 added to its objective."""

    def __init__(self, base: StochasticOracle, mu: float):
        if mu <= 0.0:
            raise ValueError("mu must be positive")
        self.base = base
        self.mu = float(mu)
        self.dim = base.dim
        self.n_samples = base.n_samples

    def per_sample_loss(self, x, i: int) -> float:
        x = np.asarray(x)
        return self.base.per_sample_loss(x, i) + 0.5 * self.mu * float(x @ x)

    def per_sample_gradient(self, x, i: int) -> np.ndarray:
        return self.base.per_sample_gradient(x, i) + self.mu * np.asarray(x)

    def full_loss(self, x) -> float:
        x = np.asarray(x)
        return self.base.full_loss(x) + 0.5 * self.mu * float(x @ x)

    def full_gradient(self, x) -> np.ndarray:
        return self.base.full_gradient(x) + self.mu * np.asarray(x)

    def lipschitz_bound(self) -> float:
        return self.base.lipschitz_bound() + self.mu


def regularized_gap_check(oracle: QuadraticOracle, mu: float, x) -> tuple[float, float, float]:
    """Strong-convexity sandwich of the regularized quadratic at x.

    Returns (2*mu*gap, ||grad||^2, 2*(L+mu)*gap) where gap is the regularized
    suboptimality at x; the regularized minimizer is obtained in closed form
    by an SPD solve of (H + mu I) x = A^T b / N. The chain lhs <= mid <= rhs
    must hold for any x up to float noise.
    """
    x = as_vector(x, oracle.dim)
    view = RegularizedView(oracle, mu)
    h = oracle.hessian().copy()
    h[np.diag_indices_from(h)] += mu
    x_star = solve_spd(ldlt_factorize(SymMatrix(np.tril(h) + np.tril(h, -1).T)), oracle._normal_rhs)
    gap = view.full_loss(x) - view.full_loss(x_star)
    grad = view.full_gradient(x)
    lhs = 2.0 * mu * gap
    mid = float(grad @ grad)
    rhs = 2.0 * (oracle.lipschitz_bound() + mu) * gap
    slack = 1e-9 * (1.0 + max(abs(lhs), abs(mid), abs(rhs)))
    if lhs > mid + slack or mid > rhs + slack:
        raise ArithmeticError(
            f"regularized-gap chain violated: lhs={lhs!r}, mid={mid!r}, rhs={rhs!r}"
        )
    return lhs, mid, rhs


def variance_estimate(oracle: StochasticOracle, x) -> float:
    """Empirical variance of the sampled gradient at x (exhaustive over the sum)."""
    mean = oracle.full_gradient(x)
    total = 0.0
    for i in range(oracle.n_samples):
        d = oracle.per_sample_gradient(x, i) - mean
        total += float(d @ d)
    return total / oracle.n_samples
