"""Cyclically regularized BFGS curvature state.

The state holds a symmetric positive definite matrix B, applies
(B^-1 + delta*I) to vectors through a cached LDL^T factorization, and
refreshes B on even iterations with a rank-two update shifted by
rho*mu_k*I:

    B+ = B - (B s)(B s)^T / (s^T B s) + y y^T / (s^T y) + rho*mu_k*I,
    y  = grad_diff + (1 - rho)*mu_k*s.

With convex per-sample losses s^T y >= (1-rho)*mu_k*||s||^2 > 0, the update
satisfies B+ s = grad_diff + mu_k*s exactly and keeps every eigenvalue of B
at or above rho*mu_k.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .linalg import SymMatrix, as_vector, ldlt_factorize, min_eigenvalue

logger = logging.getLogger(__name__)

# Curvature below EPS_SECANT * ||s||^2 triggers the skip fallback. The event
# is impossible for convex per-sample losses in exact arithmetic; it is kept
# only as a float-noise guard and logged as an anomaly.
EPS_SECANT = 1e-12

FLOOR_SLACK = 1e-10

__all__ = ["CyclicBfgsState", "UpdateReport", "FloorViolationError", "ZeroStepError"]


class FloorViolationError(ValueError):
    """Supplied initial matrix sits below the required spectral floor."""


class ZeroStepError(ValueError):
    """The update step s is exactly zero."""


@dataclass(frozen=True)
class UpdateReport:
    """Diagnostics of one even-iteration update, persisted into run traces."""

    s_dot_y: float
    secant_residual: float
    y_reg_norm: float
    skipped: bool


class CyclicBfgsState:
    """Curvature matrix, its factorization cache, and cycle bookkeeping.

    Owned by a single run; not safe for concurrent mutation.
    """

    def __init__(self, dim: int, mu0: float, rho: float, b0=None):
        if not 0.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {rho!r}")
        if mu0 <= 0.0:
            raise ValueError(f"mu0 must be positive, got {mu0!r}")
        floor = rho * mu0
        if b0 is None:
            matrix = SymMatrix(max(1.0, floor) * np.eye(dim))
        else:
            matrix = b0 if isinstance(b0, SymMatrix) else SymMatrix(b0)
            if matrix.order != dim:
                raise ValueError(f"b0 has order {matrix.order}, expected {dim}")
            lam = min_eigenvalue(matrix)
            if lam < floor - FLOOR_SLACK:
                raise FloorViolationError(
                    f"min eigenvalue {lam:.6e} of b0 is below the floor rho*mu0 = {floor:.6e}"
                )
        self._matrix = matrix
        self._factorization = None
        self.rho = float(rho)
        self.mu_floor = floor
        self.update_count = 0
        self.odd_count = 0
        self.skip_count = 0

    @property
    def matrix(self) -> SymMatrix:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.order

    def apply_direction(self, delta: float, g) -> np.ndarray:
        """B^-1 g + delta*g, factorizing lazily if the cache is stale."""
        if delta <= 0.0:
            raise ValueError(f"delta must be positive, got {delta!r}")
        g = as_vector(g, self.dim)
        if self._factorization is None:
            self._factorization = ldlt_factorize(self._matrix)
        return self._factorization.solve(g) + delta * g

    def update_even(self, s, grad_diff, mu_k: float) -> UpdateReport:
        """Rank-two refresh of B using the same-sample gradient difference.

        ``grad_diff`` must be the sampled gradient evaluated at the new
        iterate minus the same sample's gradient at the old one.
        """
        if mu_k <= 0.0:
            raise ValueError(f"mu_k must be positive, got {mu_k!r}")
        s = as_vector(s, self.dim)
        grad_diff = as_vector(grad_diff, self.dim)
        s_sq = float(s @ s)
        if s_sq == 0.0:
            raise ZeroStepError("update step s is zero")

        y = grad_diff + ((1.0 - self.rho) * mu_k) * s
        s_dot_y = float(s @ y)
        y_reg = grad_diff + mu_k * s
        y_reg_norm = math.sqrt(float(y_reg @ y_reg))
        b = self._matrix.array

        if s_dot_y <= EPS_SECANT * s_sq:
            self.skip_count += 1
            logger.warning(
                "curvature s.y = %.3e <= %.1e * ||s||^2; keeping B unchanged "
                "(anomalous for convex per-sample losses)",
                s_dot_y,
                EPS_SECANT,
            )
            r = b @ s - y_reg
            return UpdateReport(s_dot_y, math.sqrt(float(r @ r)), y_reg_norm, skipped=True)

        bs = b @ s
        # Every term below is exactly symmetric, so the trusted constructor
        # is safe; the invariant suite re-checks bitwise symmetry anyway.
        b_new = b - np.outer(bs, bs) / float(s @ bs) + np.outer(y, y) / s_dot_y
        b_new.flat[:: self.dim + 1] += self.rho * mu_k
        r = b_new @ s - y_reg
        self._matrix = SymMatrix._trusted(b_new)
        self._factorization = None
        self.mu_floor = self.rho * mu_k
        self.update_count += 1
        return UpdateReport(s_dot_y, math.sqrt(float(r @ r)), y_reg_norm, skipped=False)

    def copy_odd(self) -> "CyclicBfgsState":
        """Odd iterations keep B (and its factorization cache) untouched."""
        self.odd_count += 1
        return self
