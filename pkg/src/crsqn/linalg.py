"""Dense symmetric linear algebra for small curvature matrices.

Thin containers over float64 numpy arrays that enforce the invariants the
optimizer depends on: exact symmetry, finite entries, and positive pivots.
The inverse of a matrix is never formed; applying it means factorizing once
and solving triangular systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs

# Pivot smaller than PIVOT_REL * trace is treated as a positive-definiteness
# failure even when it is technically positive.
PIVOT_REL = 1e-13

__all__ = [
    "SymMatrix",
    "SpdFactorization",
    "NotPositiveDefiniteError",
    "DimensionMismatchError",
    "ldlt_factorize",
    "solve_spd",
    "min_eigenvalue",
    "max_eigenvalue",
]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A pivot was non-positive (or negligible relative to the trace)."""


class DimensionMismatchError(ValueError):
    """Operand shapes do not agree."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-D float64 vector, optionally of length ``dim``."""
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(f"expected length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


class SymMatrix:
    """Dense symmetric matrix validated for exact (bitwise) symmetry.

    Asymmetric input is rejected, never symmetrized silently: a non-symmetric
    matrix reaching this layer means an upstream update is broken. Use
    ``from_lower`` to build one from a lower triangle.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not symmetric")
        self._a = a

    @classmethod
    def from_lower(cls, lower: np.ndarray) -> "SymMatrix":
        """Build from a lower-triangular array (upper part ignored)."""
        lower = np.tril(np.asarray(lower, dtype=np.float64))
        return cls(lower + np.tril(lower, -1).T)

    @classmethod
    def _trusted(cls, a: np.ndarray) -> "SymMatrix":
        # Hot-path constructor: the caller owns `a` and guarantees exact
        # symmetry and finiteness (e.g. sums of outer products v v^T).
        out = cls.__new__(cls)
        out._a = a
        return out

    @property
    def order(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """The full symmetric array. Treat as read-only."""
        return self._a

    def __repr__(self) -> str:
        return f"SymMatrix(order={self.order})"


@dataclass(frozen=True)
class SpdFactorization:
    """L*D*L^T factorization of a symmetric positive definite matrix.

    ``lower`` is unit lower triangular and ``diag`` holds the strictly
    positive pivots.
    """

    lower: np.ndarray
    diag: np.ndarray

    @property
    def order(self) -> int:
        return self.diag.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Multiply the factors back together (test-path helper)."""
        return (self.lower * self.diag) @ self.lower.T

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Raw forward/back substitution; no validation, no refinement."""
        z, info = dtrtrs(self.lower, rhs, lower=1, unitdiag=1)
        if info != 0:  # pragma: no cover - unit triangular solves cannot break
            raise np.linalg.LinAlgError(f"dtrtrs failed with info={info}")
        z /= self.diag
        x, info = dtrtrs(self.lower, z, lower=1, unitdiag=1, trans=1)
        if info != 0:  # pragma: no cover
            raise np.linalg.LinAlgError(f"dtrtrs failed with info={info}")
        return x


def ldlt_factorize(m: SymMatrix) -> SpdFactorization:
    """Factor a symmetric positive definite matrix as L*D*L^T.

    Backed by a LAPACK Cholesky factorization rescaled to unit-diagonal
    form. Raises NotPositiveDefiniteError when the factorization breaks
    down or any derived pivot falls at or below PIVOT_REL times the trace;
    that signals a broken curvature-matrix invariant upstream, not a
    condition to paper over.
    """
    a = m.array
    c, info = dpotrf(a, lower=1)  # clean=1: upper triangle comes back zeroed
    if info != 0:
        raise NotPositiveDefiniteError(f"factorization broke down at column {info - 1}")
    root = np.diagonal(c)
    diag = root * root
    threshold = PIVOT_REL * float(a.trace())
    if diag.min() <= 0.0 or diag.min() < threshold:
        j = int(np.argmin(diag))
        raise NotPositiveDefiniteError(
            f"pivot {diag[j]:.3e} at column {j} (threshold {threshold:.3e})"
        )
    return SpdFactorization(lower=c / root, diag=diag)


def solve_spd(f: SpdFactorization, rhs) -> np.ndarray:
    """Solve (L*D*L^T) x = rhs.

    One refinement pass is applied when the residual (measured against the
    factors themselves) exceeds a quarter of the 1e-10*(1+||rhs||) budget,
    which keeps the contract intact up to condition numbers around 1e6.
    """
    b = as_vector(rhs, f.order)
    x = f.solve(b)
    r = b - (f.lower @ (f.diag * (f.lower.T @ x)))
    if float(np.linalg.norm(r)) > 0.25e-10 * (1.0 + float(np.linalg.norm(b))):
        x = x + f.solve(r)
    return x


def min_eigenvalue(m: SymMatrix) -> float:
    """Smallest eigenvalue of a symmetric matrix (test-path quality)."""
    return float(np.linalg.eigvalsh(m.array)[0])


def max_eigenvalue(m: SymMatrix) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(m.array)[-1])
