"""Power-law tuning sequences and their feasibility validators.

A schedule generates the step size gamma_k, the direction-matrix regularizer
delta_k, and the gradient regularizer mu_k:

    gamma_k = gamma0 / (k+1)^a
    delta_k = delta0 / (k+1)^b
    mu_k    = mu0 * 2^c / (k + kappa)^c,   kappa = 2 for even k, 1 for odd k

The kappa alternation makes mu constant across each (even, odd) pair and
strictly smaller on the next pair, which is what lets the curvature matrix
be refreshed only on even iterations without losing its spectral floor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "PowerLawSchedule",
    "ConditionCheck",
    "ValidationReport",
    "CapExceededError",
    "validate_almost_sure",
    "validate_mean",
    "rate_envelope",
    "bound_condition_onset",
]


class CapExceededError(RuntimeError):
    """The inequality never held within the search cap: onset is impractically late."""


@dataclass(frozen=True)
class PowerLawSchedule:
    """Tuning-sequence parameters (initial values and decay exponents).

    b may be zero (constant delta_k); the other five must be strictly
    positive.
    """

    gamma0: float
    delta0: float
    mu0: float
    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("gamma0", "delta0", "mu0", "a", "c"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be a finite positive float, got {value!r}")
        if not np.isfinite(self.b) or self.b < 0.0:
            raise ValueError(f"b must be a finite non-negative float, got {self.b!r}")

    def gamma(self, k):
        """Step size at iteration k (k may be an int or an integer array)."""
        return self.gamma0 * (k + 1.0) ** -self.a

    def delta(self, k):
        """Matrix regularizer at iteration k."""
        if self.b == 0.0:
            return self.delta0 if np.isscalar(k) else np.full(np.shape(k), self.delta0)
        return self.delta0 * (k + 1.0) ** -self.b

    def mu(self, k):
        """Gradient regularizer at iteration k (cyclic: pairs of equal values)."""
        if np.isscalar(k):
            kappa = 2.0 if k % 2 == 0 else 1.0
            return self.mu0 * 2.0**self.c / (k + kappa) ** self.c
        k = np.asarray(k)
        kappa = np.where(k % 2 == 0, 2.0, 1.0)
        return self.mu0 * 2.0**self.c * (k + kappa) ** -self.c


@dataclass(frozen=True)
class ConditionCheck:
    """One feasibility inequality with its evaluated sides."""

    name: str
    lhs: float
    rhs: float
    ok: bool


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a feasibility check: all conditions, failures separated out."""

    checks: tuple[ConditionCheck, ...]
    notes: tuple[str, ...] = ()

    @property
    def violations(self) -> tuple[ConditionCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)

    @property
    def valid(self) -> bool:
        return not self.violations


def _report(checks: list[ConditionCheck], notes: list[str]) -> ValidationReport:
    return ValidationReport(checks=tuple(checks), notes=tuple(notes))


def validate_almost_sure(s: PowerLawSchedule) -> ValidationReport:
    """Check the sufficient conditions for almost-sure convergence.

    Comparisons are exact on float64: the conditions are sharp (a+b+c = 1
    exactly is feasible) so no epsilon slack is applied.
    """
    checks = [
        ConditionCheck("a>3c+b", s.a, 3.0 * s.c + s.b, s.a > 3.0 * s.c + s.b),
        ConditionCheck("a+b+c<=1", s.a + s.b + s.c, 1.0, s.a + s.b + s.c <= 1.0),
        ConditionCheck("a-c>0.5", s.a - s.c, 0.5, s.a - s.c > 0.5),
        ConditionCheck("a+2c+b>1", s.a + 2.0 * s.c + s.b, 1.0, s.a + 2.0 * s.c + s.b > 1.0),
        ConditionCheck("delta0*mu0<=2^b", s.delta0 * s.mu0, 2.0**s.b, s.delta0 * s.mu0 <= 2.0**s.b),
        ConditionCheck(
            "gamma0*delta0*mu0<=1",
            s.gamma0 * s.delta0 * s.mu0,
            1.0,
            s.gamma0 * s.delta0 * s.mu0 <= 1.0,
        ),
    ]
    notes = []
    if not checks[-1].ok and all(c.ok for c in checks[:-1]):
        notes.append(
            "only the gamma0*delta0*mu0<=1 product fails; the mean-convergence "
            "conditions do not restrict gamma0, see the mean validator"
        )
    return _report(checks, notes)


def validate_mean(s: PowerLawSchedule) -> ValidationReport:
    """Check the sufficient conditions for convergence in mean (rate bound)."""
    checks = [
        ConditionCheck("a>3c+b", s.a, 3.0 * s.c + s.b, s.a > 3.0 * s.c + s.b),
        ConditionCheck("a+b<1", s.a + s.b, 1.0, s.a + s.b < 1.0),
        ConditionCheck("-a+4c+b>=0", -s.a + 4.0 * s.c + s.b, 0.0, -s.a + 4.0 * s.c + s.b >= 0.0),
        ConditionCheck("delta0*mu0<=2^b", s.delta0 * s.mu0, 2.0**s.b, s.delta0 * s.mu0 <= 2.0**s.b),
    ]
    return _report(checks, [])


def rate_envelope(s: PowerLawSchedule, k) -> float:
    """gamma_k / (mu_k^3 * delta_k): the shape of the expected-error bound."""
    if np.isscalar(k) and k < 0:
        raise ValueError("k must be non-negative")
    return s.gamma(k) / (s.mu(k) ** 3 * s.delta(k))


def _condition_holds(s: PowerLawSchedule, ks: np.ndarray, lipschitz: float, rho: float):
    """Vectorized evaluation of (L+mu_k)^2 gamma_k ((rho mu_{k-1})^-1 + delta_k)^2 <= delta_k mu_k."""
    gamma = s.gamma(ks)
    delta = s.delta(ks)
    mu = s.mu(ks)
    mu_prev = s.mu(ks - 1)
    lhs = (lipschitz + mu) ** 2 * gamma * (1.0 / (rho * mu_prev) + delta) ** 2
    return lhs <= delta * mu


def bound_condition_onset(
    s: PowerLawSchedule, lipschitz: float, rho: float, cap: int = 10**9
) -> int:
    """Smallest k >= 1 at which the recursive error bound becomes applicable.

    Scans in geometrically growing blocks; raises CapExceededError past
    ``cap``, which flags a schedule whose onset is impractically late.
    """
    if lipschitz <= 0.0:
        raise ValueError("lipschitz must be positive")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    start = 1
    block = 1 << 14
    while start <= cap:
        stop = min(start + block, cap + 1)
        ks = np.arange(start, stop, dtype=np.float64)
        hit = np.nonzero(_condition_holds(s, ks, lipschitz, rho))[0]
        if hit.size:
            return start + int(hit[0])
        start = stop
        block = min(block * 2, 1 << 22)
    raise CapExceededError(f"bound condition did not hold for any k <= {cap}")
