"""scikit-learn compatible front end for the stochastic solvers."""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .oracles import LogisticOracle
from .schedules import PowerLawSchedule
from .solvers import SolverConfig, run

__all__ = ["CRSQNClassifier"]


class CRSQNClassifier(BaseEstimator, ClassifierMixin):
    """Binary linear classifier trained by minimizing the average cross-entropy
    with a cyclic regularized stochastic quasi-Newton method.

    Parameters
    ----------
    solver : {"crsqn", "res", "sa"}
        "crsqn" decays the gradient and matrix regularizers along power-law
        schedules and refreshes its curvature matrix on even iterations;
        "res" keeps ``mu``/``delta`` fixed and refreshes every iteration;
        "sa" is plain stochastic gradient descent.
    gamma0, delta0, mu0, a, b, c
        Power-law schedule parameters (crsqn). ``gamma0`` also sets the
        1/(k+1) step size of res/sa.
    mu, delta
        Constant regularizers for res.
    rho : float
        Matrix-regularization factor in (0, 1).
    iterations : int
        Number of stochastic iterations.
    eval_every : int or None
        Full-loss evaluation cadence for ``loss_curve_`` (None picks
        iterations // 10).
    random_state : int
        Seed for the sampling stream; fits are bit-reproducible.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Learned weight vector (no intercept; add a constant column or use a
        pipeline if one is wanted).
    classes_ : ndarray of shape (2,)
    loss_curve_ : list of (iteration, average loss) pairs
    final_loss_ : float
    """

    def __init__(
        self,
        solver: str = "crsqn",
        gamma0: float = 0.1,
        delta0: float = 1.0,
        mu0: float = 1.0,
        a: float = 0.8,
        b: float = 0.0,
        c: float = 0.2,
        mu: float = 1.0,
        delta: float = 1.0,
        rho: float = 0.9,
        iterations: int = 5000,
        eval_every: int | None = None,
        safeguard_retries: int = 8,
        random_state: int = 0,
    ):
        self.solver = solver
        self.gamma0 = gamma0
        self.delta0 = delta0
        self.mu0 = mu0
        self.a = a
        self.b = b
        self.c = c
        self.mu = mu
        self.delta = delta
        self.rho = rho
        self.iterations = iterations
        self.eval_every = eval_every
        self.safeguard_retries = safeguard_retries
        self.random_state = random_state

    def _config(self) -> SolverConfig:
        eval_every = self.eval_every
        if eval_every is None:
            eval_every = max(1, self.iterations // 10)
        common = dict(
            rho=self.rho,
            iterations=self.iterations,
            seed=self.random_state,
            eval_every=eval_every,
            safeguard_retries=self.safeguard_retries,
        )
        if self.solver == "crsqn":
            schedule = PowerLawSchedule(
                gamma0=self.gamma0, delta0=self.delta0, mu0=self.mu0, a=self.a, b=self.b, c=self.c
            )
            return SolverConfig(algorithm="crsqn", schedule=schedule, **common)
        if self.solver == "res":
            return SolverConfig(
                algorithm="res", gamma0=self.gamma0, mu=self.mu, delta=self.delta, **common
            )
        if self.solver == "sa":
            return SolverConfig(algorithm="sa", gamma0=self.gamma0, **common)
        raise ValueError(f"unknown solver {self.solver!r}")

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = np.unique(y)
        if classes.shape[0] != 2:
            raise ValueError(f"expected exactly 2 classes, got {classes.shape[0]}")
        self.classes_ = classes
        oracle = LogisticOracle(X, (y == classes[1]).astype(np.float64))
        trace = run(oracle, self._config())
        self.coef_ = np.asarray(trace.final_x)
        self.n_features_in_ = X.shape[1]
        self.loss_curve_ = trace.loss_points()
        self.final_loss_ = trace.final_loss()
        self.n_iter_ = trace.records[-1].k
        self.status_ = trace.status
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores > 0.0).astype(int)]
