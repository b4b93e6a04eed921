"""scikit-learn style front end.

``ScoreTest().fit(X)`` runs the full test and stores the outcome in
trailing-underscore attributes; ``transform`` maps observations to the
projected direction values (h_gamma - Pi h_gamma)(x) under the fitted null.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bootstrap import MOutOfN, Parametric, Resampling, null_distribution, observed_statistic, decide
from .directions import build_family
from .exceptions import DomainError
from .model import GaussianCopula, GaussianLocationScale, Independence, SimpleNull, fit_null
from .score import residual_matrix, score_path
from .stats import StatisticSpec


def make_null(name, dist="uniform", params=(), rho0=0.0):
    if name == "simple":
        return SimpleNull(dist, tuple(params))
    if name == "gaussian":
        return GaussianLocationScale()
    if name == "independence":
        return Independence()
    if name == "copula":
        return GaussianCopula(rho0)
    raise DomainError(f"unknown null model {name!r}")


def make_scheme(name, B=199, m=None, replace=False):
    if name == "parametric":
        return Parametric(B)
    if name == "resampling":
        return Resampling(B)
    if name == "m-out-of-n":
        return MOutOfN(B, m, replace)
    raise DomainError(f"unknown bootstrap scheme {name!r}")


class ScoreTest(BaseEstimator, TransformerMixin):
    """Goodness-of-fit test built on a score process.

    Parameters
    ----------
    null : {"simple", "gaussian", "independence", "copula"}
    statistic : str
        One of ``ks``, ``cvm``, ``kw``, ``normal-scores``, ``mixture-sup``,
        ``sup`` or ``quad``; the last two need ``family``.
    family : str or None
        Direction family kind passed to ``build_family`` with ``family_params``.
    bootstrap : {"parametric", "resampling", "m-out-of-n"}
    B : int
        Number of bootstrap replicates.
    alpha : float
        Level of the test.
    random_state : int
        Master seed. Required: there is no time-based default.
    """

    def __init__(self, null="gaussian", statistic="cvm", family=None, family_params=None,
                 bootstrap="parametric", B=199, m=None, alpha=0.05, dist="uniform", dist_params=(),
                 rho0=0.0, random_state=None, n_jobs=None):
        self.null = null
        self.statistic = statistic
        self.family = family
        self.family_params = family_params
        self.bootstrap = bootstrap
        self.B = B
        self.m = m
        self.alpha = alpha
        self.dist = dist
        self.dist_params = dist_params
        self.rho0 = rho0
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _specs(self):
        if not isinstance(self.random_state, (int, np.integer)) or isinstance(self.random_state, bool):
            raise DomainError("random_state must be an integer seed")
        null = make_null(self.null, self.dist, self.dist_params, self.rho0)
        fam = None
        if self.family is not None:
            fam = build_family(self.family, **(self.family_params or {}))
        stat = StatisticSpec(self.statistic, family=fam)
        return null, stat, make_scheme(self.bootstrap, self.B, self.m)

    def _validate(self, X, null):
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if null.kind == "univariate" and X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        return X

    def fit(self, X, y=None):
        null, stat, scheme = self._specs()
        X = self._validate(X, null)
        T, diag = observed_statistic(X, null, stat, scheme)
        dist = null_distribution(X, null, stat, scheme, self.random_state, n_jobs=self.n_jobs)
        outcome = decide(T, dist, self.alpha)
        outcome.null = null.to_dict()
        outcome.family = stat.family.to_dict() if stat.family is not None else {"kind": "cvm-closed-form"}
        outcome.diagnostics = dict(diag)
        self.fitted_null_ = fit_null(null, X)
        self.family_ = stat.family.resolve(self.fitted_null_, X) if stat.family is not None else None
        self.score_path_ = score_path(X, self.fitted_null_, self.family_) if self.family_ is not None else None
        self.null_distribution_ = dist
        self.outcome_ = outcome
        self.statistic_ = outcome.statistic
        self.p_value_ = outcome.p_value
        self.critical_value_ = outcome.critical_value
        self.reject_ = outcome.reject
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "outcome_")
        if self.family_ is None:
            raise DomainError("the closed-form CvM statistic has no direction family to transform with")
        X = self._validate(X, self.fitted_null_.spec)
        return residual_matrix(X, self.fitted_null_, self.family_)
