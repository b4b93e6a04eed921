"""Test statistics: functionals of a score path and their closed forms.

Every named statistic is also available in batched form (a leading axis of
independent samples), which is what the bootstrap uses.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics
from .directions import (
    DirectionFamily,
    IndicatorHalfline,
    IndicatorQuadrant,
    NormalScores,
    build_family,
    exp_mixture_grid,
    family_from_dict,
)
from .exceptions import DegenerateFitError, DomainError
from .model import (
    FittedNull,
    GaussianCopula,
    GaussianLocationScale,
    Independence,
    NullSpec,
    SimpleNull,
    as_sample,
    fit_null,
)
from .score import ScorePath, quadrant_counts, score_path

KW_MAX_N = 5000


# --------------------------------------------------------------------------- #
# Path functionals
# --------------------------------------------------------------------------- #


def _path_and_weights(path, weights):
    if isinstance(path, ScorePath):
        values = path.values
        if weights is None:
            weights = path.family.weights
    else:
        values = np.asarray(path, dtype=float)
    if weights is None:
        weights = np.ones(values.shape[-1])
    weights = np.asarray(weights, dtype=float)
    if weights.shape[-1] != values.shape[-1]:
        raise DomainError("weights and path differ in length")
    return values, weights


def stat_sup(path, weights=None):
    """max_gamma w(gamma) |Z(gamma)|, the weighted union-intersection statistic."""
    values, weights = _path_and_weights(path, weights)
    out = np.max(weights * np.abs(values), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _check_pd(m, what):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise DomainError(f"{what} must be a symmetric square matrix")
    return m


def quad_matrix(weights, sigma0) -> np.ndarray:
    """W = Lambda Sigma0^{-1} Lambda for a positive-definite Sigma0."""
    sigma0 = _check_pd(sigma0, "Sigma0")
    try:
        chol = np.linalg.cholesky(sigma0)
    except np.linalg.LinAlgError:
        raise DomainError("Sigma0 is not positive definite") from None
    inv = np.linalg.inv(chol)
    lam = np.diag(np.asarray(weights, dtype=float))
    return lam @ (inv.T @ inv) @ lam


def stat_quad(path, weights=None, sigma0=None, W=None):
    """Quadratic form of the path.

    With neither ``sigma0`` nor ``W`` this is sum_gamma lambda_gamma^2 Z(gamma)^2;
    with ``sigma0`` it is Z' Lambda Sigma0^{-1} Lambda Z; ``W`` overrides both.
    """
    values, weights = _path_and_weights(path, weights)
    if W is None and sigma0 is None:
        out = np.sum(weights**2 * values**2, axis=-1)
    else:
        if W is None:
            W = quad_matrix(weights, sigma0)
        else:
            W = _check_pd(W, "W")
            if np.linalg.eigvalsh(W).min() < -1e-10 * max(1.0, np.abs(W).max()):
                raise DomainError("W must be positive semidefinite")
        if W.shape[0] != values.shape[-1]:
            raise DomainError("W and path differ in dimension")
        out = np.einsum("...i,ij,...j->...", values, W, values)
    return float(out) if np.ndim(out) == 0 else out


def estimate_sigma0(paths) -> np.ndarray:
    """Sample covariance of bootstrap paths (rows are replicates)."""
    paths = np.asarray(paths, dtype=float)
    sigma = np.atleast_2d(np.cov(paths, rowvar=False))
    if np.linalg.eigvalsh(sigma).min() <= 0:
        raise DomainError("estimated Sigma0 is not positive definite")
    return sigma


# --------------------------------------------------------------------------- #
# Closed forms (batched internals take a leading batch axis)
# --------------------------------------------------------------------------- #


def _standardize_rows(X):
    mu = X.mean(axis=-1, keepdims=True)
    sigma = np.sqrt(np.mean((X - mu) ** 2, axis=-1, keepdims=True))
    bad = (np.ptp(X, axis=-1) == 0) | (sigma[..., 0] <= 0)
    if np.any(bad):
        err = DegenerateFitError("degenerate fit: sigma_hat = 0 for a constant sample")
        err.rows = np.nonzero(np.atleast_1d(bad))[0]
        raise err
    return (X - mu) / sigma


def _reference_u(X, null: NullSpec):
    """Sorted F_hat(X_i) per row for the univariate nulls."""
    if isinstance(null, GaussianLocationScale):
        if X.shape[-1] < 2:
            raise DegenerateFitError("Gaussian fit needs at least two observations")
        u = numerics.norm_cdf(_standardize_rows(X))
    else:
        u = null.frozen.cdf(X)
    return np.sort(u, axis=-1)


def _cvm_sorted(u):
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    return 1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2.0 * n)) ** 2, axis=-1)


def _ks_sorted(u):
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    # with ties, the closed count at a repeated point is its last index
    last = np.concatenate([u[..., 1:] != u[..., :-1], np.ones(u.shape[:-1] + (1,), bool)], axis=-1)
    first = np.concatenate([np.ones(u.shape[:-1] + (1,), bool), u[..., 1:] != u[..., :-1]], axis=-1)
    up = np.where(last, i / n - u, -np.inf)
    down = np.where(first, u - (i - 1) / n, -np.inf)
    return math.sqrt(n) * np.maximum(up.max(axis=-1), down.max(axis=-1))


def cvm_closed_form(X, fit: FittedNull) -> float:
    """Cramer-von Mises statistic n int (F_n - F_hat)^2 dF_hat."""
    X = as_sample(X, "univariate")
    if not isinstance(fit.spec, (SimpleNull, GaussianLocationScale)):
        raise DomainError("CvM needs a simple or Gaussian null")
    u = np.sort(np.asarray(fit.reference_cdf(fit.standardize(X)), dtype=float))
    return float(_cvm_sorted(u))


def ks_statistic(X, fit: FittedNull) -> float:
    """sqrt(n) sup_x |F_n(x) - F_hat(x)|."""
    X = as_sample(X, "univariate")
    u = np.sort(np.asarray(fit.reference_cdf(fit.standardize(X)), dtype=float))
    return float(_ks_sorted(u))


def _kw_batch(X):
    n = X.shape[-2]
    if n > KW_MAX_N:
        raise DomainError(f"Kiefer-Wolfowitz evaluation is capped at n = {KW_MAX_N}")
    out = np.empty(X.shape[:-2])
    flat = X.reshape(-1, n, 2)
    res = out.reshape(-1)
    for b, row in enumerate(flat):
        gu, cu_w = np.unique(row[:, 0], return_counts=True)
        gv, cv_w = np.unique(row[:, 1], return_counts=True)
        joint, cu, cv = quadrant_counts(row, gu, gv)
        d = joint / n - np.outer(cu, cv) / n**2
        res[b] = n * (cu_w / n) @ (d * d) @ (cv_w / n)
    return out


def kiefer_wolfowitz(X) -> float:
    """n int int (F_n - F_nU F_nV)^2 dF_nU dF_nV, exact against the empirical marginals."""
    X = as_sample(X, "bivariate")
    return float(_kw_batch(X[None])[0])


def _normal_scores_batch(X):
    n = X.shape[-2]
    if n < 2:
        raise DomainError("normal-scores statistic needs n >= 2")
    r = numerics.midranks(X[..., 0], axis=-1)
    s = numerics.midranks(X[..., 1], axis=-1)
    a = numerics.std_normal_quantile(r / (n + 1))
    b = numerics.std_normal_quantile(s / (n + 1))
    return np.sum(a * b, axis=-1) / math.sqrt(n)


def normal_scores_stat(X) -> float:
    """n^{-1/2} sum Phi^-1(R_i / (n+1)) Phi^-1(S_i / (n+1)) with midranks."""
    X = as_sample(X, "bivariate")
    if X.shape[0] < 2:
        raise DomainError("normal-scores statistic needs n >= 2")
    if np.ptp(X[:, 0]) == 0 or np.ptp(X[:, 1]) == 0:
        warnings.warn("a coordinate is constant; normal-scores statistic is 0", RuntimeWarning)
        return 0.0
    return float(_normal_scores_batch(X[None])[0])


def _mixture_sup_batch(X, grid):
    z = _standardize_rows(X)
    n = X.shape[-1]
    path = np.empty(X.shape[:-1] + (grid.size,))
    for k, lam in enumerate(grid):
        path[..., k] = np.sum(np.exp(lam * z - 0.5 * lam * lam) - 1.0, axis=-1)
    path = np.abs(path) / math.sqrt(n)
    arg = np.argmax(path, axis=-1)  # first index wins
    return np.take_along_axis(path, arg[..., None], axis=-1)[..., 0], grid[arg]


def mixture_sup_stat(X, lam_max: float = 3.0, step: float = 0.05, grid=None):
    """sup_lambda |n^{-1/2} sum (exp(lambda z_i - lambda^2/2) - 1)| on a compact grid.

    Returns ``(T, lambda_star)``; the maximizer indicates where a second
    mixture component might sit.
    """
    X = as_sample(X, "univariate")
    if X.shape[0] < 2:
        raise DegenerateFitError("mixture-sup needs n >= 2")
    grid = exp_mixture_grid(lam_max, step) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.abs(grid) > lam_max + 1e-12):
        raise DomainError("lambda grid exceeds lam_max")
    t, lam = _mixture_sup_batch(X[None], grid)
    return float(t[0]), float(lam[0])


# --------------------------------------------------------------------------- #
# Named statistics and the full pipeline
# --------------------------------------------------------------------------- #

NAMES = ("ks", "cvm", "kw", "normal-scores", "mixture-sup", "sup", "quad")
CVM_GRID_SIZE = 400

_NULL_SUPPORT = {
    "ks": (SimpleNull, GaussianLocationScale),
    "cvm": (SimpleNull, GaussianLocationScale),
    "kw": (Independence,),
    "normal-scores": (Independence, GaussianCopula),
    "mixture-sup": (GaussianLocationScale, SimpleNull),
}


@dataclass(frozen=True, eq=False)
class StatisticSpec:
    """A named statistic plus the direction family it is built on.

    ``sup`` and ``quad`` need an explicit ``family``; the other names imply
    theirs. ``sigma0`` or ``W`` turn ``quad`` into the full matrix form.
    """

    name: str
    family: Optional[DirectionFamily] = None
    lam_max: float = 3.0
    step: float = 0.05
    sigma0: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise DomainError(f"unknown statistic {self.name!r}; expected one of {', '.join(NAMES)}")
        if self.name in ("sup", "quad") and self.family is None:
            raise DomainError(f"statistic {self.name!r} needs a direction family")
        if self.name == "mixture-sup" and self.family is None:
            object.__setattr__(self, "family", build_family("exp-mixture", lam_max=self.lam_max, step=self.step))
        if self.name == "ks":
            object.__setattr__(self, "family", IndicatorHalfline())
        if self.name == "kw":
            object.__setattr__(self, "family", IndicatorQuadrant())
        if self.name == "normal-scores":
            object.__setattr__(self, "family", NormalScores())
        if self.sigma0 is not None:
            object.__setattr__(self, "sigma0", np.asarray(self.sigma0, dtype=float))
        if self.W is not None:
            object.__setattr__(self, "W", np.asarray(self.W, dtype=float))

    def check_null(self, null: NullSpec):
        allowed = _NULL_SUPPORT.get(self.name)
        if allowed is not None and not isinstance(null, allowed):
            raise DomainError(f"statistic {self.name!r} does not apply to the {null.name} null")
        if self.name == "mixture-sup" and isinstance(null, SimpleNull) and null.dist != "norm":
            raise DomainError("mixture-sup under a simple null needs the standard normal law")

    # -- single sample -------------------------------------------------------

    def compute(self, X, null: NullSpec):
        """Run fit -> statistic on one sample. Returns ``(T, diagnostics)``."""
        self.check_null(null)
        X = as_sample(X, null.kind)
        fit = fit_null(null, X)
        diag = {"ties": fit.diagnostics["ties"]}
        if self.name == "ks":
            return ks_statistic(X, fit), diag
        if self.name == "cvm":
            return cvm_closed_form(X, fit), diag
        if self.name == "kw":
            return kiefer_wolfowitz(X), diag
        if self.name == "normal-scores":
            return normal_scores_stat(X), diag
        if self.name == "mixture-sup":
            path = score_path(X, fit, self.family)
            t, lam = self._sup_with_arg(path.values)
            diag["lambda_star"] = lam
            return t, diag
        path = score_path(X, fit, self.family)
        return self.functional(path.values, path.family), diag

    def _sup_with_arg(self, values):
        a = np.abs(values) * self.family.weights
        k = int(np.argmax(a))
        return float(a[k]), float(self.family.grid[k])

    def functional(self, values, family: DirectionFamily):
        """Map path values (..., G) to the statistic."""
        if self.name == "normal-scores":
            return values[..., 0] if np.ndim(values) > 1 else float(values[0])
        if self.name in ("quad", "cvm", "kw"):
            return stat_quad(values, family.weights, sigma0=self.sigma0, W=self.W)
        return stat_sup(values, family.weights)

    # -- batches ---------------------------------------------------------------

    def compute_batch(self, Xs, null: NullSpec):
        """Statistics for a stack of samples; returns ``(T, extra)``.

        ``extra`` holds per-row argmaxes for mixture-sup and is None otherwise.
        Raises :class:`DegenerateFitError` with a ``rows`` attribute when some
        rows cannot be fitted.
        """
        self.check_null(null)
        Xs = np.asarray(Xs, dtype=float)
        if self.name in ("ks", "cvm"):
            u = _reference_u(Xs, null)
            return (_ks_sorted(u) if self.name == "ks" else _cvm_sorted(u)), None
        if self.name == "kw":
            return _kw_batch(Xs), None
        if self.name == "normal-scores":
            return _normal_scores_batch(Xs), None
        if self.name == "mixture-sup" and isinstance(null, GaussianLocationScale) and np.all(self.family.weights == 1):
            return _mixture_sup_batch(Xs, self.family.grid)
        out = np.empty(Xs.shape[0])
        extra = np.empty(Xs.shape[0]) if self.name == "mixture-sup" else None
        bad = []
        for b, X in enumerate(Xs):
            try:
                t, diag = self.compute(X, null)
            except DegenerateFitError:
                bad.append(b)
                continue
            out[b] = t
            if extra is not None:
                extra[b] = diag["lambda_star"]
        if bad:
            err = DegenerateFitError("degenerate fit inside a batch")
            err.rows = np.asarray(bad)
            raise err
        return out, extra

    # -- fixed-grid form for the resampling bootstrap ----------------------------

    def frozen_family(self, X, fit: FittedNull) -> DirectionFamily:
        """A family with a grid fixed by the original sample.

        The statistic evaluated as ``functional(score_path(...))`` on this family
        reproduces ``compute`` exactly for every name except ``cvm``, which is
        approximated by a midpoint rule on reference quantiles.
        """
        if self.name == "cvm":
            p = (np.arange(CVM_GRID_SIZE) + 0.5) / CVM_GRID_SIZE
            grid = numerics.std_normal_quantile(p) if isinstance(fit.spec, GaussianLocationScale) else fit.spec.frozen.ppf(p)
            return IndicatorHalfline(grid, None, np.full(CVM_GRID_SIZE, 1.0 / math.sqrt(CVM_GRID_SIZE)))
        fam = self.family.resolve(fit, X)
        if self.name == "kw":
            X = np.asarray(X, dtype=float)
            wu = fit.u.cdf(fam.grid[:, 0]) - fit.u.cdf(np.nextafter(fam.grid[:, 0], -np.inf))
            wv = fit.v.cdf(fam.grid[:, 1]) - fit.v.cdf(np.nextafter(fam.grid[:, 1], -np.inf))
            fam = IndicatorQuadrant(fam.grid, np.sqrt(wu * wv))
        return fam

    def to_dict(self):
        d = {"name": self.name}
        if self.name == "mixture-sup":
            d.update(lam_max=self.lam_max, step=self.step)
        if self.name in ("sup", "quad"):
            d["family"] = self.family.to_dict()
        if self.sigma0 is not None:
            d["sigma0"] = self.sigma0.tolist()
        if self.W is not None:
            d["W"] = self.W.tolist()
        return d


def statistic_from_dict(d: dict) -> StatisticSpec:
    d = dict(d)
    fam = d.pop("family", None)
    if isinstance(fam, dict):
        fam = family_from_dict(fam)
    return StatisticSpec(d.pop("name"), family=fam, **d)
