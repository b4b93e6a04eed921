"""Score processes over a direction family.

Three forms are available:

``"efficient"``
    sqrt(n) (P_n - P_fit) h_gamma, valid when the fit is an efficient
    estimate (Gaussian MLE, product of empirical marginals, or a simple null).
``"projected"``
    n^{-1/2} sum_i (h_gamma - Pi h_gamma)(X_i), with the tangent-space
    projection computed at the fit.
``"oracle"``
    the projected form at a known true parameter (simulation only).

For the Gaussian MLE and the empirical-marginal fits the first two coincide
because the fitted scores sum to zero over the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directions import (
    BivariateFamily,
    DirectionFamily,
    IndicatorHalfline,
    IndicatorQuadrant,
    NormalScores,
    UnivariateFamily,
    univariate_values,
)
from .exceptions import DomainError
from .model import FittedNull, GaussianCopula, GaussianLocationScale, as_sample, gaussian_coefficients

FORMS = ("efficient", "projected", "oracle")


@dataclass(frozen=True, eq=False)
class ScorePath:
    family: DirectionFamily
    values: np.ndarray
    n: int
    form: str

    def __len__(self):
        return self.values.shape[-1]


def _check(fit: FittedNull, fam: DirectionFamily):
    fam._check_reference(fit)
    if isinstance(fit.spec, GaussianCopula) and not isinstance(fam, NormalScores):
        raise DomainError("the Gaussian copula null supports the normal-scores direction only")


def residual_matrix(X, fit: FittedNull, fam: DirectionFamily) -> np.ndarray:
    """(h_gamma - Pi h_gamma)(X_i) for every observation and direction, shape (n, G)."""
    _check(fit, fam)
    X = np.asarray(X, dtype=float)
    fam = fam.resolve(fit, X)
    if isinstance(fam, BivariateFamily):
        h1, h2 = fam.factors(fit, X)
        m1, m2 = fam.marginal_means(fit)
        return (h1 - m1) * (h2 - m2)
    z = fit.standardize(X)
    out = univariate_values(fam, fit, z) - fam.null_mean(fit)
    if isinstance(fit.spec, GaussianLocationScale):
        c = gaussian_coefficients(*fam.gaussian_moments())
        out = out - z[..., None] * c[0] - (z * z - 1.0)[..., None] * c[1]
    return out


def quadrant_counts(X, gu, gv):
    """#{i : u_i <= gu_a, v_i <= gv_b}; ``X`` may carry leading batch axes.

    Returns (joint, marginal_u, marginal_v) counts with shapes
    ``batch + (len(gu), len(gv))``, ``batch + (len(gu),)`` and ``batch + (len(gv),)``.
    """
    X = np.asarray(X, dtype=float)
    batch = X.shape[:-2]
    n = X.shape[-2]
    flat = X.reshape(-1, n, 2)
    nb = flat.shape[0]
    nu, nv = gu.size, gv.size
    iu = np.searchsorted(gu, flat[..., 0], side="left")
    iv = np.searchsorted(gv, flat[..., 1], side="left")
    cell = (np.arange(nb)[:, None] * (nu + 1) + iu) * (nv + 1) + iv
    hist = np.bincount(cell.ravel(), minlength=nb * (nu + 1) * (nv + 1)).reshape(nb, nu + 1, nv + 1)
    cum = hist.cumsum(axis=1).cumsum(axis=2)
    joint = cum[:, :nu, :nv].reshape(batch + (nu, nv))
    cu = cum[:, :nu, nv].reshape(batch + (nu,))
    cv = cum[:, nu, :nv].reshape(batch + (nv,))
    return joint, cu, cv


def _product_axes(grid):
    gu, gv = np.unique(grid[:, 0]), np.unique(grid[:, 1])
    if gu.size * gv.size != grid.shape[0]:
        return None
    mesh = np.stack(np.meshgrid(gu, gv, indexing="ij"), axis=-1).reshape(-1, 2)
    return (gu, gv) if np.array_equal(mesh, grid) else None


def score_path(X, fit: FittedNull, fam: DirectionFamily, form: str = "efficient") -> ScorePath:
    """Evaluate the score process of ``X`` over the family's grid."""
    if form not in FORMS:
        raise DomainError(f"form must be one of {FORMS}")
    X = as_sample(X, fit.kind)
    _check(fit, fam)
    n = X.shape[0]
    fam = fam.resolve(fit, X)
    if form != "efficient":
        values = residual_matrix(X, fit, fam).sum(axis=0) / math.sqrt(n)
        return ScorePath(fam, values, n, form)
    if isinstance(fam, IndicatorHalfline):
        values = fam.ecdf_path(fit, fit.standardize(X))
    elif isinstance(fam, UnivariateFamily):
        z = fit.standardize(X)
        values = math.sqrt(n) * (univariate_values(fam, fit, z).mean(axis=0) - fam.null_mean(fit))
    else:
        m1, m2 = fam.marginal_means(fit)
        axes = _product_axes(fam.grid) if isinstance(fam, IndicatorQuadrant) else None
        if axes is not None:
            joint, _, _ = quadrant_counts(X, *axes)
            values = math.sqrt(n) * (joint.ravel() / n - m1 * m2)
        else:
            h1, h2 = fam.factors(fit, X)
            values = math.sqrt(n) * ((h1 * h2).mean(axis=0) - m1 * m2)
    return ScorePath(fam, np.asarray(values, dtype=float), n, form)


def score_path_oracle(X, alpha0: FittedNull, fam: DirectionFamily) -> ScorePath:
    """Projected score process at the true parameter ``alpha0``."""
    path = score_path(X, alpha0, fam, form="projected")
    return ScorePath(path.family, path.values, path.n, "oracle")
