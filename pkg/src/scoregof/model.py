"""Null models: fitting, sampling from the fit, and tangent-space projection.

Four null hypotheses are supported:

* :class:`SimpleNull` -- a fully specified continuous law F0.
* :class:`GaussianLocationScale` -- N(mu, sigma^2) with both unknown.
* :class:`Independence` -- a bivariate law with independent coordinates.
* :class:`GaussianCopula` -- a bivariate Gaussian copula with known
  correlation ``rho0`` and arbitrary continuous marginals.

Gaussian-model quantities are expressed in standardized coordinates
z = (x - mu) / sigma, where the null scores are ``(z, z**2 - 1)`` with Fisher
information ``diag(1, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats as _sps

from . import numerics
from .exceptions import DegenerateFitError, DomainError, IllPosedProjectionError


# --------------------------------------------------------------------------- #
# Null models
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SimpleNull:
    """Fully specified null law, named after a ``scipy.stats`` distribution."""

    dist: str = "uniform"
    params: tuple = ()

    kind = "univariate"
    name = "simple"

    def __post_init__(self):
        dist = getattr(_sps, self.dist, None)
        if not isinstance(dist, _sps.rv_continuous):
            raise DomainError(f"unknown continuous distribution {self.dist!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def frozen(self):
        return getattr(_sps, self.dist)(*self.params)

    def to_dict(self):
        return {"name": self.name, "dist": self.dist, "params": list(self.params)}


@dataclass(frozen=True)
class GaussianLocationScale:
    kind = "univariate"
    name = "gaussian"

    def to_dict(self):
        return {"name": self.name}


@dataclass(frozen=True)
class Independence:
    """H: the two coordinates are independent.

    ``synthetic_marginals`` name the continuous laws used by the parametric
    bootstrap. Rank-invariant statistics do not depend on the choice.
    """

    synthetic_marginals: tuple = ("uniform", "uniform")

    kind = "bivariate"
    name = "independence"

    def __post_init__(self):
        if len(self.synthetic_marginals) != 2:
            raise DomainError("synthetic_marginals needs two distribution names")
        for d in self.synthetic_marginals:
            if not isinstance(getattr(_sps, d, None), _sps.rv_continuous):
                raise DomainError(f"unknown continuous distribution {d!r}")
        object.__setattr__(self, "synthetic_marginals", tuple(self.synthetic_marginals))

    def to_dict(self):
        return {"name": self.name, "synthetic_marginals": list(self.synthetic_marginals)}


@dataclass(frozen=True)
class GaussianCopula:
    rho0: float = 0.0

    kind = "bivariate"
    name = "copula"

    def __post_init__(self):
        if not -1.0 < float(self.rho0) < 1.0:
            raise DomainError("rho0 must lie strictly inside (-1, 1)")
        object.__setattr__(self, "rho0", float(self.rho0))

    def to_dict(self):
        return {"name": self.name, "rho0": self.rho0}


NullSpec = Union[SimpleNull, GaussianLocationScale, Independence, GaussianCopula]


def null_from_dict(d: dict) -> NullSpec:
    d = dict(d)
    name = d.pop("name")
    if name == "simple":
        return SimpleNull(d.get("dist", "uniform"), tuple(d.get("params", ())))
    if name == "gaussian":
        return GaussianLocationScale()
    if name == "independence":
        return Independence(tuple(d.get("synthetic_marginals", ("uniform", "uniform"))))
    if name == "copula":
        return GaussianCopula(d.get("rho0", 0.0))
    raise DomainError(f"unknown null model {name!r}")


# --------------------------------------------------------------------------- #
# Samples and fits
# --------------------------------------------------------------------------- #


def as_sample(X, kind: Optional[str] = None) -> np.ndarray:
    """Validate observations: a finite 1-d array or an (n, 2) array of pairs."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim == 1:
        found = "univariate"
    elif X.ndim == 2 and X.shape[1] == 2:
        found = "bivariate"
    else:
        raise DomainError(f"expected shape (n,) or (n, 2), got {X.shape}")
    if X.shape[0] < 1:
        raise DomainError("sample is empty")
    if not np.all(np.isfinite(X)):
        raise DomainError("sample contains non-finite values")
    if kind is not None and kind != found:
        raise DomainError(f"{kind} null model given {found} data")
    return X


@dataclass(frozen=True)
class Marginal:
    """A marginal law represented by atoms and weights.

    Empirical marginals keep the sorted sample; the continuous uniform law
    (used for known-parameter oracles) is represented by Gauss-Legendre nodes.
    """

    atoms: np.ndarray
    weights: np.ndarray
    empirical: bool

    @classmethod
    def from_sample(cls, values):
        atoms = np.sort(np.asarray(values, dtype=float))
        return cls(atoms, np.full(atoms.size, 1.0 / atoms.size), True)

    @classmethod
    def uniform(cls):
        nodes, weights = numerics.gauss_legendre_unit(64)
        return cls(np.asarray(nodes), np.asarray(weights), False)

    def cdf(self, x):
        """F(x): the right-continuous ecdf, or the identity on [0, 1]."""
        x = np.asarray(x, dtype=float)
        if not self.empirical:
            return np.clip(x, 0.0, 1.0)
        return np.searchsorted(self.atoms, x, side="right") / self.atoms.size

    def mid_cdf(self, x):
        """Mid-rank scale in (0, 1): (#{<x} + #{<=x} + 1) / (2 (n + 1))."""
        x = np.asarray(x, dtype=float)
        if not self.empirical:
            return np.clip(x, 0.0, 1.0)
        lo = np.searchsorted(self.atoms, x, side="left")
        hi = np.searchsorted(self.atoms, x, side="right")
        return (lo + hi + 1) / (2.0 * (self.atoms.size + 1))


@dataclass(frozen=True)
class FittedNull:
    """The null model at an estimated (or, for oracles, known) parameter."""

    spec: NullSpec
    mu: Optional[float] = None
    sigma: Optional[float] = None
    u: Optional[Marginal] = None
    v: Optional[Marginal] = None
    n: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def kind(self):
        return self.spec.kind

    def standardize(self, x):
        """Coordinates in which the reference law is F0 or N(0, 1)."""
        x = np.asarray(x, dtype=float)
        if isinstance(self.spec, GaussianLocationScale):
            return (x - self.mu) / self.sigma
        return x

    def reference_cdf(self, z):
        if isinstance(self.spec, SimpleNull):
            return self.spec.frozen.cdf(z)
        return numerics.norm_cdf(z)

    @property
    def reference_is_normal(self) -> bool:
        if isinstance(self.spec, GaussianLocationScale):
            return True
        spec = self.spec
        return isinstance(spec, SimpleNull) and spec.dist == "norm" and spec.params in ((), (0.0,), (0.0, 1.0))

    def pseudo_obs(self, X, mid: bool = False):
        """Map pairs to the unit square through the fitted marginal cdfs."""
        X = np.asarray(X, dtype=float)
        f = "mid_cdf" if mid else "cdf"
        return getattr(self.u, f)(X[..., 0]), getattr(self.v, f)(X[..., 1])


def fit_null(spec: NullSpec, X) -> FittedNull:
    """Estimate the null parameter: Gaussian MLE or product of empirical marginals."""
    X = as_sample(X, spec.kind)
    n = X.shape[0]
    ties = numerics.tie_count(X) if X.ndim == 1 else [numerics.tie_count(X[:, 0]), numerics.tie_count(X[:, 1])]
    diag = {"ties": ties}
    if isinstance(spec, SimpleNull):
        return FittedNull(spec, n=n, diagnostics=diag)
    if isinstance(spec, GaussianLocationScale):
        if n < 2:
            raise DegenerateFitError("Gaussian fit needs at least two observations")
        mu = float(X.mean())
        sigma = float(np.sqrt(np.mean((X - mu) ** 2)))
        if not sigma > 0.0 or np.ptp(X) == 0.0:
            raise DegenerateFitError("degenerate fit: sigma_hat = 0 for a constant sample")
        return FittedNull(spec, mu=mu, sigma=sigma, n=n, diagnostics=diag)
    return FittedNull(spec, u=Marginal.from_sample(X[:, 0]), v=Marginal.from_sample(X[:, 1]), n=n, diagnostics=diag)


def true_null(spec: NullSpec, mu: float = 0.0, sigma: float = 1.0) -> FittedNull:
    """A null fit at a known parameter: the oracle used by simulations.

    Bivariate nulls get uniform marginals, which loses no generality for
    rank-based directions.
    """
    if isinstance(spec, SimpleNull):
        return FittedNull(spec)
    if isinstance(spec, GaussianLocationScale):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        return FittedNull(spec, mu=float(mu), sigma=float(sigma))
    return FittedNull(spec, u=Marginal.uniform(), v=Marginal.uniform())


# --------------------------------------------------------------------------- #
# Sampling
# --------------------------------------------------------------------------- #


def _copula_uniforms(rho: float, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, 2))
    z2 = rho * z[:, 0] + np.sqrt(1.0 - rho * rho) * z[:, 1]
    return numerics.norm_cdf(np.column_stack([z[:, 0], z2]))


def sample_null(fit: FittedNull, n: int, rng: np.random.Generator, atoms: bool = False) -> np.ndarray:
    """Draw ``n`` i.i.d. observations from the fitted null.

    For the independence null the default draws from the continuous
    ``synthetic_marginals``; ``atoms=True`` resamples the empirical marginals
    independently instead (this produces ties).
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    spec = fit.spec
    if isinstance(spec, SimpleNull):
        return spec.frozen.ppf(rng.random(n))
    if isinstance(spec, GaussianLocationScale):
        return fit.mu + fit.sigma * rng.standard_normal(n)
    if isinstance(spec, GaussianCopula):
        return _copula_uniforms(spec.rho0, n, rng)
    if atoms and fit.u is not None and fit.u.empirical:
        iu = rng.integers(0, fit.u.atoms.size, n)
        iv = rng.integers(0, fit.v.atoms.size, n)
        return np.column_stack([fit.u.atoms[iu], fit.v.atoms[iv]])
    w = rng.random((n, 2))
    du, dv = (getattr(_sps, d) for d in spec.synthetic_marginals)
    return np.column_stack([du.ppf(w[:, 0]), dv.ppf(w[:, 1])])


# --------------------------------------------------------------------------- #
# Projection
# --------------------------------------------------------------------------- #

GAUSSIAN_INFO = np.diag([1.0, 2.0])


@dataclass(frozen=True)
class ProjectionReport:
    """Projection coefficients on the null scores ``(z, z**2 - 1)``."""

    coefficients: np.ndarray
    fisher_info: np.ndarray
    mean: float


def gaussian_coefficients(ez, ez2):
    """Solve the normal equations I c = E[h * score] for the Gaussian scores.

    ``ez`` and ``ez2`` are E[h z] and E[h (z^2 - 1)] under N(0, 1); both may
    be arrays (one entry per direction).
    """
    rhs = np.stack([np.asarray(ez, dtype=float), np.asarray(ez2, dtype=float)], axis=0)
    return np.linalg.solve(GAUSSIAN_INFO, rhs.reshape(2, -1)).reshape(rhs.shape)


def gaussian_quadrature_moments(g: Callable, k: int = 64):
    """E[g], E[g z], E[g (z^2 - 1)] and the information matrix by Gauss-Hermite."""
    z, w = numerics.gauss_hermite(k)
    gz = np.asarray(g(z), dtype=float)
    scores = np.stack([z, z * z - 1.0])
    info = (scores * w) @ scores.T
    return float(w @ gz), (scores * w) @ gz, info


def project(fit: FittedNull, h: Callable):
    """Project a direction off the null tangent space.

    ``h`` acts on raw observations (a 1-d array, or an (n, 2) array of pairs).
    Returns ``(residual, report)`` where ``residual`` evaluates the centered,
    projected direction and ``report`` is a :class:`ProjectionReport` for the
    Gaussian model and ``None`` otherwise.
    """
    spec = fit.spec
    if isinstance(spec, SimpleNull):
        mean = float(spec.frozen.expect(lambda x: float(np.asarray(h(np.array([x])))[0])))

        def residual(x):
            return np.asarray(h(np.asarray(x, dtype=float)), dtype=float) - mean

        return residual, None

    if isinstance(spec, GaussianLocationScale):
        mu, sigma = fit.mu, fit.sigma

        def g(z):
            return h(mu + sigma * z)

        mean, rhs, info = gaussian_quadrature_moments(g)
        if np.linalg.cond(info) > 1e12:
            raise IllPosedProjectionError("singular Fisher information")
        c = np.linalg.solve(info, rhs)

        def residual(x):
            x = np.asarray(x, dtype=float)
            z = (x - mu) / sigma
            return np.asarray(h(x), dtype=float) - mean - c[0] * z - c[1] * (z * z - 1.0)

        return residual, ProjectionReport(c, info, mean)

    # Independence and the copula model: subtract the two marginal regressions
    # computed against the fitted marginals (finite sums for ecdfs).
    ua, uw, va, vw = fit.u.atoms, fit.u.weights, fit.v.atoms, fit.v.weights
    grid = np.stack(np.meshgrid(ua, va, indexing="ij"), axis=-1)
    total = float(uw @ np.asarray(h(grid.reshape(-1, 2))).reshape(ua.size, va.size) @ vw)

    def residual(X):
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        X = X.reshape(-1, 2)
        m = X.shape[0]
        xv = np.stack([np.repeat(X[:, 0], va.size), np.tile(va, m)], axis=-1)
        a = np.asarray(h(xv)).reshape(m, va.size) @ vw
        uy = np.stack([np.tile(ua, m), np.repeat(X[:, 1], ua.size)], axis=-1)
        b = np.asarray(h(uy)).reshape(m, ua.size) @ uw
        return (np.asarray(h(X), dtype=float) - a - b + total).reshape(shape)

    return residual, None
