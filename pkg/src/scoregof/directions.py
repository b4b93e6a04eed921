"""Direction families h_gamma indexed by a finite grid, with per-direction weights.

Univariate families act on reference coordinates ``z`` (the raw data for a
simple null, ``(x - mu_hat) / sigma_hat`` for the Gaussian null). Bivariate
families are products ``h1(u) * h2(v)`` of univariate factors evaluated on
the raw data, the marginal cdf scale, or the normal-scores scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import numerics
from .exceptions import DomainError
from .model import FittedNull

MAX_RHO = 0.25


# --------------------------------------------------------------------------- #
# Weight schemes
# --------------------------------------------------------------------------- #


def geometric_weights(scales, rho: float) -> np.ndarray:
    """lambda_i = rho**i for a sequence of scale indices."""
    if not 0.0 < rho < MAX_RHO:
        raise DomainError(f"geometric weight ratio must satisfy 0 < rho < 1/4, got {rho}")
    return rho ** np.asarray(scales, dtype=float)


def _check_weights(weights, size):
    if weights is None:
        return np.ones(size)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != size:
        raise DomainError(f"expected {size} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DomainError("weights must be positive and finite")
    return w


def _check_grid(grid: np.ndarray):
    if grid.shape[0] == 0:
        raise DomainError("empty grid")
    flat = grid.reshape(grid.shape[0], -1)
    if np.unique(flat, axis=0).shape[0] != flat.shape[0]:
        raise DomainError("grid contains duplicate points")


# --------------------------------------------------------------------------- #
# Families
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class DirectionFamily:
    kind = "abstract"
    bivariate = False

    @property
    def size(self) -> int:
        return len(self.weights)

    def resolve(self, fit: FittedNull, X) -> "DirectionFamily":
        """A family with a concrete grid; only data-driven grids change."""
        return self

    def to_dict(self) -> dict:
        raise NotImplementedError

    def locate(self, gamma) -> int:
        grid = np.asarray(self.grid, dtype=float).reshape(self.size, -1)
        hit = np.nonzero(np.all(grid == np.asarray(gamma, dtype=float).ravel(), axis=1))[0]
        if hit.size == 0:
            raise DomainError(f"{gamma!r} is not a grid point of this {self.kind} family")
        return int(hit[0])

    def _check_reference(self, fit: FittedNull):
        if self.bivariate != (fit.kind == "bivariate"):
            raise DomainError(f"{self.kind} family does not apply to the {fit.spec.name} null")


@dataclass(frozen=True, eq=False)
class UnivariateFamily(DirectionFamily):
    """Families evaluated at reference coordinates z."""

    needs_normal = False

    def values(self, z) -> np.ndarray:
        """h_gamma(z) for every grid point: shape ``z.shape + (G,)``."""
        raise NotImplementedError

    def null_mean(self, fit: FittedNull) -> np.ndarray:
        return np.zeros(self.size)

    def gaussian_moments(self):
        """(E[h z], E[h (z^2 - 1)]) under N(0, 1), one entry per direction."""
        raise NotImplementedError

    def _check_reference(self, fit: FittedNull):
        super()._check_reference(fit)
        if self.needs_normal and not fit.reference_is_normal:
            raise DomainError(f"{self.kind} directions require a standard normal reference law")


@dataclass(frozen=True, eq=False)
class IndicatorHalfline(UnivariateFamily):
    """h_gamma(z) = 1(z <= gamma) - F(gamma).

    ``grid=None`` selects the data grid: every sample point, each with the
    closed and the open (left-limit) indicator, where the supremum over all
    half lines is attained.
    """

    grid: Optional[np.ndarray] = None
    closed: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    kind = "indicator-halfline"

    def __post_init__(self):
        if self.grid is None:
            return
        grid = np.asarray(self.grid, dtype=float).ravel()
        closed = np.ones(grid.size, bool) if self.closed is None else np.asarray(self.closed, bool).ravel()
        if closed.size != grid.size:
            raise DomainError("closed flags must match the grid")
        _check_grid(np.column_stack([grid, closed]))
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "closed", closed)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.size))

    @property
    def data_grid(self) -> bool:
        return self.grid is None

    @property
    def size(self) -> int:
        if self.grid is None:
            raise DomainError("data-grid family has no size until resolved against a sample")
        return self.grid.size

    def resolve(self, fit, X):
        if self.grid is not None:
            return self
        pts = np.unique(fit.standardize(np.asarray(X, dtype=float)))
        grid = np.repeat(pts, 2)
        closed = np.tile([False, True], pts.size)
        return IndicatorHalfline(grid, closed)

    def values(self, z):
        z = np.asarray(z, dtype=float)[..., None]
        return np.where(self.closed, z <= self.grid, z < self.grid).astype(float)

    def null_mean(self, fit):
        return np.asarray(fit.reference_cdf(self.grid), dtype=float)

    def gaussian_moments(self):
        pdf = numerics.norm_pdf(self.grid)
        return -pdf, -self.grid * pdf

    def ecdf_path(self, fit, z):
        """sqrt(n) (F_n(gamma) - F(gamma)) via sorting; ``z`` may be batched."""
        zs = np.sort(np.asarray(z, dtype=float), axis=-1)
        n = zs.shape[-1]
        flat = zs.reshape(-1, n)
        le = np.stack([np.searchsorted(row, self.grid, side="right") for row in flat])
        lt = np.stack([np.searchsorted(row, self.grid, side="left") for row in flat])
        counts = np.where(self.closed, le, lt).reshape(zs.shape[:-1] + (self.grid.size,))
        return math.sqrt(n) * (counts / n - self.null_mean(fit))

    def locate(self, gamma):
        if self.grid is None:
            return -1
        hit = np.nonzero((self.grid == float(gamma)) & self.closed)[0]
        if hit.size == 0:
            raise DomainError(f"{gamma!r} is not a grid point of this {self.kind} family")
        return int(hit[0])

    def to_dict(self):
        if self.grid is None:
            return {"kind": self.kind, "grid": "sample"}
        return {"kind": self.kind, "grid": self.grid.tolist(), "closed": self.closed.tolist(),
                "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class ExpMixture(UnivariateFamily):
    """h_lambda(z) = exp(lambda z - lambda^2 / 2) - 1 on a bounded lambda grid."""

    grid: np.ndarray = None
    weights: Optional[np.ndarray] = None
    lam_max: float = 3.0

    kind = "exp-mixture"
    needs_normal = True

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        _check_grid(grid[:, None])
        if np.any(np.abs(grid) > self.lam_max + 1e-12):
            raise DomainError(f"lambda grid exceeds the compact range |lambda| <= {self.lam_max}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.size))

    def values(self, z):
        z = np.asarray(z, dtype=float)[..., None]
        lam = self.grid
        return np.exp(lam * z - 0.5 * lam * lam) - 1.0

    def gaussian_moments(self):
        return self.grid.copy(), self.grid**2

    def to_dict(self):
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist(),
                "lam_max": self.lam_max}


@dataclass(frozen=True, eq=False)
class HermiteSet(UnivariateFamily):
    """Normalized Hermite polynomials h_j, j >= 3 (orthogonal to the null scores)."""

    grid: tuple = (3, 4)
    weights: Optional[np.ndarray] = None

    kind = "hermite-set"
    needs_normal = True

    def __post_init__(self):
        idx = np.asarray(self.grid).ravel()
        if idx.size == 0 or np.any(idx != np.round(idx)) or np.any(idx < 3) or np.any(idx > numerics.MAX_HERMITE_DEGREE):
            raise DomainError("Hermite indices must be integers in {3, ..., 20}")
        _check_grid(idx[:, None].astype(float))
        object.__setattr__(self, "grid", idx.astype(int))
        object.__setattr__(self, "weights", _check_weights(self.weights, idx.size))

    def values(self, z):
        z = np.asarray(z, dtype=float)
        return np.stack([numerics.hermite_normalized(int(j), z) for j in self.grid], axis=-1)

    def gaussian_moments(self):
        return np.zeros(self.size), np.zeros(self.size)

    def to_dict(self):
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist()}


def _haar_index(max_scale: int):
    return np.array([(i, j) for i in range(max_scale + 1) for j in range(1, 2**i + 1)], dtype=int)


@dataclass(frozen=True, eq=False)
class HaarWeighted(UnivariateFamily):
    """h_ij(z) = psi_ij(F(z)) for Haar wavelets, lowest scales first."""

    grid: np.ndarray = None
    weights: Optional[np.ndarray] = None

    kind = "haar-weighted"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=int).reshape(-1, 2)
        _check_grid(grid)
        if np.any(grid[:, 0] < 0) or np.any(grid[:, 1] < 1) or np.any(grid[:, 1] > 2 ** grid[:, 0]):
            raise DomainError("invalid Haar index")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.shape[0]))

    def values(self, z, fit: Optional[FittedNull] = None):
        t = np.asarray(z, dtype=float) if fit is None else np.asarray(fit.reference_cdf(z), dtype=float)
        out = np.empty(t.shape + (self.size,))
        for scale in np.unique(self.grid[:, 0]):
            cols = np.nonzero(self.grid[:, 0] == scale)[0]
            out[..., cols] = numerics._haar_values(int(scale), self.grid[cols, 1] - 1, t[..., None])
        return out

    def gaussian_moments(self):
        ez = np.empty(self.size)
        ez2 = np.empty(self.size)
        for g, (i, j) in enumerate(self.grid):
            a, m, b = (_safe_ppf(p) for p in numerics.haar_cell_bounds(int(i), int(j)))
            amp = 2.0 ** (i / 2.0)
            # integral of z phi over [x, y] is phi(x) - phi(y); of (z^2-1) phi is x phi(x) - y phi(y)
            ez[g] = amp * ((_phi(a) - _phi(m)) - (_phi(m) - _phi(b)))
            ez2[g] = amp * ((_xphi(a) - _xphi(m)) - (_xphi(m) - _xphi(b)))
        return ez, ez2

    def to_dict(self):
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist()}


def _safe_ppf(p):
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    return numerics.std_normal_quantile(p)


def _phi(x):
    return 0.0 if np.isinf(x) else float(numerics.norm_pdf(x))


def _xphi(x):
    return 0.0 if np.isinf(x) else float(x * numerics.norm_pdf(x))


# -- bivariate -------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class BivariateFamily(DirectionFamily):
    """Product directions h1(u) h2(v)."""

    bivariate = True

    def factors(self, fit: FittedNull, X):
        """(H1, H2), each of shape ``X.shape[:-1] + (G,)``."""
        raise NotImplementedError

    def marginal_means(self, fit: FittedNull):
        """(int h1 dF_U, int h2 dF_V) under the fit's marginals."""
        if fit.u.empirical:
            pts = np.column_stack([fit.u.atoms, fit.v.atoms])
            h1, h2 = self.factors(fit, pts)
            return h1.mean(axis=0), h2.mean(axis=0)
        return self._uniform_means()

    def _uniform_means(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class IndicatorQuadrant(BivariateFamily):
    """1(u <= g1) 1(v <= g2) on the raw scale; ``grid=None`` uses all sample pairs."""

    grid: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    kind = "indicator-quadrant"

    def __post_init__(self):
        if self.grid is None:
            return
        grid = np.asarray(self.grid, dtype=float).reshape(-1, 2)
        _check_grid(grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.shape[0]))

    @property
    def size(self):
        if self.grid is None:
            raise DomainError("data-grid family has no size until resolved against a sample")
        return self.grid.shape[0]

    def resolve(self, fit, X):
        if self.grid is not None:
            return self
        X = np.asarray(X, dtype=float)
        gu, gv = np.unique(X[:, 0]), np.unique(X[:, 1])
        grid = np.stack(np.meshgrid(gu, gv, indexing="ij"), axis=-1).reshape(-1, 2)
        return IndicatorQuadrant(grid)

    def factors(self, fit, X):
        X = np.asarray(X, dtype=float)
        return ((X[..., 0, None] <= self.grid[:, 0]).astype(float),
                (X[..., 1, None] <= self.grid[:, 1]).astype(float))

    def marginal_means(self, fit):
        return np.asarray(fit.u.cdf(self.grid[:, 0])), np.asarray(fit.v.cdf(self.grid[:, 1]))

    def to_dict(self):
        if self.grid is None:
            return {"kind": self.kind, "grid": "sample"}
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class RankIndicator(BivariateFamily):
    """1(F_U(u) <= g1) 1(F_V(v) <= g2) with g in the unit square (linear rank statistics)."""

    grid: np.ndarray = None
    weights: Optional[np.ndarray] = None

    kind = "rank-indicator"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1, 2)
        _check_grid(grid)
        if np.any(grid < 0) or np.any(grid > 1):
            raise DomainError("rank-indicator grid must lie in [0, 1]^2")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.shape[0]))

    def factors(self, fit, X):
        fu, fv = fit.pseudo_obs(X)
        return ((fu[..., None] <= self.grid[:, 0]).astype(float),
                (fv[..., None] <= self.grid[:, 1]).astype(float))

    def _uniform_means(self):
        return self.grid[:, 0].copy(), self.grid[:, 1].copy()

    def to_dict(self):
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class TensorHaarWeighted(BivariateFamily):
    """psi_{i,j1}(F_U(u)) psi_{i,j2}(F_V(v)), weighted by scale."""

    grid: np.ndarray = None
    weights: Optional[np.ndarray] = None

    kind = "tensor-haar-weighted"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=int).reshape(-1, 3)
        _check_grid(grid)
        lim = 2 ** grid[:, 0]
        if np.any(grid[:, 0] < 0) or np.any(grid[:, 1:] < 1) or np.any(grid[:, 1] > lim) or np.any(grid[:, 2] > lim):
            raise DomainError("invalid tensor Haar index")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", _check_weights(self.weights, grid.shape[0]))

    def factors(self, fit, X):
        fu, fv = fit.pseudo_obs(X)
        h1 = np.empty(np.shape(fu) + (self.size,))
        h2 = np.empty_like(h1)
        for scale in np.unique(self.grid[:, 0]):
            cols = np.nonzero(self.grid[:, 0] == scale)[0]
            h1[..., cols] = numerics._haar_values(int(scale), self.grid[cols, 1] - 1, np.asarray(fu)[..., None])
            h2[..., cols] = numerics._haar_values(int(scale), self.grid[cols, 2] - 1, np.asarray(fv)[..., None])
        return h1, h2

    def _uniform_means(self):
        return np.zeros(self.size), np.zeros(self.size)

    def to_dict(self):
        return {"kind": self.kind, "grid": self.grid.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class NormalScores(BivariateFamily):
    """The single direction Phi^-1(F_U(u)) Phi^-1(F_V(v)), ranks mapped by R / (n + 1)."""

    grid: np.ndarray = field(default_factory=lambda: np.zeros(1))
    weights: Optional[np.ndarray] = None

    kind = "normal-scores"

    def __post_init__(self):
        object.__setattr__(self, "grid", np.zeros(1))
        object.__setattr__(self, "weights", _check_weights(self.weights, 1))

    def factors(self, fit, X):
        fu, fv = fit.pseudo_obs(X, mid=True)
        return (numerics.std_normal_quantile(np.asarray(fu))[..., None],
                numerics.std_normal_quantile(np.asarray(fv))[..., None])

    def _uniform_means(self):
        return np.zeros(1), np.zeros(1)

    def locate(self, gamma):
        return 0

    def to_dict(self):
        return {"kind": self.kind}


# --------------------------------------------------------------------------- #
# Construction and evaluation
# --------------------------------------------------------------------------- #

KINDS = ("indicator-halfline", "indicator-quadrant", "exp-mixture", "hermite-set",
         "haar-weighted", "tensor-haar-weighted", "rank-indicator", "normal-scores")


def exp_mixture_grid(lam_max: float = 3.0, step: float = 0.05) -> np.ndarray:
    if not lam_max > 0 or not step > 0:
        raise DomainError("lam_max and step must be positive")
    k = int(round(lam_max / step))
    return np.arange(-k, k + 1) * step


def build_family(kind: str, **params) -> DirectionFamily:
    """Construct a direction family from a kind name and parameters.

    ``weights`` may be given explicitly for any kind; Haar families also accept
    ``rho`` for geometric per-scale weights.
    """
    weights = params.pop("weights", None)
    if kind == "indicator-halfline":
        grid = params.pop("grid", "sample")
        fam = IndicatorHalfline(None if _is_sample(grid) else grid, params.pop("closed", None), weights)
    elif kind == "indicator-quadrant":
        grid = params.pop("grid", "sample")
        fam = IndicatorQuadrant(None if _is_sample(grid) else grid, weights)
    elif kind == "exp-mixture":
        lam_max = float(params.pop("lam_max", 3.0))
        step = float(params.pop("step", 0.05))
        grid = params.pop("grid", None)
        grid = exp_mixture_grid(lam_max, step) if grid is None else grid
        fam = ExpMixture(grid, weights, lam_max)
    elif kind == "hermite-set":
        fam = HermiteSet(tuple(params.pop("indices", params.pop("grid", (3, 4)))), weights)
    elif kind == "haar-weighted":
        max_scale = int(params.pop("max_scale", 6))
        rho = params.pop("rho", 0.2)
        grid = _haar_index(max_scale)
        if weights is None:
            weights = geometric_weights(grid[:, 0], rho)
        fam = HaarWeighted(grid, weights)
    elif kind == "tensor-haar-weighted":
        max_scale = int(params.pop("max_scale", 3))
        rho = params.pop("rho", 0.2)
        grid = np.array([(i, a, b) for i in range(max_scale + 1)
                         for a in range(1, 2**i + 1) for b in range(1, 2**i + 1)], dtype=int)
        if weights is None:
            weights = geometric_weights(grid[:, 0], rho)
        fam = TensorHaarWeighted(grid, weights)
    elif kind == "rank-indicator":
        grid = params.pop("grid", None)
        if grid is None:
            m = int(params.pop("m", 10))
            if m < 2:
                raise DomainError("rank-indicator needs m >= 2")
            pts = np.arange(1, m) / m
            grid = np.stack(np.meshgrid(pts, pts, indexing="ij"), axis=-1).reshape(-1, 2)
        fam = RankIndicator(grid, weights)
    elif kind == "normal-scores":
        fam = NormalScores(weights=weights)
    else:
        raise DomainError(f"unknown family kind {kind!r}; expected one of {', '.join(KINDS)}")
    if params:
        raise DomainError(f"unused parameters for {kind}: {sorted(params)}")
    return fam


def _is_sample(grid) -> bool:
    return grid is None or (isinstance(grid, str) and grid == "sample")


def family_from_dict(d: dict) -> DirectionFamily:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "haar-weighted" and "grid" in d:
        return HaarWeighted(d["grid"], d.get("weights"))
    if kind == "tensor-haar-weighted" and "grid" in d:
        return TensorHaarWeighted(d["grid"], d.get("weights"))
    return build_family(kind, **d)


def univariate_values(fam: UnivariateFamily, fit: FittedNull, z):
    """h(z) for every direction; Haar families compose with the reference cdf."""
    if isinstance(fam, HaarWeighted):
        return fam.values(z, fit)
    return fam.values(z)


def eval_direction(fam: DirectionFamily, gamma, x, fit: FittedNull) -> float:
    """Evaluate the single direction h_gamma at one observation ``x``."""
    fam._check_reference(fit)
    x = np.asarray(x, dtype=float)
    if fam.bivariate:
        if x.shape != (2,):
            raise DomainError("bivariate directions take an observation pair")
        g = fam.locate(gamma)
        h1, h2 = fam.factors(fit, x[None, :])
        return float(h1[0, g] * h2[0, g])
    if isinstance(fam, IndicatorHalfline) and fam.data_grid:
        fam = IndicatorHalfline([float(gamma)])
    g = fam.locate(gamma)
    z = fit.standardize(x.reshape(1))
    return float(univariate_values(fam, fit, z)[0, g] - fam.null_mean(fit)[g])


def with_weights(fam: DirectionFamily, weights) -> DirectionFamily:
    return replace(fam, weights=_check_weights(weights, fam.size))
