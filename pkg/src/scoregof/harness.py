"""Monte Carlo studies: size, power, drift and asymptotic equivalence.

Every study is reproducible from its configuration and master seed.  Outer
replicate ``r`` draws its data from the stream ``(r, 0)`` and runs its
bootstrap below the key ``(r, 1)``; neither depends on the alternative's
parameter, so the ``t = 0`` row of a power study repeats the size study.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from . import numerics
from .bootstrap import (
    Parametric,
    Scheme,
    as_seed_sequence,
    child_rng,
    null_distribution,
    observed_statistic,
    p_value,
    scheme_from_dict,
)
from .directions import DirectionFamily, IndicatorHalfline, family_from_dict
from .exceptions import DomainError
from .model import (
    NullSpec,
    SimpleNull,
    _copula_uniforms,
    fit_null,
    null_from_dict,
    sample_null,
    true_null,
)
from .score import residual_matrix, score_path, score_path_oracle
from .stats import StatisticSpec, statistic_from_dict

MIN_R = 100


# --------------------------------------------------------------------------- #
# Alternatives
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class GaussianMixture:
    """(1 - eps) N(0, 1) + eps N(delta, 1); ``symmetric`` splits eps between +/- delta."""

    eps: float
    delta: float = 1.0
    symmetric: bool = False
    name = "gaussian-mixture"

    def __post_init__(self):
        if not 0.0 <= self.eps <= 0.5:
            raise DomainError("eps must lie in [0, 1/2]")

    @property
    def theta(self):
        return self.eps

    def with_theta(self, theta):
        return replace(self, eps=float(theta))

    def to_dict(self):
        return {"name": self.name, "eps": self.eps, "delta": self.delta, "symmetric": self.symmetric}


@dataclass(frozen=True)
class CopulaCorrelation:
    """Gaussian copula with correlation ``rho`` and uniform marginals."""

    rho: float
    name = "copula-correlation"

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise DomainError("rho must lie strictly inside (-1, 1)")

    @property
    def theta(self):
        return self.rho

    def with_theta(self, theta):
        return replace(self, rho=float(theta))

    def to_dict(self):
        return {"name": self.name, "rho": self.rho}


@dataclass(frozen=True)
class FixedAlternative:
    """``base`` with its parameter multiplied by ``t`` (t = 1 is ``base`` itself)."""

    base: Union[GaussianMixture, CopulaCorrelation]
    t: float = 1.0
    name = "fixed"

    def resolve(self, n):
        return self.base.with_theta(self.t * self.base.theta)

    def to_dict(self):
        return {"name": self.name, "base": self.base.to_dict(), "t": self.t}


@dataclass(frozen=True)
class LocalScaling:
    """``base`` with its parameter set to t / sqrt(n)."""

    base: Union[GaussianMixture, CopulaCorrelation]
    t: float = 1.0
    name = "local"

    def resolve(self, n):
        return self.base.with_theta(self.t / math.sqrt(n))

    def to_dict(self):
        return {"name": self.name, "base": self.base.to_dict(), "t": self.t}


AlternativeSpec = Union[GaussianMixture, CopulaCorrelation, FixedAlternative, LocalScaling]


def alternative_from_dict(d: dict) -> AlternativeSpec:
    d = dict(d)
    name = d.pop("name")
    if name == "gaussian-mixture":
        return GaussianMixture(**d)
    if name == "copula-correlation":
        return CopulaCorrelation(**d)
    if name in ("fixed", "local"):
        cls = FixedAlternative if name == "fixed" else LocalScaling
        return cls(alternative_from_dict(d["base"]), d.get("t", 1.0))
    raise DomainError(f"unknown alternative {name!r}")


def at_t(alt: AlternativeSpec, t: float) -> AlternativeSpec:
    if isinstance(alt, (FixedAlternative, LocalScaling)):
        return replace(alt, t=float(t))
    return FixedAlternative(alt, float(t))


def resolve(alt: AlternativeSpec, n: int):
    return alt.resolve(n) if isinstance(alt, (FixedAlternative, LocalScaling)) else alt


def sample_alternative(alt: AlternativeSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` observations; a zero parameter reproduces the null sampler exactly."""
    a = resolve(alt, n)
    if isinstance(a, GaussianMixture):
        z = rng.standard_normal(n)
        if a.eps == 0.0:
            return z
        u = rng.random(n)
        if a.symmetric:
            shift = np.where(u < a.eps / 2, a.delta, np.where(u < a.eps, -a.delta, 0.0))
        else:
            shift = np.where(u < a.eps, a.delta, 0.0)
        return z + shift
    if isinstance(a, CopulaCorrelation):
        if a.rho == 0.0:
            return rng.random((n, 2))
        return _copula_uniforms(a.rho, n, rng)
    raise DomainError(f"unknown alternative {alt!r}")


def alternative_score(alt: AlternativeSpec):
    """The score g of the alternative's one-parameter path at the null."""
    a = alt.base if isinstance(alt, (FixedAlternative, LocalScaling)) else alt
    if isinstance(a, GaussianMixture):
        d = a.delta

        def g(x):
            up = np.exp(d * x - d * d / 2.0) - 1.0
            if not a.symmetric:
                return up
            return 0.5 * (up + np.exp(-d * x - d * d / 2.0) - 1.0)
        return g
    if isinstance(a, CopulaCorrelation):
        def g(X):
            X = np.asarray(X, dtype=float)
            return numerics.std_normal_quantile(X[..., 0]) * numerics.std_normal_quantile(X[..., 1])
        return g
    raise DomainError(f"no built-in score for {alt!r}")


# --------------------------------------------------------------------------- #
# Configuration and reports
# --------------------------------------------------------------------------- #


@dataclass
class StudyConfig:
    null: NullSpec
    statistic: StatisticSpec
    scheme: Scheme = field(default_factory=Parametric)
    n: Union[int, Sequence[int]] = 100
    R: int = 2000
    alpha: float = 0.05
    alternative: Optional[AlternativeSpec] = None
    t_grid: Sequence[float] = (0.0,)
    seed: int = 0
    band: float = 3.0
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.R < MIN_R:
            raise DomainError(f"R must be at least {MIN_R}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        self.t_grid = tuple(float(t) for t in self.t_grid)
        if 0.0 not in self.t_grid:
            raise DomainError("the t-grid must include 0")
        as_seed_sequence(self.seed)

    @property
    def ns(self):
        return (int(self.n),) if np.isscalar(self.n) else tuple(int(v) for v in self.n)

    def to_dict(self):
        return {
            "null": self.null.to_dict(),
            "statistic": self.statistic.to_dict(),
            "scheme": self.scheme.to_dict(),
            "n": list(self.ns),
            "R": self.R,
            "alpha": self.alpha,
            "alternative": None if self.alternative is None else self.alternative.to_dict(),
            "t_grid": list(self.t_grid),
            "seed": self.seed,
            "band": self.band,
        }

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        d["null"] = null_from_dict(d["null"])
        d["statistic"] = statistic_from_dict(d["statistic"])
        if "scheme" in d:
            d["scheme"] = scheme_from_dict(d["scheme"])
        if d.get("alternative") is not None:
            d["alternative"] = alternative_from_dict(d["alternative"])
        return cls(**d)


RATE_COLUMNS = ("n", "t", "stat", "rate", "se", "seed")


@dataclass
class StudyReport:
    kind: str
    columns: tuple
    rows: list
    config: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    runtime: float = 0.0

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def to_dict(self):
        return {
            "kind": self.kind,
            "config": self.config,
            "columns": list(self.columns),
            "rows": [[r[c] for c in self.columns] for r in self.rows],
            "arrays": {k: np.asarray(v).tolist() for k, v in self.arrays.items()},
        }

    @classmethod
    def from_dict(cls, d):
        cols = tuple(d["columns"])
        return cls(d["kind"], cols, [dict(zip(cols, r)) for r in d["rows"]], d["config"],
                   {k: np.asarray(v) for k, v in d["arrays"].items()})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report(report: StudyReport, path, format: str = "csv"):
    """Write ``report`` as CSV (one row per line, fixed column order) or JSON."""
    if format not in ("csv", "json"):
        raise DomainError("format must be 'csv' or 'json'")
    try:
        with open(path, "w", newline="") as fh:
            if format == "json":
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
            else:
                w = csv.writer(fh)
                w.writerow(report.columns)
                for r in report.rows:
                    w.writerow([_fmt(r[c]) for c in report.columns])
    except OSError as err:
        raise OSError(f"cannot write report to {path}: {err.strerror}") from err


def _parse_cell(s):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def read_report(path, format: str = "csv") -> StudyReport:
    try:
        with open(path) as fh:
            if format == "json":
                return StudyReport.from_dict(json.load(fh))
            rows = list(csv.reader(fh))
    except OSError as err:
        raise OSError(f"cannot read report from {path}: {err.strerror}") from err
    cols = tuple(rows[0])
    return StudyReport("csv", cols, [dict(zip(cols, map(_parse_cell, r))) for r in rows[1:]])


# --------------------------------------------------------------------------- #
# Size and power
# --------------------------------------------------------------------------- #


def _one_rep(cfg: StudyConfig, ss, r, n, draw):
    X = draw(child_rng(ss, r, 0))
    boot = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (r, 1))
    T, _ = observed_statistic(X, cfg.null, cfg.statistic, cfg.scheme)
    dist = null_distribution(X, cfg.null, cfg.statistic, cfg.scheme, boot)
    return p_value(T, dist.replicates)


def _pvalues(cfg: StudyConfig, n, draw):
    ss = as_seed_sequence(cfg.seed)
    if cfg.n_jobs in (None, 1):
        return np.array([_one_rep(cfg, ss, r, n, draw) for r in range(cfg.R)])
    return np.array(Parallel(n_jobs=cfg.n_jobs)(delayed(_one_rep)(cfg, ss, r, n, draw) for r in range(cfg.R)))


def _rate_row(cfg, n, t, p):
    rate = float(np.mean(p <= cfg.alpha))
    return {"n": n, "t": t, "stat": cfg.statistic.name, "rate": rate,
            "se": math.sqrt(rate * (1.0 - rate) / p.size), "seed": cfg.seed}


def _run(cfg: StudyConfig, kind: str, draws):
    start = time.perf_counter()
    rows, arrays = [], {}
    for n in cfg.ns:
        for t, draw in draws(n):
            p = _pvalues(cfg, n, draw)
            rows.append(_rate_row(cfg, n, t, p))
            arrays[f"p_values[n={n},t={t!r}]"] = p
    return StudyReport(kind, RATE_COLUMNS, rows, cfg.to_dict(), arrays, time.perf_counter() - start)


def run_size_study(cfg: StudyConfig) -> StudyReport:
    """Rejection rate at level alpha when the data follow the null exactly."""
    truth = true_null(cfg.null)

    def draws(n):
        yield 0.0, lambda rng: sample_null(truth, n, rng)
    return _run(cfg, "size", draws)


def run_power_study(cfg: StudyConfig) -> StudyReport:
    """Rejection rate over the t-grid; the t = 0 row is drawn from the null."""
    if cfg.alternative is None:
        raise DomainError("a power study needs an alternative")
    truth = true_null(cfg.null)

    def draws(n):
        for t in cfg.t_grid:
            if t == 0.0:
                yield t, lambda rng: sample_null(truth, n, rng)
            else:
                alt = at_t(cfg.alternative, t)
                yield t, lambda rng, alt=alt: sample_alternative(alt, n, rng)
    return _run(cfg, "power", draws)


# --------------------------------------------------------------------------- #
# Drift
# --------------------------------------------------------------------------- #


@dataclass
class DriftConfig:
    null: NullSpec
    family: DirectionFamily
    alternative: AlternativeSpec
    n: int = 400
    R: int = 2000
    t: float = 1.0
    seed: int = 0
    band: float = 3.0
    quad_points: int = 64

    def __post_init__(self):
        if self.R < MIN_R:
            raise DomainError(f"R must be at least {MIN_R}")
        as_seed_sequence(self.seed)

    def to_dict(self):
        return {"null": self.null.to_dict(), "family": self.family.to_dict(),
                "alternative": self.alternative.to_dict(), "n": self.n, "R": self.R, "t": self.t,
                "seed": self.seed, "band": self.band, "quad_points": self.quad_points}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["null"] = null_from_dict(d["null"])
        d["family"] = family_from_dict(d["family"])
        d["alternative"] = alternative_from_dict(d["alternative"])
        return cls(**d)


def predicted_drift(null: NullSpec, fam: DirectionFamily, alternative: AlternativeSpec, t: float = 1.0,
                    k: int = 64) -> np.ndarray:
    """t * E_0[(h_gamma - Pi h_gamma) g] over the family's grid, by Gauss-Hermite quadrature.

    Bivariate integrals over the unit square are taken in normal-score
    coordinates u = Phi(z), where the product rule is exact for the
    polynomial-in-z integrands of the built-in directions.
    """
    fit = true_null(null)
    g = alternative_score(alternative)
    x, w = numerics.gauss_hermite(k)
    if null.kind == "univariate":
        if isinstance(null, SimpleNull):
            raise DomainError("drift targets are defined for the Gaussian and bivariate nulls")
        r = residual_matrix(x, fit, fam)
        return t * (w * g(x)) @ r
    u = numerics.norm_cdf(x)
    keep = (u > 0.0) & (u < 1.0)  # nodes beyond |z| ~ 8.3 carry weight below 1e-15
    u, w = u[keep], w[keep]
    U = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
    W = np.outer(w, w).ravel()
    r = residual_matrix(U, fit, fam)
    return t * (W * g(U)) @ r


def drift_check(cfg: DriftConfig) -> StudyReport:
    """Empirical mean of the score process under t / sqrt(n) against its prediction."""
    start = time.perf_counter()
    if not isinstance(cfg.alternative, LocalScaling):
        alt = LocalScaling(resolve(cfg.alternative, 1) if not isinstance(cfg.alternative, FixedAlternative)
                           else cfg.alternative.base, cfg.t)
    else:
        alt = replace(cfg.alternative, t=cfg.t)
    ss = as_seed_sequence(cfg.seed)
    fam = cfg.family
    paths = []
    for r in range(cfg.R):
        X = sample_alternative(alt, cfg.n, child_rng(ss, r, 0))
        paths.append(score_path(X, fit_null(cfg.null, X), fam).values)
    paths = np.array(paths)
    mean = paths.mean(axis=0)
    se = paths.std(axis=0, ddof=1) / math.sqrt(cfg.R)
    pred = predicted_drift(cfg.null, fam, alt, cfg.t, cfg.quad_points)
    grid = np.atleast_1d(fam.grid)
    rows = []
    for j in range(mean.size):
        gamma = grid[j].item() if grid.ndim == 1 else tuple(v.item() for v in grid[j])
        rows.append({"n": cfg.n, "t": cfg.t, "gamma": gamma,
                     "predicted": float(pred[j]), "mean": float(mean[j]), "se": float(se[j]),
                     "within": bool(abs(mean[j] - pred[j]) <= cfg.band * se[j]), "seed": cfg.seed})
    cols = ("n", "t", "gamma", "predicted", "mean", "se", "within", "seed")
    return StudyReport("drift", cols, rows, cfg.to_dict(), {"paths_mean": mean}, time.perf_counter() - start)


# --------------------------------------------------------------------------- #
# Asymptotic equivalence
# --------------------------------------------------------------------------- #

EQUIVALENCE_GRID = np.round(np.linspace(-2.5, 2.5, 51), 12)


def equivalence_check(null: NullSpec, fam: Optional[DirectionFamily] = None, ns: Sequence[int] = (50, 200, 800),
                      R: int = 500, seed: int = 0) -> StudyReport:
    """Median over R null samples of sup_gamma |plug-in path - path at the true parameter|.

    Both paths use the projected form, so with nothing estimated (simple
    null) the gap is exactly zero.
    """
    if R < MIN_R:
        raise DomainError(f"R must be at least {MIN_R}")
    if null.kind != "univariate":
        raise DomainError("the equivalence check is defined for the univariate nulls")
    fam = fam if fam is not None else IndicatorHalfline(grid=EQUIVALENCE_GRID)
    start = time.perf_counter()
    truth = true_null(null)
    ss = as_seed_sequence(seed)
    rows, arrays = [], {}
    for n in ns:
        gaps = np.empty(R)
        for r in range(R):
            X = sample_null(truth, n, child_rng(ss, n, r))
            est = score_path(X, fit_null(null, X), fam, form="projected").values
            orc = score_path_oracle(X, truth, fam).values
            gaps[r] = np.max(np.abs(est - orc))
        arrays[f"gaps[n={n}]"] = gaps
        rows.append({"n": n, "median_gap": float(np.median(gaps)), "R": R, "seed": seed})
    cfg = {"null": null.to_dict(), "family": fam.to_dict(), "n": list(ns), "R": R, "seed": seed}
    return StudyReport("equivalence", ("n", "median_gap", "R", "seed"), rows, cfg, arrays,
                       time.perf_counter() - start)
