"""Bootstrap null distributions and the accept/reject decision.

Three schemes:

* :class:`Parametric` -- draw synthetic samples from the fitted null and rerun
  the whole pipeline (refit included) on each.
* :class:`Resampling` -- resample the data, refit, and apply the statistic to
  the centered difference of score processes on a grid fixed by the data.
* :class:`MOutOfN` -- recompute the statistic on subsamples of size m.

Replicate ``b`` always draws from its own stream derived from the master seed
and ``b``, so results do not depend on chunking or on the number of workers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from joblib import Parallel, delayed

from .exceptions import DegenerateFitError, DomainError
from .model import NullSpec, as_sample, fit_null, sample_null
from .score import score_path
from .stats import StatisticSpec

MIN_B = 19
MAX_RETRIES = 10
CHUNK = 256


@dataclass(frozen=True)
class Parametric:
    B: int = 199
    name = "parametric"

    def to_dict(self):
        return {"name": self.name, "B": self.B}


@dataclass(frozen=True)
class Resampling:
    B: int = 199
    name = "resampling"

    def to_dict(self):
        return {"name": self.name, "B": self.B}


@dataclass(frozen=True)
class MOutOfN:
    B: int = 199
    m: Optional[int] = None
    replace: bool = False
    name = "m-out-of-n"

    def to_dict(self):
        return {"name": self.name, "B": self.B, "m": self.m, "replace": self.replace}


Scheme = Union[Parametric, Resampling, MOutOfN]


def scheme_from_dict(d: dict) -> Scheme:
    d = dict(d)
    name = d.pop("name")
    cls = {"parametric": Parametric, "resampling": Resampling, "m-out-of-n": MOutOfN}.get(name)
    if cls is None:
        raise DomainError(f"unknown bootstrap scheme {name!r}")
    return cls(**d)


def default_m(n: int) -> int:
    """Smallest integer m with m >= n^(2/3)."""
    m = max(1, int(math.floor(n ** (2.0 / 3.0))) - 1)
    while m**3 < n * n:
        m += 1
    return m


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None or isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise DomainError("a non-negative integer seed is required")
    return np.random.SeedSequence(int(seed))


def child_rng(ss: np.random.SeedSequence, *key: int) -> np.random.Generator:
    """Generator for the stream keyed by ``key`` below ``ss``."""
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(child))


@dataclass
class NullDistribution:
    replicates: np.ndarray
    scheme: dict
    seed: int
    n: int
    statistic: str = ""
    m: Optional[int] = None

    def __post_init__(self):
        self.replicates = np.sort(np.asarray(self.replicates, dtype=float))

    @property
    def B(self) -> int:
        return self.replicates.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# statistic={self.statistic} scheme={self.scheme['name']} B={self.B} "
                     f"n={self.n} m={self.m} seed={self.seed}\n")
            w = csv.writer(fh)
            w.writerow(["replicate"])
            for r in self.replicates:
                w.writerow([repr(float(r))])

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            meta = dict(kv.split("=", 1) for kv in fh.readline()[1:].split())
            rows = list(csv.reader(fh))[1:]
        m = None if meta["m"] == "None" else int(meta["m"])
        return cls(np.array([float(r[0]) for r in rows]), {"name": meta["scheme"]},
                   int(meta["seed"]), int(meta["n"]), meta["statistic"], m)


@dataclass
class TestOutcome:
    statistic: float
    p_value: float
    critical_value: float
    alpha: float
    B: int
    scheme: dict
    n: int
    seed: int
    null: dict = field(default_factory=dict)
    family: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    __test__ = False

    @property
    def reject(self) -> bool:
        return self.p_value <= self.alpha

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "critical_value": self.critical_value,
            "alpha": self.alpha,
            "B": self.B,
            "scheme": self.scheme,
            "n": self.n,
            "seed": self.seed,
            "null": self.null,
            "family": self.family,
            "diagnostics": self.diagnostics,
        }


def p_value(T: float, replicates) -> float:
    reps = np.asarray(replicates, dtype=float)
    return (1.0 + np.count_nonzero(reps >= T)) / (reps.size + 1.0)


def decide(T: float, dist: NullDistribution, alpha: float) -> TestOutcome:
    """p = (1 + #{T* >= T}) / (B + 1); reject when p <= alpha.

    The critical value is the ceil((B + 1)(1 - alpha))-th order statistic of
    the replicates (infinite when B is too small for the level).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    B = dist.B
    k = math.ceil((B + 1) * (1.0 - alpha) - 1e-9)
    crit = float(dist.replicates[k - 1]) if k <= B else math.inf
    return TestOutcome(float(T), p_value(T, dist.replicates), crit, alpha, B, dist.scheme, dist.n, dist.seed)


# --------------------------------------------------------------------------- #
# Null distributions
# --------------------------------------------------------------------------- #


def _draw_batch(draw, ss, indices, attempt=0):
    return np.stack([draw(child_rng(ss, b, attempt)) for b in indices])


def _batched_stats(draw, ss, indices, statistic, null):
    """Statistics for replicates ``indices``; degenerate rows are redrawn."""
    Xs = _draw_batch(draw, ss, indices)
    for attempt in range(1, MAX_RETRIES + 1):
        try:
            return statistic.compute_batch(Xs, null)[0]
        except DegenerateFitError as err:
            rows = getattr(err, "rows", None)
            if rows is None:
                raise
            Xs = Xs.copy()
            for r in rows:
                Xs[r] = draw(child_rng(ss, indices[r], attempt))
    try:
        return statistic.compute_batch(Xs, null)[0]
    except DegenerateFitError:
        raise DegenerateFitError(f"replicate still degenerate after {MAX_RETRIES} retries") from None


def _resampled_stats(X, ss, indices, statistic, null, fam, base):
    n = X.shape[0]
    out = np.empty(len(indices))
    for k, b in enumerate(indices):
        for attempt in range(MAX_RETRIES + 1):
            Xb = X[child_rng(ss, b, attempt).integers(0, n, n)]
            try:
                fit_b = fit_null(null, Xb)
            except DegenerateFitError:
                continue
            path = score_path(Xb, fit_b, fam).values
            out[k] = statistic.functional(path - base, fam)
            break
        else:
            raise DegenerateFitError(f"replicate still degenerate after {MAX_RETRIES} retries")
    return out


def _chunks(B):
    return [list(range(s, min(B, s + CHUNK))) for s in range(0, B, CHUNK)]


def null_distribution(X, null: NullSpec, statistic: StatisticSpec, scheme: Scheme, seed,
                      n_jobs: Optional[int] = None) -> NullDistribution:
    """Bootstrap the null law of ``statistic`` for the sample ``X``."""
    if scheme.B < MIN_B:
        raise DomainError(f"B must be at least {MIN_B}")
    statistic.check_null(null)
    X = as_sample(X, null.kind)
    n = X.shape[0]
    ss = as_seed_sequence(seed)
    fit = fit_null(null, X)
    chunks = _chunks(scheme.B)
    m = None
    if isinstance(scheme, Parametric):
        def task(idx):
            return _batched_stats(lambda rng: sample_null(fit, n, rng), ss, idx, statistic, null)
    elif isinstance(scheme, MOutOfN):
        m = scheme.m if scheme.m is not None else default_m(n)
        if not 1 <= m < n and not (scheme.replace and m >= 1):
            raise DomainError("m-out-of-n needs 1 <= m < n")

        def task(idx):
            return _batched_stats(lambda rng: X[rng.choice(n, m, replace=scheme.replace)], ss, idx, statistic, null)
    elif isinstance(scheme, Resampling):
        fam = statistic.frozen_family(X, fit)
        base = score_path(X, fit, fam).values

        def task(idx):
            return _resampled_stats(X, ss, idx, statistic, null, fam, base)
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    if n_jobs in (None, 1) or len(chunks) == 1:
        parts = [task(c) for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(task)(c) for c in chunks)
    return NullDistribution(np.concatenate(parts), scheme.to_dict(), int(ss.entropy), n, statistic.name, m)


def observed_statistic(X, null: NullSpec, statistic: StatisticSpec, scheme: Scheme):
    """The statistic matching the scheme's replicates, with diagnostics."""
    if isinstance(scheme, Resampling):
        X = as_sample(X, null.kind)
        fit = fit_null(null, X)
        fam = statistic.frozen_family(X, fit)
        T = statistic.functional(score_path(X, fit, fam).values, fam)
        return float(T), {"ties": fit.diagnostics["ties"]}
    return statistic.compute(X, null)


def run_test(X, null: NullSpec, statistic: StatisticSpec, scheme: Scheme, alpha: float, seed,
             n_jobs: Optional[int] = None) -> TestOutcome:
    """fit -> score path -> statistic -> bootstrap -> decision."""
    T, diag = observed_statistic(X, null, statistic, scheme)
    dist = null_distribution(X, null, statistic, scheme, seed, n_jobs=n_jobs)
    out = decide(T, dist, alpha)
    out.null = null.to_dict()
    out.family = statistic.family.to_dict() if statistic.family is not None else {"kind": "cvm-closed-form"}
    diag = dict(diag)
    diag["stat"] = statistic.to_dict()
    if dist.m is not None:
        diag["m"] = dist.m
    out.diagnostics = diag
    return out
