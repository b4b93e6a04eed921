"""Special functions and order-statistics primitives.

Everything here is vectorized over numpy arrays and stateless.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special
from scipy.stats import rankdata

from .exceptions import DomainError

MAX_HERMITE_DEGREE = 20
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal(x):
    """Return ``(pdf, cdf)`` of the standard normal law at ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("std_normal requires finite input")
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    cdf = special.ndtr(x)
    if pdf.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def norm_cdf(x):
    return special.ndtr(np.asarray(x, dtype=float))


def std_normal_quantile(p):
    """Inverse of the standard normal cdf on the open unit interval."""
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("quantile requires 0 < p < 1 (infinite at the endpoints)")
    q = special.ndtri(p)
    return float(q) if q.ndim == 0 else q


def hermite_normalized(j: int, x):
    """Probabilists' Hermite polynomial He_j scaled by 1/sqrt(j!).

    The scaling makes {h_j} orthonormal in L2 of the standard normal law.
    """
    if isinstance(j, bool) or int(j) != j or j < 0 or j > MAX_HERMITE_DEGREE:
        raise DomainError(f"Hermite degree must be an integer in [0, {MAX_HERMITE_DEGREE}]")
    j = int(j)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if j == 0:
        out = prev
    else:
        cur = x.copy()
        for k in range(1, j):
            prev, cur = cur, x * cur - k * prev
        out = cur / math.sqrt(math.factorial(j))
    return float(out) if out.ndim == 0 else out


def haar_eval(scale: int, loc: int, t):
    """Haar wavelet psi_{scale,loc} on [0, 1].

    ``scale = -1`` denotes the constant head element (identically one).
    Otherwise ``1 <= loc <= 2**scale`` and the support is the dyadic cell
    [(loc-1)/2**scale, loc/2**scale], positive on its left half. Cells are
    half open on the right except the last one, which contains t = 1.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
        raise DomainError("Haar wavelets are defined on [0, 1]")
    if scale == -1:
        if loc != 1:
            raise DomainError("the constant head element has loc = 1")
        out = np.ones_like(t)
        return float(out) if out.ndim == 0 else out
    if scale < 0 or not 1 <= loc <= 2**scale:
        raise DomainError(f"invalid wavelet index ({scale}, {loc})")
    out = _haar_values(scale, np.array([loc - 1]), t[..., None])[..., 0]
    return float(out) if out.ndim == 0 else out


def _haar_values(scale: int, offsets, t):
    """Vectorized psi_{scale, offset+1}(t); broadcasting ``offsets`` against ``t``."""
    k = 2**scale
    pos = np.minimum(t * k, k - 1e-12 * k)  # t = 1 falls in the last cell
    cell = np.floor(pos)
    frac = pos - cell
    sign = np.where(frac < 0.5, 1.0, -1.0)
    return np.where(cell == offsets, sign * 2.0 ** (scale / 2.0), 0.0)


def haar_cell_bounds(scale: int, loc: int):
    """Return the (left, middle, right) breakpoints of psi_{scale,loc}."""
    k = 2.0**scale
    a = (loc - 1) / k
    return a, a + 0.5 / k, loc / k


def ecdf_eval(sample, t):
    """Right-continuous empirical cdf of ``sample`` evaluated at ``t``."""
    xs = np.sort(np.asarray(sample, dtype=float).ravel())
    if xs.size == 0:
        raise DomainError("empirical cdf of an empty sample")
    out = np.searchsorted(xs, np.asarray(t, dtype=float), side="right") / xs.size
    return float(out) if np.ndim(out) == 0 else out


def midranks(values, axis=-1):
    """Ranks with ties replaced by the average rank of their block."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("midranks of an empty sequence")
    return rankdata(values, method="average", axis=axis)


def tie_count(values) -> int:
    """Number of observations that repeat an earlier value."""
    values = np.asarray(values, dtype=float).ravel()
    return int(values.size - np.unique(values).size)


@lru_cache(maxsize=8)
def gauss_hermite(k: int = 64):
    """Nodes and weights integrating against the standard normal density."""
    nodes, weights = hermegauss(k)
    weights = weights / math.sqrt(2.0 * math.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=8)
def gauss_legendre_unit(k: int = 64):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(k)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights
