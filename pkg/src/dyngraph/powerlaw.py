"""Discrete power-law (zeta) fitting by maximum likelihood."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from .errors import DegenerateInputError, InsufficientDataError

MIN_SAMPLES = 50
_MAX_EXPONENT = 20.0


class PowerLawFit(NamedTuple):
    exponent: float
    ks: float
    n: int
    xmin: int


def fit_power_law(samples, xmin: int = 1, min_samples: int = MIN_SAMPLES) -> PowerLawFit:
    """Fit ``P(x) = x**-a / zeta(a, xmin)`` to integer samples ``>= xmin``.

    Returns the maximum-likelihood exponent and the Kolmogorov-Smirnov
    distance between the empirical and fitted complementary CDFs.
    """
    x = np.asarray(samples, dtype=np.int64)
    x = x[x >= xmin]
    if xmin < 1:
        raise ValueError("xmin must be a positive integer")
    if x.size < min_samples:
        raise InsufficientDataError(f"too few samples: {x.size} < {min_samples}")
    if np.all(x == x[0]):
        raise DegenerateInputError("all samples equal; exponent diverges")
    n = x.size
    sum_log = float(np.log(x).sum())

    def nll(a):
        return a * sum_log + n * np.log(zeta(a, xmin))

    res = minimize_scalar(nll, bounds=(1.0 + 1e-9, _MAX_EXPONENT), method="bounded",
                          options={"xatol": 1e-10})
    a = float(res.x)
    if a > _MAX_EXPONENT - 1e-3:
        raise DegenerateInputError("exponent diverges")
    return PowerLawFit(a, ks_distance(x, a, xmin), n, xmin)


def ks_distance(x, exponent: float, xmin: int = 1) -> float:
    """Largest gap between empirical and fitted P(X >= x) over the observed values."""
    x = np.sort(np.asarray(x, dtype=np.int64))
    x = x[x >= xmin]
    vals, first = np.unique(x, return_index=True)
    emp = 1.0 - first / x.size
    fit = zeta(exponent, vals.astype(float)) / zeta(exponent, xmin)
    return float(np.max(np.abs(emp - fit)))
