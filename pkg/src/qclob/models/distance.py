"""Empirical cdfs and the Cramer-von Mises / Kolmogorov-Smirnov distances.

``cvm_distance`` returns the sample-size scaled statistic

    T = n * integral (F_n(p) - F(p))^2 dF(p)

so that a sample placed exactly at the model quantiles ``(i - 1/2) / n``
scores the classical minimum ``1 / (12 n)``.  For a continuous model the
integral is evaluated exactly by the substitution ``u = F(p)``; for a
discrete model (another ECDF) the Stieltjes integral is a finite sum over
the model's atoms.
"""

from __future__ import annotations

from typing import Callable, Optional, Union

import numpy as np

from .gent import GenTParams, gent_cdf


class EmptySampleError(ValueError):
    pass


class ECDF:
    """Right-continuous empirical cdf of a (possibly weighted) sample.

    ``x`` holds the distinct support points, ``mass`` the total weight at
    each and ``p`` the cumulative probabilities.  ``n`` is the number of
    observations, independent of the weights.
    """

    def __init__(self, values, weights=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise EmptySampleError("ECDF of an empty sample")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample contains non-finite values")
        if weights is None:
            weights = np.ones_like(values)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            if weights.shape != values.shape:
                raise ValueError("weights and values differ in length")
            if np.any(weights < 0):
                raise ValueError("negative weights")
        x, inv = np.unique(values, return_inverse=True)
        mass = np.bincount(inv, weights=weights, minlength=x.size)
        total = mass.sum()
        if total <= 0:
            raise EmptySampleError("sample carries zero total weight")
        self.x = x
        self.mass = mass
        self.total = float(total)
        self.n = int(values.size)
        p = np.cumsum(mass) / total
        p[-1] = 1.0
        self.p = p

    @classmethod
    def from_histogram(cls, ticks, mass, n: Optional[int] = None) -> "ECDF":
        out = cls(ticks, mass)
        if n is not None:
            out.n = int(n)
        return out

    def __call__(self, t) -> np.ndarray:
        idx = np.searchsorted(self.x, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, self.p[np.maximum(idx - 1, 0)], 0.0)

    def left(self, t) -> np.ndarray:
        """Left limit F(t-)."""
        idx = np.searchsorted(self.x, np.asarray(t, dtype=float), side="left")
        return np.where(idx > 0, self.p[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.p, q, side="left")
        return self.x[np.clip(idx, 0, self.x.size - 1)]

    def affine(self, loc: float, scale: float) -> "ECDF":
        """ECDF of ``loc + scale * X``."""
        if scale <= 0:
            raise ValueError("scale must be > 0")
        out = ECDF.__new__(ECDF)
        out.x = loc + scale * self.x
        out.mass = self.mass
        out.total = self.total
        out.n = self.n
        out.p = self.p
        return out

    def __repr__(self):
        return f"ECDF(n={self.n}, support={self.x.size})"


Model = Union[ECDF, GenTParams, Callable]


def _as_cdf(model) -> Callable:
    if isinstance(model, GenTParams):
        return lambda t: gent_cdf(t, model)
    if callable(model):
        return model
    raise TypeError(f"not a cdf: {model!r}")


def _as_ecdf(sample) -> ECDF:
    if isinstance(sample, ECDF):
        return sample
    return ECDF(sample)


def cvm_continuous(empirical: ECDF, u: np.ndarray) -> float:
    """Scaled CvM given the model cdf ``u`` at the empirical support points.

    Between consecutive atoms the ECDF is a constant ``c_k`` and, after the
    substitution ``u = F(p)``, the integrand is ``(c_k - u)^2`` on
    ``[u_k, u_{k+1}]``.
    """
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    lo = np.concatenate(([0.0], u))
    hi = np.concatenate((u, [1.0]))
    c = np.concatenate(([0.0], empirical.p))
    h, l = hi - c, lo - c
    # (h^3 - l^3) / 3 factored so each term is visibly nonnegative
    total = np.sum((hi - lo) * (h * h + h * l + l * l)) / 3.0
    return float(empirical.n * max(total, 0.0))


# atoms closer than this (relative) are treated as one point when two step
# functions are compared, so float noise from rescaling does not split them
ATOM_RTOL = 1e-12


def _nudge(t: np.ndarray) -> np.ndarray:
    return t + ATOM_RTOL * np.maximum(1.0, np.abs(t))


def cvm_discrete(empirical: ECDF, model: ECDF) -> float:
    """Scaled CvM against a step-function model: a sum over its atoms."""
    diff = empirical(_nudge(model.x)) - model(_nudge(model.x))
    return float(empirical.n * np.sum(model.mass / model.total * diff * diff))


def cvm_distance(empirical, model: Model) -> float:
    """Cramer-von Mises distance of ``empirical`` from ``model``."""
    emp = _as_ecdf(empirical)
    if isinstance(model, ECDF):
        return cvm_discrete(emp, model)
    cdf = _as_cdf(model)
    return cvm_continuous(emp, cdf(emp.x))


def ks_distance(f1, f2, grid=None) -> float:
    """Sup-norm distance between two cdfs.

    Two ECDFs are compared on the union of their atoms.  An ECDF against a
    continuous cdf also checks left limits at the atoms, which is where the
    supremum of a step function minus a continuous function is attained.
    Two arbitrary callables are compared on ``grid``.
    """
    e1 = isinstance(f1, ECDF)
    e2 = isinstance(f2, ECDF)
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        return float(np.max(np.abs(_as_cdf(f1)(g) - _as_cdf(f2)(g))))
    if e1 and e2:
        g = _nudge(np.union1d(f1.x, f2.x))
        return float(np.max(np.abs(f1(g) - f2(g))))
    if e1 or e2:
        emp, other = (f1, f2) if e1 else (f2, f1)
        v = _as_cdf(other)(emp.x)
        return float(max(np.max(np.abs(emp.p - v)), np.max(np.abs(emp.left(emp.x) - v))))
    raise ValueError("two continuous cdfs need an explicit grid")
