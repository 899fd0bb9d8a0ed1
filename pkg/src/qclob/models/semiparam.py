"""Trimmed moments, the pooled rescaling model and the curve-collapse ratio."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .distance import ECDF, cvm_distance, ks_distance

log = logging.getLogger(__name__)

DISTANCES = ("cvm", "ks")


class TrimError(ValueError):
    pass


class CollapseError(ValueError):
    pass


def _split(sample):
    """(values, weights) from an array, a (values, weights) pair or an ECDF."""
    if isinstance(sample, ECDF):
        return sample.x, sample.mass
    if isinstance(sample, tuple) and len(sample) == 2:
        v = np.asarray(sample[0], dtype=float).ravel()
        w = np.asarray(sample[1], dtype=float).ravel()
        if v.shape != w.shape:
            raise ValueError("values and weights differ in length")
        return v, w
    v = np.asarray(sample, dtype=float).ravel()
    return v, np.ones_like(v)


def trimmed_moments(sample, threshold: float = 1000.0, weights=None,
                    percentile: Optional[float] = None) -> tuple:
    """Mean and standard deviation over values with ``|v| <= threshold``.

    Weights are frequency weights, so the variance divisor is
    ``sum(w) - 1``.  With ``percentile`` set, the cut is instead placed at
    the ``100 - percentile`` weighted percentile of ``|v|``.
    """
    if weights is None:
        v, w = _split(sample)
    else:
        v = np.asarray(sample, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
    if percentile is not None:
        if not 0 <= percentile < 100:
            raise ValueError("percentile must lie in [0, 100)")
        a = np.abs(v)
        order = np.argsort(a, kind="stable")
        cum = np.cumsum(w[order])
        if cum.size == 0:
            raise TrimError("empty sample")
        k = np.searchsorted(cum, (1 - percentile / 100.0) * cum[-1], side="left")
        threshold = a[order][min(k, a.size - 1)]
    keep = np.abs(v) <= threshold
    v, w = v[keep], w[keep]
    total = w.sum()
    if v.size == 0 or total <= 1:
        raise TrimError(f"fewer than 2 values within {threshold:g}")
    mean = float(np.dot(w, v) / total)
    var = float(np.dot(w, (v - mean) ** 2) / (total - 1))
    return mean, float(np.sqrt(var))


@dataclass(frozen=True)
class SemiParamModel:
    """Pooled standardized sample with weights and the days it came from."""

    values: np.ndarray
    weights: np.ndarray
    days: tuple
    moments: dict = field(default_factory=dict)
    excluded: tuple = ()

    @property
    def ecdf(self) -> ECDF:
        return ECDF(self.values, self.weights)

    def __len__(self):
        return int(self.values.size)


def build_semiparam(days: Mapping[Hashable, object], trim: float = 1000.0,
                    percentile: Optional[float] = None) -> SemiParamModel:
    """Standardize each day by its trimmed moments and pool the results."""
    if not days:
        raise ValueError("no days given")
    vals, wts, used, moments, excluded = [], [], [], {}, []
    for label, sample in days.items():
        v, w = _split(sample)
        try:
            mu, sigma = trimmed_moments(v, trim, w, percentile)
        except TrimError as exc:
            warnings.warn(f"day {label!r} excluded: {exc}", RuntimeWarning, stacklevel=2)
            excluded.append(label)
            continue
        if not sigma > 0:
            warnings.warn(f"day {label!r} excluded: zero trimmed spread", RuntimeWarning, stacklevel=2)
            excluded.append(label)
            continue
        vals.append((v - mu) / sigma)
        wts.append(w)
        used.append(label)
        moments[label] = (mu, sigma)
    if not used:
        raise TrimError("every day failed the trimmed-moment computation")
    return SemiParamModel(np.concatenate(vals), np.concatenate(wts), tuple(used),
                          moments, tuple(excluded))


def apply_semiparam(model: SemiParamModel, mu: float, sigma: float) -> ECDF:
    """ECDF of the pooled sample mapped back through ``mu + sigma * z``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return ECDF(mu + sigma * model.values, model.weights)


def rescaled_rest_ecdf(day: Hashable, days: Mapping[Hashable, object], trim: float = 1000.0,
                       percentile: Optional[float] = None) -> ECDF:
    """Pool every day except ``day``, then rescale to ``day``'s moments."""
    if day not in days:
        raise KeyError(day)
    rest = {k: v for k, v in days.items() if k != day}
    if not rest:
        raise ValueError("need at least two days")
    v, w = _split(days[day])
    mu, sigma = trimmed_moments(v, trim, w, percentile)
    return apply_semiparam(build_semiparam(rest, trim, percentile), mu, sigma)


@dataclass(frozen=True)
class PairRatio:
    d1: Hashable
    d2: Hashable
    c1: float
    c2: float

    @property
    def ratio(self) -> float:
        return self.c1 / self.c2


@dataclass(frozen=True)
class CollapseReport:
    distance: str
    pairs: tuple
    excluded: tuple
    mean_ratio: float

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.pairs])

    def as_dict(self) -> dict:
        return {
            "distance": self.distance,
            "mean_ratio": self.mean_ratio,
            "n_pairs": len(self.pairs),
            "pairs": [
                {"d1": str(p.d1), "d2": str(p.d2), "c1": p.c1, "c2": p.c2, "ratio": p.ratio}
                for p in self.pairs
            ],
            "excluded": [{"d1": str(a), "d2": str(b), "reason": r} for a, b, r in self.excluded],
        }


def _distance(kind: str):
    if kind == "cvm":
        return cvm_distance
    if kind == "ks":
        return ks_distance
    raise ValueError(f"unknown distance {kind!r}; expected one of {DISTANCES}")


def collapse_ratio(days: Mapping[Hashable, object], distance: str = "cvm", trim: float = 1000.0,
                   percentile: Optional[float] = None) -> CollapseReport:
    """Mean over ordered day pairs of raw over rescaled distance."""
    dist = _distance(distance)
    if len(days) < 2:
        raise CollapseError("need at least two days")
    ecdfs, moments = {}, {}
    for label, sample in days.items():
        v, w = _split(sample)
        ecdfs[label] = ECDF(v, w)
        if isinstance(sample, ECDF):
            ecdfs[label].n = sample.n
        moments[label] = trimmed_moments(v, trim, w, percentile)
    pairs, excluded = [], []
    for d1 in days:
        m1, s1 = moments[d1]
        for d2 in days:
            if d1 == d2:
                continue
            m2, s2 = moments[d2]
            c1 = dist(ecdfs[d1], ecdfs[d2])
            if (m1, s1) == (m2, s2):
                moved = ecdfs[d2]
            else:
                scale = s1 / s2
                moved = ecdfs[d2].affine(m1 - m2 * scale, scale)
            c2 = dist(ecdfs[d1], moved)
            if not c2 > 0:
                excluded.append((d1, d2, "rescaled distance is zero"))
                continue
            pairs.append(PairRatio(d1, d2, c1, c2))
    if not pairs:
        raise CollapseError("every day pair was excluded")
    mean = float(np.mean([p.ratio for p in pairs]))
    return CollapseReport(distance, tuple(pairs), tuple(excluded), mean)
