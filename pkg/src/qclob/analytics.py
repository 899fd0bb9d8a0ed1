"""Descriptive statistics of a replayed session.

Everything here is a pure function of a :class:`~qclob.ingest.Session` (or
of pieces of one) and returns plain values or small frozen records.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .coordinates import Frame
from .ingest import MarketOrderRecord, QuoteState, Session
from .models.distance import ECDF
from .models.semiparam import rescaled_rest_ecdf, trimmed_moments

FLOWS = ("limits", "cancels", "depth")


# -- aggregate activity ---------------------------------------------------


@dataclass(frozen=True)
class FlowStats:
    count: int
    total_size: int
    mean_size: Optional[float]
    modal_size: Optional[int]
    mean_interarrival_s: Optional[float]


@dataclass(frozen=True)
class ActivitySummary:
    limits: FlowStats
    cancels: FlowStats
    market: FlowStats
    pct_multi_price: Optional[float]
    pct_market_of_arrivals: Optional[float]
    mean_resting_size: Optional[float]
    mean_best_depth: Optional[float]
    empty: bool

    def as_dict(self) -> dict:
        return asdict(self)


def flow_stats(times_ms: Sequence[int], sizes: Sequence[int]) -> FlowStats:
    sizes = list(sizes)
    if not sizes:
        return FlowStats(0, 0, None, None, None)
    total = int(sum(sizes))
    counts = Counter(sizes)
    top = max(counts.values())
    modal = min(s for s, c in counts.items() if c == top)
    gap = None
    if len(times_ms) > 1:
        gap = (times_ms[-1] - times_ms[0]) / (len(times_ms) - 1) / 1000.0
    return FlowStats(len(sizes), total, total / len(sizes), modal, gap)


def activity_summary(session: Session) -> ActivitySummary:
    """Totals, mean/modal sizes and inter-arrival times per flow kind."""
    lim = flow_stats([r.time_ms for r in session.arrivals], [r.size for r in session.arrivals])
    can = flow_stats([r.time_ms for r in session.cancellations], [r.size for r in session.cancellations])
    mkt = flow_stats([r.time_ms for r in session.market_orders], [r.size for r in session.market_orders])
    n_mkt = len(session.market_orders)
    multi = 100.0 * sum(r.multi_price for r in session.market_orders) / n_mkt if n_mkt else None
    arriving = lim.total_size + mkt.total_size
    pct_mkt = 100.0 * mkt.total_size / arriving if arriving else None
    ns = session.n_samples
    return ActivitySummary(
        lim, can, mkt, multi, pct_mkt,
        session.total_resting_sum / ns if ns else None,
        session.best_depth_sum / ns if ns else None,
        session.empty,
    )


# -- spread ---------------------------------------------------------------


@dataclass(frozen=True)
class SpreadStats:
    min: Optional[int]
    max: Optional[int]
    median: Optional[int]
    mean: Optional[float]
    frac_negative: float
    n_negative_episodes: int
    mean_negative_duration_s: Optional[float]
    mean_crossed_volume: Optional[float]
    observed_s: float

    def as_dict(self) -> dict:
        return asdict(self)


def spread_pieces(quotes: Sequence[QuoteState], start_ms: int, end_ms: int) -> list:
    """(t0, t1, spread, crossed) for each constant piece of the quote timeline.

    A state recorded at ``t`` holds until the next state; the last one holds
    until ``end_ms``.  Pieces with an empty side carry ``spread=None``.
    """
    out = []
    for i, q in enumerate(quotes):
        t0 = max(q.time_ms, start_ms)
        t1 = quotes[i + 1].time_ms if i + 1 < len(quotes) else end_ms
        t1 = min(t1, end_ms)
        if t1 > t0:
            out.append((t0, t1, q.spread, q.crossed))
    return out


def spread_stats(quotes: Sequence[QuoteState], start_ms: int, end_ms: int) -> SpreadStats:
    """Calendar-time weighted statistics of s(t), integrated exactly."""
    pieces = spread_pieces(quotes, start_ms, end_ms)
    vals, dts = [], []
    episodes = []  # (duration_ms, crossed volume at start)
    current = None
    for t0, t1, s, crossed in pieces:
        if s is None:
            if current is not None:
                episodes.append(current)
                current = None
            continue
        vals.append(s)
        dts.append(t1 - t0)
        if s < 0:
            if current is None:
                current = [0, crossed]
            current[0] += t1 - t0
        elif current is not None:
            episodes.append(current)
            current = None
    if current is not None:
        episodes.append(current)
    if not vals:
        return SpreadStats(None, None, None, None, 0.0, 0, None, None, 0.0)
    v = np.asarray(vals, dtype=np.int64)
    w = np.asarray(dts, dtype=np.int64)
    total = int(w.sum())
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    median = int(v[order][np.searchsorted(cum, total / 2.0, side="left")])
    neg = int(w[v < 0].sum())
    return SpreadStats(
        int(v.min()), int(v.max()), median, float(np.dot(v, w) / total),
        neg / total, len(episodes),
        float(np.mean([e[0] for e in episodes]) / 1000.0) if episodes else None,
        float(np.mean([e[1] for e in episodes])) if episodes else None,
        total / 1000.0,
    )


# -- market orders --------------------------------------------------------


def queue_consumption(size: int, depth: int) -> Optional[float]:
    """|size| over the pre-arrival queue depth; ``None`` for an empty queue."""
    if depth <= 0:
        return None
    return abs(size) / depth


def queue_consumptions(orders: Sequence[MarketOrderRecord]) -> np.ndarray:
    h = [queue_consumption(o.size, o.queue_depth) for o in orders]
    return np.array([x for x in h if x is not None], dtype=float)


@dataclass(frozen=True)
class DecileRow:
    decile: int
    count: int
    mean_queue: float
    mean_size: float


def size_vs_queue_deciles(orders: Sequence[MarketOrderRecord]) -> list:
    """Mean order size per queue-length decile (stable ordering on ties)."""
    if len(orders) < 10:
        raise ValueError(f"need at least 10 market orders, got {len(orders)}")
    q = np.array([o.queue_depth for o in orders], dtype=float)
    s = np.array([abs(o.size) for o in orders], dtype=float)
    idx = np.argsort(q, kind="stable")
    rows = []
    for k, part in enumerate(np.array_split(idx, 10), start=1):
        rows.append(DecileRow(k, int(part.size), float(q[part].mean()), float(s[part].mean())))
    return rows


def size_ecdf(sizes: Sequence[int]) -> ECDF:
    return ECDF(np.asarray(sizes, dtype=float))


# -- relative-price distributions ----------------------------------------


@dataclass(frozen=True)
class RelativeDistribution:
    frame: Frame
    flow: str
    day: str
    ticks: np.ndarray
    mass: np.ndarray
    n: int

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def empty(self) -> bool:
        return self.ticks.size == 0 or self.total <= 0

    @property
    def density(self) -> np.ndarray:
        return self.mass / self.total

    def ecdf(self) -> ECDF:
        return ECDF.from_histogram(self.ticks, self.mass, n=max(self.n, 1))

    def survivor(self) -> np.ndarray:
        return 1.0 - self.ecdf().p

    def trimmed_moments(self, threshold: float = 1000.0, percentile: Optional[float] = None):
        return trimmed_moments(self.ticks, threshold, self.mass, percentile)

    def as_dict(self) -> dict:
        return {int(t): float(m) for t, m in zip(self.ticks, self.mass)}


def _histogram(pairs) -> tuple:
    acc: Counter = Counter()
    n = 0
    for tick, weight in pairs:
        acc[tick] += weight
        n += 1
    ticks = np.array(sorted(acc), dtype=np.int64)
    mass = np.array([acc[t] for t in ticks], dtype=float)
    return ticks, mass, n


def relative_distribution(session: Session, frame, flow: str, weighting: str = "size") -> RelativeDistribution:
    """Histogram of flow mass over signed relative ticks, buys and sells pooled.

    ``flow`` is ``limits``, ``cancels`` or ``depth``.  For ``depth`` the mass
    is the mean resting size per relative tick, averaged over one sample
    per limit arrival.  Events whose reference price is undefined are
    left out.
    """
    frame = Frame(frame)
    if weighting not in ("size", "count"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if flow == "depth":
        sums = session.depth_sums[frame]
        ns = session.n_samples
        ticks = np.array(sorted(sums), dtype=np.int64)
        mass = np.array([sums[t] / ns for t in ticks], dtype=float) if ns else np.zeros(0)
        return RelativeDistribution(frame, flow, session.label, ticks, mass, ns)
    if flow == "limits":
        records = session.arrivals
    elif flow == "cancels":
        records = session.cancellations
    else:
        raise ValueError(f"unknown flow {flow!r}; expected one of {FLOWS}")
    pairs = ((r.relative(frame), r.size if weighting == "size" else 1) for r in records)
    ticks, mass, n = _histogram((t, w) for t, w in pairs if t is not None)
    return RelativeDistribution(frame, flow, session.label, ticks, mass, n)


def cancellation_ratio(cancels: RelativeDistribution, depth: RelativeDistribution) -> dict:
    """Cancelled size over mean depth, per tick with positive mean depth."""
    c = dict(zip(cancels.ticks.tolist(), cancels.mass.tolist()))
    return {
        int(t): c.get(int(t), 0.0) / float(d)
        for t, d in zip(depth.ticks, depth.mass)
        if d > 0
    }


def dense_grid(ticks, mass) -> tuple:
    """Spread a sparse histogram over a contiguous tick range, zero-filled."""
    ticks = np.asarray(ticks, dtype=np.int64)
    mass = np.asarray(mass, dtype=float)
    if ticks.size == 0:
        return ticks, mass
    lo = int(ticks.min())
    grid = np.arange(lo, int(ticks.max()) + 1)
    dense = np.zeros(grid.size)
    np.add.at(dense, ticks - lo, mass)
    return grid, dense


def magnitude_spectrum(density, ticks=None) -> tuple:
    """Frequencies (cycles per tick) and |DFT| of a density over ticks.

    ``density`` may be a :class:`RelativeDistribution`, a tick -> value
    mapping, or an array of values with matching ``ticks``.
    """
    if isinstance(density, RelativeDistribution):
        ticks, values = density.ticks, density.density
    elif isinstance(density, Mapping):
        ticks = np.array(list(density.keys()))
        values = np.array(list(density.values()), dtype=float)
    else:
        values = np.asarray(density, dtype=float)
        if ticks is None:
            ticks = np.arange(values.size)
    _, dense = dense_grid(ticks, values)
    if dense.size == 0:
        return np.zeros(0), np.zeros(0)
    mags = np.abs(np.fft.fft(dense))
    freqs = np.arange(dense.size) / dense.size
    return freqs, mags


def _sample_of(day) -> object:
    if isinstance(day, RelativeDistribution):
        return (day.ticks.astype(float), day.mass)
    return day


def ecdf_distance_to_rest(day: Hashable, days: Mapping[Hashable, object], rescaled: bool = False,
                          trim: float = 1000.0) -> tuple:
    """Grid and ``F_d(p) - F_{-d}(p)`` on the union of observed values.

    ``F_{-d}`` pools every other day; with ``rescaled`` it is the pooled,
    moment-matched curve instead.
    """
    if len(days) < 2:
        raise ValueError("need at least two days")
    samples = {k: _sample_of(v) for k, v in days.items()}
    own = ECDF(*_pair(samples[day]))
    if rescaled:
        rest = rescaled_rest_ecdf(day, samples, trim)
    else:
        vs, ws = zip(*(_pair(s) for k, s in samples.items() if k != day))
        rest = ECDF(np.concatenate(vs), np.concatenate(ws))
    grid = np.union1d(own.x, rest.x)
    return grid, own(grid) - rest(grid)


def _pair(sample) -> tuple:
    if isinstance(sample, ECDF):
        return sample.x, sample.mass
    if isinstance(sample, tuple):
        return np.asarray(sample[0], dtype=float), np.asarray(sample[1], dtype=float)
    v = np.asarray(sample, dtype=float)
    return v, np.ones_like(v)


def finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None
