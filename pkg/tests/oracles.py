"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from qclob import CreditMatrix, Mode, Order, OrderBook, Side

INF = math.inf


# -- matching ---------------------------------------------------------------


class BruteBook:
    """Matcher that rescans every resting order before each single fill."""

    def __init__(self, limits=None, qclob=False):
        self.rows = []  # dicts: id, owner, price, buy, left, seq
        self.limits = dict(limits or {})
        self.exposure = {}
        self.qclob = qclob
        self.seq = 0

    def room(self, i, j):
        cap = min(self.limits.get((i, j), 0), self.limits.get((j, i), 0))
        return cap - self.exposure.get(frozenset((i, j)), 0)

    def submit(self, oid, owner, price, size):
        buy = size < 0
        left = abs(size)
        trades = []
        while left > 0:
            best = None
            for r in self.rows:
                if r["buy"] == buy or r["owner"] == owner:
                    continue
                if buy and r["price"] > price or not buy and r["price"] < price:
                    continue
                if self.qclob and self.room(owner, r["owner"]) <= 0:
                    continue
                key = (r["price"] if buy else -r["price"], r["seq"])
                if best is None or key < best[0]:
                    best = (key, r)
            if best is None:
                break
            r = best[1]
            q = min(left, r["left"])
            if self.qclob:
                q = min(q, self.room(owner, r["owner"]))
                k = frozenset((owner, r["owner"]))
                self.exposure[k] = self.exposure.get(k, 0) + q
            trades.append((r["id"], r["price"], int(q)))
            r["left"] -= q
            left -= q
            if r["left"] == 0:
                self.rows.remove(r)
        cancelled = 0
        if left > 0:
            own_cross = any(
                r["owner"] == owner and r["buy"] != buy
                and (r["price"] <= price if buy else r["price"] >= price)
                for r in self.rows
            )
            if own_cross:
                cancelled = left
            else:
                self.seq += 1
                self.rows.append(dict(id=oid, owner=owner, price=price, buy=buy, left=left, seq=self.seq))
        return trades, cancelled

    def cancel(self, oid):
        for r in self.rows:
            if r["id"] == oid:
                self.rows.remove(r)
                return True
        return False

    def snapshot(self):
        bids = sorted((r for r in self.rows if r["buy"]), key=lambda r: (-r["price"], r["seq"]))
        asks = sorted((r for r in self.rows if not r["buy"]), key=lambda r: (r["price"], r["seq"]))
        return (tuple((r["id"], r["price"], r["left"]) for r in bids),
                tuple((r["id"], r["price"], r["left"]) for r in asks))


def random_events(rng, n_events, n_inst, price_mid=100, width=8, max_size=20, p_cancel=0.25):
    """A random list of ("submit", id, owner, price, size) / ("cancel", id) events."""
    events = []
    ids = []
    for k in range(n_events):
        if ids and rng.random() < p_cancel:
            events.append(("cancel", ids[int(rng.integers(len(ids)))]))
            continue
        oid = k + 1
        ids.append(oid)
        owner = int(rng.integers(n_inst))
        price = int(price_mid + rng.integers(-width, width + 1))
        size = int(rng.integers(1, max_size + 1))
        events.append(("submit", oid, owner, price, -size if rng.random() < 0.5 else size))
    return events


def random_limits(rng, n_inst, p_inf=0.3, p_zero=0.3, max_c=40):
    limits = {}
    for i in range(n_inst):
        for j in range(n_inst):
            if i == j:
                continue
            u = rng.random()
            if u < p_inf:
                limits[(i, j)] = INF
            elif u < p_inf + p_zero:
                continue
            else:
                limits[(i, j)] = int(rng.integers(1, max_c + 1))
    return limits


def run_engine(events, mode, limits=None, n_inst=10):
    book = OrderBook()
    credit = CreditMatrix(limits or {}, institutions=range(n_inst)) if mode is Mode.QCLOB else None
    log = []
    for ev in events:
        if ev[0] == "cancel":
            if ev[1] in book:
                book.cancel(ev[1])
                log.append(("cancel", ev[1]))
            continue
        _, oid, owner, price, size = ev
        res = book.submit(Order(oid, owner, price, size), credit, mode)
        log.append((tuple((t.maker_order, t.price, t.size) for t in res.trades),
                    None if res.residual is None else res.residual.size, res.cancelled))
        log.append(book.snapshot())
    return log, book, credit


def run_brute(events, limits=None, qclob=False):
    bb = BruteBook(limits, qclob)
    log = []
    for ev in events:
        if ev[0] == "cancel":
            if bb.cancel(ev[1]):
                log.append(("cancel", ev[1]))
            continue
        _, oid, owner, price, size = ev
        trades, cancelled = bb.submit(oid, owner, price, size)
        filled = sum(t[2] for t in trades)
        left = abs(size) - filled
        residual = None
        if left and not cancelled:
            residual = -left if size < 0 else left
        log.append((tuple(trades), residual, cancelled))
        log.append(bb.snapshot())
    return log, bb


# -- the four-institution example -------------------------------------------


FIG3_LIMITS = {
    (1, 2): INF, (1, 3): INF,
    (2, 1): 3, (2, 3): 10,
    (3, 2): 12, (3, 4): 2,
    (4, 2): 100, (4, 3): INF,
}


def fig3_book():
    """Build the crossed four-institution book through the QCLOB engine."""
    credit = CreditMatrix(FIG3_LIMITS, institutions=(1, 2, 3, 4))
    book = OrderBook()
    orders = [
        Order.buy(1, 2, 100, 6),
        Order.buy(2, 3, 99, 4),
        Order.sell(3, 3, 108, 5),
        Order.sell(4, 2, 110, 3),
        Order.buy(5, 1, 105, 5),
        Order.sell(6, 4, 103, 4),
    ]
    for o in orders:
        res = book.submit(o, credit, Mode.QCLOB)
        assert not res.trades
    return book, credit


def local_filter(book: OrderBook, credit: CreditMatrix, viewer):
    """Per-order min(size, headroom) filter, written out longhand."""
    out = {Side.BUY: [], Side.SELL: []}
    for side in (Side.BUY, Side.SELL):
        for o in book.orders(side):
            if o.owner == viewer:
                continue
            cap = min(credit.limit(viewer, o.owner), credit.limit(o.owner, viewer))
            room = cap - credit.exposure(viewer, o.owner)
            vis = min(o.quantity, room)
            if vis > 0:
                out[side].append((o.id, int(vis)))
    return out


# -- time series ------------------------------------------------------------


def dense_spread(quotes, start_ms, end_ms):
    """Per-millisecond spread samples (None when a side is empty)."""
    out = []
    k = -1
    for t in range(start_ms, end_ms):
        while k + 1 < len(quotes) and quotes[k + 1].time_ms <= t:
            k += 1
        out.append(None if k < 0 else quotes[k].spread)
    return out


def naive_dft(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    k = np.arange(n)
    out = np.empty(n, dtype=complex)
    for f in range(n):
        out[f] = np.sum(x * np.exp(-2j * np.pi * f * k / n))
    return out


# -- distances --------------------------------------------------------------


def cvm_quadrature(sample, cdf, pdf, lo, hi):
    """n * integral (F_n - F)^2 f dp, integrating piecewise between atoms."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    edges = np.concatenate(([lo], x, [hi]))
    total = 0.0
    for k in range(n + 1):
        a, b = edges[k], edges[k + 1]
        if b <= a:
            continue
        c = k / n
        val, _ = integrate.quad(lambda p: (c - cdf(p)) ** 2 * pdf(p), a, b,
                                epsabs=1e-13, epsrel=1e-11, limit=200)
        total += val
    return n * total


def brute_ks(f1, f2, lo, hi, step):
    g = np.arange(lo, hi + step / 2, step)
    return float(np.max(np.abs(f1(g) - f2(g))))


def naive_ecdf(sample):
    s = np.sort(np.asarray(sample, dtype=float))
    return lambda t: np.array([np.count_nonzero(s <= v) / s.size for v in np.atleast_1d(t)])
