"""Synthetic multi-day QCLOB sessions with known ground truth.

Each day draws limit-order relative prices from ``mu_d + sigma_d * T`` with
``T`` following a fixed base generalized t law, anchors them to the running
trade references (or to the quotes), and pushes every order through the
real matching engine.  The emitted tick and trade files therefore describe
a mechanically consistent book, which replay must reconstruct exactly.

To keep replay from the tick file alone exact, resting orders are never
partially filled: a market order only ever takes whole resting orders.
Consecutive actions are at least 2 ms apart so that trade grouping never
merges two market orders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .book import UNLIMITED, CreditMatrix, Mode, Order, OrderBook, Side
from .ingest import (
    SessionConfig,
    TickEvent,
    TradeRecord,
    format_tick_file,
    format_trade_file,
)
from .models.gent import GenTParams

CREDIT_RULES = ("infinite", "core-periphery", "explicit")
FRAMES = ("trade", "quote")
_BIG = 10**12


class SpecError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class GeneratorSpec:
    n_institutions: int = 8
    credit: str = "infinite"
    limits: tuple = ()  # explicit ((i, j, c), ...); c may be math.inf
    periphery_limit: int = 500
    mode: str = "centralized"
    base: GenTParams = GenTParams(10.0, 10.0, 0.5, 4.0)
    schedule: tuple = ((0.0, 1.0),)
    frame: str = "trade"
    limit_rate: float = 1.0  # per second
    market_rate: float = 0.05
    cancel_rate: float = 0.002  # per resting order per second
    session_ms: int = 9 * 3_600_000
    max_limit_orders: Optional[int] = None
    start_price: int = 100_000
    unit_size: int = 100
    round_weight: float = 0.5
    max_size: int = 500
    h_max: float = 1.5
    shared_base_sample: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_institutions < 2:
            raise SpecError("n_institutions", "need at least 2 institutions")
        if self.credit not in CREDIT_RULES:
            raise SpecError("credit", f"expected one of {CREDIT_RULES}")
        if self.mode not in ("centralized", "qclob"):
            raise SpecError("mode", "expected centralized or qclob")
        if self.frame not in FRAMES:
            raise SpecError("frame", f"expected one of {FRAMES}")
        for name in ("limit_rate", "market_rate", "cancel_rate"):
            if getattr(self, name) < 0 or not math.isfinite(getattr(self, name)):
                raise SpecError(name, "must be a finite rate >= 0")
        if self.limit_rate <= 0:
            raise SpecError("limit_rate", "must be > 0")
        if not self.schedule:
            raise SpecError("schedule", "needs at least one (mu, sigma) entry")
        for k, (mu, sigma) in enumerate(self.schedule):
            if not (math.isfinite(mu) and math.isfinite(sigma)) or sigma <= 0:
                raise SpecError("schedule", f"entry {k} needs finite mu and sigma > 0")
        if self.session_ms <= 0:
            raise SpecError("session_ms", "must be > 0")
        if self.start_price < 2:
            raise SpecError("start_price", "must be >= 2")
        if self.unit_size < 1 or self.max_size < self.unit_size:
            raise SpecError("unit_size", "need 1 <= unit_size <= max_size")
        if not 0 <= self.round_weight <= 1:
            raise SpecError("round_weight", "must lie in [0, 1]")
        if self.h_max <= 0:
            raise SpecError("h_max", "must be > 0")
        if self.periphery_limit < 0:
            raise SpecError("periphery_limit", "must be >= 0")
        for entry in self.limits:
            if len(entry) != 3 or entry[2] < 0:
                raise SpecError("limits", f"bad entry {entry!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecError(sorted(unknown)[0], "unknown field")
        kw = dict(data)
        try:
            if "base" in kw:
                b = kw["base"]
                kw["base"] = GenTParams(float(b["mu"]), float(b["sigma"]), float(b["xi"]), float(b["nu"]))
            if "schedule" in kw:
                kw["schedule"] = tuple((float(m), float(s)) for m, s in kw["schedule"])
            if "limits" in kw:
                kw["limits"] = tuple((int(i), int(j), _parse_limit(c)) for i, j, c in kw["limits"])
        except (KeyError, TypeError, ValueError) as exc:
            name = next(k for k in ("base", "schedule", "limits") if k in kw)
            raise SpecError(name, str(exc)) from exc
        for f in fields(cls):
            if f.name in kw and f.type in ("int", "float") and not isinstance(kw[f.name], (int, float)):
                raise SpecError(f.name, f"expected a number, got {kw[f.name]!r}")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "GeneratorSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError("<file>", f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise SpecError("<file>", "top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["base"] = self.base.as_dict()
        out["schedule"] = [list(x) for x in self.schedule]
        out["limits"] = [[i, j, "inf" if c == UNLIMITED else c] for i, j, c in self.limits]
        return out

    def moments(self, day: int) -> tuple:
        return self.schedule[day % len(self.schedule)]


def _parse_limit(c):
    if isinstance(c, str) and c.lower() in ("inf", "infinity"):
        return UNLIMITED
    c = float(c)
    return UNLIMITED if math.isinf(c) else int(c)


def build_credit(spec: GeneratorSpec) -> CreditMatrix:
    inst = list(range(spec.n_institutions))
    if spec.credit == "infinite":
        return CreditMatrix.unlimited(inst)
    if spec.credit == "explicit":
        return CreditMatrix({(i, j): c for i, j, c in spec.limits}, inst)
    # core-periphery: a fully trusting core, each periphery member tied to one core member
    n_core = max(2, spec.n_institutions // 4)
    credit = CreditMatrix(institutions=inst)
    for i in range(n_core):
        for j in range(n_core):
            if i != j:
                credit.set_limit(i, j, UNLIMITED)
    for k in range(n_core, spec.n_institutions):
        partner = k % n_core
        credit.set_limit(k, partner, spec.periphery_limit)
        credit.set_limit(partner, k, spec.periphery_limit)
    return credit


@dataclass
class GroundTruth:
    day: int
    mu: float
    sigma: float
    labels: dict = field(default_factory=dict)  # order id -> limit | market
    departures: dict = field(default_factory=dict)  # order id -> cancel | matched
    end_book: list = field(default_factory=list)  # [id, side, price, remaining]
    market_h: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "day": self.day,
            "mu": self.mu,
            "sigma": self.sigma,
            "counts": self.counts,
            "labels": {str(k): v for k, v in self.labels.items()},
            "departures": {str(k): v for k, v in self.departures.items()},
            "end_book": self.end_book,
            "market_h": self.market_h,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        return cls(
            data["day"], data["mu"], data["sigma"],
            {int(k): v for k, v in data["labels"].items()},
            {int(k): v for k, v in data["departures"].items()},
            [list(x) for x in data["end_book"]],
            list(data["market_h"]),
            dict(data["counts"]),
        )

    @property
    def matched_departure_fraction(self) -> float:
        n = len(self.departures)
        return sum(v == "matched" for v in self.departures.values()) / n if n else 0.0


@dataclass(frozen=True)
class SyntheticSession:
    day: int
    ticks: list
    trades: list
    truth: GroundTruth
    config: SessionConfig

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "ticks.csv").write_text(format_tick_file(self.ticks))
        (d / "trades.csv").write_text(format_trade_file(self.trades))
        (d / "truth.json").write_text(json.dumps(self.truth.as_dict(), indent=1, sort_keys=True) + "\n")
        (d / "session.cfg").write_text(self.config.to_text())
        return d


def _size(rng: np.random.Generator, spec: GeneratorSpec) -> int:
    if rng.random() < spec.round_weight:
        # round-number sizes, one unit far more common than several
        k_max = max(1, spec.max_size // spec.unit_size)
        k = min(int(rng.geometric(0.6)), k_max)
        return k * spec.unit_size
    return int(rng.integers(1, spec.max_size + 1))


class _Generator:
    def __init__(self, spec: GeneratorSpec, day: int):
        self.spec = spec
        self.day = day
        self.mu, self.sigma = spec.moments(day)
        ev_seed = np.random.SeedSequence([spec.seed, day, 0])
        base_seed = np.random.SeedSequence([spec.seed] if spec.shared_base_sample else [spec.seed, day, 1])
        self.rng = np.random.default_rng(ev_seed)
        self.base_rng = np.random.default_rng(base_seed)
        self.book = OrderBook()
        self.mode = Mode(spec.mode)
        self.credit = build_credit(spec) if self.mode is Mode.QCLOB else None
        self.config = SessionConfig()
        self.open = self.config.session_open_ms
        self.close = min(self.open + spec.session_ms, self.config.session_close_ms)
        self.ticks: list = []
        self.trades: list = []
        self.truth = GroundTruth(day, self.mu, self.sigma)
        self.live: list = []  # resting ids, for uniform cancellation
        self.pos: dict = {}
        self.next_id = 1
        self.B: Optional[int] = None
        self.A: Optional[int] = None
        self.now = self.open
        self.n_limits = 0
        self.counts = dict(limit=0, market=0, cancel=0, matched=0, suppressed=0,
                           empty_market=0, out_of_range=0)

    # -- bookkeeping ------------------------------------------------------

    def _new_id(self) -> int:
        i = self.next_id
        self.next_id += 1
        return i

    def _track(self, oid: int) -> None:
        self.pos[oid] = len(self.live)
        self.live.append(oid)

    def _untrack(self, oid: int) -> None:
        k = self.pos.pop(oid)
        last = self.live.pop()
        if last != oid:
            self.live[k] = last
            self.pos[last] = k

    def _draw_base(self) -> tuple:
        b = self.spec.base
        z = self.base_rng.standard_normal()
        v = self.base_rng.chisquare(b.nu)
        t = b.sigma * (z + b.xi) / math.sqrt(v / b.nu) + b.mu
        return t, _size(self.base_rng, self.spec)

    # -- actions ----------------------------------------------------------

    def _rest(self, owner: int, side: Side, price: int, size: int) -> bool:
        oid = self._new_id()
        signed = -size if side is Side.BUY else size
        order = Order(oid, owner, price, signed, self.n_limits + 1, self.now - self.open)
        if self.book.preview(order, self.credit, self.mode) or self.book.blocked_by_own(order):
            self.counts["suppressed"] += 1
            return False
        self.book.rest(order)
        self._track(oid)
        self.n_limits += 1
        self.counts["limit"] += 1
        self.truth.labels[oid] = "limit"
        self.ticks.append(TickEvent(self.now, "A", oid, side, price, size))
        return True

    def _anchor(self, side: Side) -> Optional[int]:
        if self.spec.frame == "trade":
            ref = self.B if side is Side.BUY else self.A
            if ref is not None:
                return ref
        q = self.book.best_bid if side is Side.BUY else self.book.best_ask
        if q is not None:
            return q
        ref = self.B if side is Side.BUY else self.A
        if ref is not None:
            return ref
        return self.spec.start_price - 1 if side is Side.BUY else self.spec.start_price + 1

    def limit(self) -> None:
        t, size = self._draw_base()
        owner = int(self.rng.integers(self.spec.n_institutions))
        side = Side.BUY if self.rng.random() < 0.5 else Side.SELL
        r = int(np.rint(self.mu + self.sigma * t))
        ref = self._anchor(side)
        price = ref - r if side is Side.BUY else ref + r
        if not 1 <= price < _BIG:
            self.counts["out_of_range"] += 1
            return
        self._rest(owner, side, price, size)

    def market(self, forced_side: Optional[Side] = None, owner: Optional[int] = None) -> bool:
        rng = self.rng
        if owner is None:
            owner = int(rng.integers(self.spec.n_institutions))
        side = forced_side or (Side.BUY if rng.random() < 0.5 else Side.SELL)
        probe = Order(0, owner, _BIG if side is Side.BUY else 1, -_BIG if side is Side.BUY else _BIG)
        fills = self.book.preview(probe, self.credit, self.mode)
        if not fills:
            self.counts["empty_market"] += 1
            return False
        first_price = fills[0][0].price
        visible = sum(q for o, q in fills if o.price == first_price)
        h = rng.uniform(0.0, self.spec.h_max) if forced_side is None else 0.0
        target = max(1, int(round(h * visible)))
        prefix = []
        total = 0
        for o, q in fills:
            if q != o.quantity or total + q > target:
                break
            prefix.append(o)
            total += q
        if not prefix:
            o, q = fills[0]
            if q != o.quantity:
                self.counts["empty_market"] += 1
                return False
            prefix, total = [o], q
        oid = self._new_id()
        limit_price = prefix[-1].price
        order = Order(oid, owner, limit_price, -total if side is Side.BUY else total,
                      self.n_limits, self.now - self.open)
        res = self.book.submit(order, self.credit, self.mode)
        assert res.residual is None and [t.maker_order for t in res.trades] == [o.id for o in prefix]
        self.truth.labels[oid] = "market"
        self.truth.market_h.append(total / self.book_depth_before(prefix, first_price))
        self.counts["market"] += 1
        for t in res.trades:
            self.trades.append(TradeRecord(self.now, side, t.price, t.size))
            if side is Side.SELL:
                self.B = t.price
            else:
                self.A = t.price
        for t in res.trades:
            self._untrack(t.maker_order)
            self.truth.departures[t.maker_order] = "matched"
            self.counts["matched"] += 1
            self.ticks.append(TickEvent(self.now, "D", t.maker_order))
        return True

    def book_depth_before(self, prefix, price) -> int:
        # depth at the first fill price before the order hit the book
        taken = sum(o.quantity for o in prefix if o.price == price)
        return self.book.depth(prefix[0].side, price) + taken

    def cancel(self) -> None:
        if not self.live:
            return
        oid = self.live[int(self.rng.integers(len(self.live)))]
        self.book.cancel(oid)
        self._untrack(oid)
        self.truth.departures[oid] = "cancel"
        self.counts["cancel"] += 1
        self.ticks.append(TickEvent(self.now, "D", oid))

    def opening(self) -> None:
        """Two small crossings so both trade references exist from the start."""
        s = self.spec
        for side, price in ((Side.SELL, s.start_price + 1), (Side.BUY, s.start_price - 1)):
            maker = 0
            taker = 1
            if not self._rest(maker, side, price, s.unit_size):
                continue
            self.now += 2
            self.market(side.opposite, owner=taker)
            self.now += 2

    # -- main loop --------------------------------------------------------

    def run(self) -> SyntheticSession:
        s = self.spec
        if s.market_rate > 0:
            self.opening()
        t = float(self.now)
        while True:
            if s.max_limit_orders is not None and self.n_limits >= s.max_limit_orders:
                break
            n_live = len(self.live)
            rates = np.array([s.limit_rate, s.market_rate, s.cancel_rate * n_live])
            total = rates.sum()
            t += self.rng.exponential(1000.0 / total)
            self.now = max(self.now + 2, int(t))
            if self.now > self.close:
                break
            u = self.rng.random() * total
            if u < rates[0]:
                self.limit()
            elif u < rates[0] + rates[1]:
                self.market()
            else:
                self.cancel()
        self.truth.counts = dict(self.counts)
        self.truth.end_book = [
            [o.id, o.side.value, o.price, o.quantity]
            for side in (Side.BUY, Side.SELL) for o in self.book.orders(side)
        ]
        return SyntheticSession(self.day, self.ticks, self.trades, self.truth, self.config)


def generate_session(spec: GeneratorSpec, day: int = 0) -> SyntheticSession:
    """One synthetic day; fully determined by ``spec.seed`` and ``day``."""
    return _Generator(spec, day).run()


def generate_family(spec: GeneratorSpec, days: int, schedule: Optional[Sequence] = None) -> list:
    """``days`` sessions sharing the base law, with per-day affine moments."""
    if days < 2:
        raise SpecError("days", "a family needs at least 2 days")
    if schedule is not None:
        spec = replace(spec, schedule=tuple((float(m), float(s)) for m, s in schedule))
    return [generate_session(spec, d) for d in range(days)]


def write_family(sessions: Sequence[SyntheticSession], out) -> list:
    return [s.write(Path(out) / f"day_{s.day:02d}") for s in sessions]


def load_truth(directory) -> GroundTruth:
    return GroundTruth.from_dict(json.loads((Path(directory) / "truth.json").read_text()))
