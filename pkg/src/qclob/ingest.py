"""Tick/trade file parsing, market-order grouping and session replay.

Canonical file formats (one header line, comma separated, ``\\n`` endings)::

    time_ms,kind,order_id,side,price_ticks,size_lots
    1000,A,42,B,132045,100
    1500,D,42,,,

    time_ms,direction,price_ticks,size_lots
    1500,B,132046,100

Times are milliseconds since midnight.  A departure carries only its id.
A trade's direction is the side of the initiating order.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .book import Order, OrderBook, Side
from .coordinates import Frame, TradeRefState

log = logging.getLogger(__name__)

TICK_HEADER = ("time_ms", "kind", "order_id", "side", "price_ticks", "size_lots")
TRADE_HEADER = ("time_ms", "direction", "price_ticks", "size_lots")

MAX_PRICE = 10**12
MAX_SIZE = 10**12


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class TickEvent:
    time_ms: int
    kind: str  # "A" arrival, "D" departure
    order_id: int
    side: Optional[Side] = None
    price: Optional[int] = None
    size: Optional[int] = None

    @property
    def is_arrival(self) -> bool:
        return self.kind == "A"


@dataclass(frozen=True)
class TradeRecord:
    time_ms: int
    direction: Side
    price: int
    size: int


@dataclass(frozen=True)
class SessionConfig:
    tick_size: float = 0.00001
    lot_size: float = 0.01
    session_open_ms: int = 8 * 3_600_000
    session_close_ms: int = 17 * 3_600_000
    group_window_ms: int = 1
    trim_ticks: int = 1000
    trim_percentile: Optional[float] = None

    @classmethod
    def from_text(cls, text: str) -> "SessionConfig":
        """Parse flat ``key=value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise ParseError(n, f"unrecognised config entry {raw.strip()!r}")
            try:
                if key == "trim_percentile":
                    values[key] = float(value) if value else None
                elif key in ("tick_size", "lot_size"):
                    values[key] = float(value)
                else:
                    values[key] = int(value)
            except ValueError:
                raise ParseError(n, f"bad value for {key}: {value!r}") from None
        cfg = cls(**values)
        if cfg.session_close_ms < cfg.session_open_ms:
            raise ParseError(0, "session_close_ms precedes session_open_ms")
        if cfg.group_window_ms < 0 or cfg.trim_ticks < 0:
            raise ParseError(0, "group_window_ms and trim_ticks must be non-negative")
        return cfg

    @classmethod
    def load(cls, path) -> "SessionConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={'' if v is None else v}")
        return "\n".join(lines) + "\n"


def _text(data: Union[str, bytes]) -> str:
    return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data


def _int_field(value: str, name: str, line: int, lo: int, hi: int) -> int:
    try:
        v = int(value)
    except ValueError:
        raise ParseError(line, f"{name} is not an integer: {value!r}") from None
    if not lo <= v <= hi:
        raise ParseError(line, f"{name} {v} out of range [{lo}, {hi}]")
    return v


def _rows(data, header: tuple):
    reader = csv.reader(io.StringIO(_text(data)))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError(1, "empty file, header expected") from None
    if tuple(c.strip() for c in first) != header:
        raise ParseError(1, f"expected header {','.join(header)}")
    for n, row in enumerate(reader, 2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        yield n, [c.strip() for c in row]


def parse_tick_file(data: Union[str, bytes]) -> list:
    events = []
    live: set = set()
    seen: set = set()
    last = None
    for n, row in _rows(data, TICK_HEADER):
        if len(row) < 3 or len(row) > 6:
            raise ParseError(n, f"expected 6 fields, got {len(row)}")
        t = _int_field(row[0], "time_ms", n, 0, 10**15)
        if last is not None and t < last:
            raise ParseError(n, f"timestamp {t} precedes previous {last}")
        last = t
        oid = _int_field(row[2], "order_id", n, 0, 2**63 - 1)
        kind = row[1]
        if kind == "A":
            if len(row) != 6:
                raise ParseError(n, "arrival needs side, price and size")
            if row[3] not in ("B", "S"):
                raise ParseError(n, f"side must be B or S, got {row[3]!r}")
            if oid in seen:
                raise ParseError(n, f"duplicate arrival of order {oid}")
            price = _int_field(row[4], "price_ticks", n, 1, MAX_PRICE)
            size = _int_field(row[5], "size_lots", n, 1, MAX_SIZE)
            seen.add(oid)
            live.add(oid)
            events.append(TickEvent(t, "A", oid, Side(row[3]), price, size))
        elif kind == "D":
            if any(row[3:]):
                raise ParseError(n, "departure must leave side, price and size empty")
            if oid not in live:
                raise ParseError(n, f"departure of unknown or already departed order {oid}")
            live.discard(oid)
            events.append(TickEvent(t, "D", oid))
        else:
            raise ParseError(n, f"kind must be A or D, got {kind!r}")
    return events


def parse_trade_file(data: Union[str, bytes]) -> list:
    records = []
    last = None
    for n, row in _rows(data, TRADE_HEADER):
        if len(row) != 4:
            raise ParseError(n, f"expected 4 fields, got {len(row)}")
        t = _int_field(row[0], "time_ms", n, 0, 10**15)
        if last is not None and t < last:
            raise ParseError(n, f"timestamp {t} precedes previous {last}")
        last = t
        if row[1] not in ("B", "S"):
            raise ParseError(n, f"direction must be B or S, got {row[1]!r}")
        price = _int_field(row[2], "price_ticks", n, 1, MAX_PRICE)
        size = _int_field(row[3], "size_lots", n, 1, MAX_SIZE)
        records.append(TradeRecord(t, Side(row[1]), price, size))
    return records


def format_tick_file(events: Iterable[TickEvent]) -> str:
    lines = [",".join(TICK_HEADER)]
    for e in events:
        if e.is_arrival:
            lines.append(f"{e.time_ms},A,{e.order_id},{Side(e.side).value},{e.price},{e.size}")
        else:
            lines.append(f"{e.time_ms},D,{e.order_id},,,")
    return "\n".join(lines) + "\n"


def format_trade_file(records: Iterable[TradeRecord]) -> str:
    lines = [",".join(TRADE_HEADER)]
    lines += [f"{r.time_ms},{Side(r.direction).value},{r.price},{r.size}" for r in records]
    return "\n".join(lines) + "\n"


def read_tick_file(path) -> list:
    return parse_tick_file(Path(path).read_bytes())


def read_trade_file(path) -> list:
    return parse_trade_file(Path(path).read_bytes())


# -- market orders --------------------------------------------------------


@dataclass(frozen=True)
class MarketOrder:
    """Trade records believed to come from one incoming order."""

    time_ms: int
    end_ms: int
    direction: Side
    fills: tuple  # ((price, size), ...) in file order
    times: tuple = ()  # per-fill timestamps, same order as ``fills``

    @property
    def size(self) -> int:
        return sum(s for _, s in self.fills)

    @property
    def price(self) -> int:
        return self.fills[0][0]

    @property
    def prices(self) -> tuple:
        return tuple(dict.fromkeys(p for p, _ in self.fills))

    @property
    def multi_price(self) -> bool:
        return len(self.prices) > 1

    def records(self) -> list:
        times = self.times or (self.time_ms,) * len(self.fills)
        return [TradeRecord(t, self.direction, p, s) for t, (p, s) in zip(times, self.fills)]


def group_market_orders(trades: Sequence[TradeRecord], window_ms: int = 1) -> list:
    """Merge same-direction runs whose consecutive gaps are at most ``window_ms``."""
    groups = []
    run: list = []
    for r in trades:
        if run and (r.direction != run[-1].direction or r.time_ms - run[-1].time_ms > window_ms):
            groups.append(run)
            run = []
        run.append(r)
    if run:
        groups.append(run)
    return [
        MarketOrder(g[0].time_ms, g[-1].time_ms, g[0].direction,
                    tuple((r.price, r.size) for r in g), tuple(r.time_ms for r in g))
        for g in groups
    ]


CANCELLATION = "cancellation"


def classify_departures(ticks: Sequence[TickEvent], trades: Sequence[TradeRecord] = ()) -> dict:
    """Label every departure a cancellation.

    The files cannot tell a complete fill from a cancellation, so flow
    statistics treat them all as cancellations.  ``trades`` is accepted for
    interface symmetry and deliberately unused.
    """
    return {e.order_id: CANCELLATION for e in ticks if not e.is_arrival}


# -- replay ---------------------------------------------------------------


@dataclass(frozen=True)
class FlowRecord:
    """One limit-order arrival or departure with its relative prices."""

    time_ms: int
    event_time: int
    order_id: int
    side: Side
    price: int
    size: int
    quote_rel: Optional[int]
    trade_rel: Optional[int]

    def relative(self, frame: Frame) -> Optional[int]:
        return self.quote_rel if Frame(frame) is Frame.QUOTE else self.trade_rel


@dataclass(frozen=True)
class MarketOrderRecord:
    time_ms: int
    event_time: int
    direction: Side
    size: int
    price: int
    n_prices: int
    queue_depth: int  # opposite-side depth at ``price`` just before arrival

    @property
    def multi_price(self) -> bool:
        return self.n_prices > 1

    @property
    def queue_consumption(self) -> Optional[float]:
        return self.size / self.queue_depth if self.queue_depth > 0 else None


@dataclass(frozen=True)
class QuoteState:
    time_ms: int
    bid: Optional[int]
    ask: Optional[int]
    crossed: int

    @property
    def spread(self) -> Optional[int]:
        return None if self.bid is None or self.ask is None else self.ask - self.bid


class ReplaySink:
    """Callbacks fired by :func:`replay`; override what you need."""

    def on_arrival(self, record: FlowRecord, book: OrderBook, refs: TradeRefState) -> None:
        pass

    def on_departure(self, record: FlowRecord, book: OrderBook, refs: TradeRefState) -> None:
        pass

    def on_market_order(self, record: MarketOrderRecord, book: OrderBook, refs: TradeRefState) -> None:
        pass


@dataclass
class Session:
    """Everything a replayed session leaves behind for the analytics."""

    config: SessionConfig
    label: str = ""
    arrivals: list = field(default_factory=list)
    cancellations: list = field(default_factory=list)
    market_orders: list = field(default_factory=list)
    quotes: list = field(default_factory=list)
    depth_sums: dict = field(default_factory=lambda: {Frame.QUOTE: Counter(), Frame.TRADE: Counter()})
    n_samples: int = 0
    total_resting_sum: int = 0
    best_depth_sum: int = 0
    skipped: int = 0
    n_trades: int = 0
    departure_labels: dict = field(default_factory=dict)
    book: OrderBook = field(default_factory=OrderBook)
    refs: TradeRefState = field(default_factory=TradeRefState)

    @property
    def event_time(self) -> int:
        return self.n_samples

    @property
    def start_ms(self) -> int:
        return self.config.session_open_ms

    @property
    def end_ms(self) -> int:
        return self.config.session_close_ms

    @property
    def empty(self) -> bool:
        return not (self.arrivals or self.cancellations or self.market_orders)

    def summary(self) -> dict:
        return {
            "label": self.label,
            "arrivals": len(self.arrivals),
            "cancellations": len(self.cancellations),
            "market_orders": len(self.market_orders),
            "trades": self.n_trades,
            "final_event_time": self.event_time,
            "skipped": self.skipped,
            "resting_orders": len(self.book),
            "resting_lots": self.book.total_depth(),
        }


def _relatives(book: OrderBook, refs: TradeRefState, side: Side, price: int):
    ref_q = book.best_bid if side is Side.BUY else book.best_ask
    ref_t = refs.B if side is Side.BUY else refs.A
    if side is Side.BUY:
        q = None if ref_q is None else ref_q - price
        t = None if ref_t is None else ref_t - price
    else:
        q = None if ref_q is None else price - ref_q
        t = None if ref_t is None else price - ref_t
    return q, t


def _sample_depth(session: Session, book: OrderBook, refs: TradeRefState) -> None:
    qsum = session.depth_sums[Frame.QUOTE]
    tsum = session.depth_sums[Frame.TRADE]
    total = 0
    for side in (Side.BUY, Side.SELL):
        depth = book.depth_map(side)
        best = book.best(side)
        ref_t = refs.B if side is Side.BUY else refs.A
        sign = 1 if side is Side.BUY else -1
        for p, d in depth.items():
            total += d
            qsum[sign * (best - p)] += d
            if ref_t is not None:
                tsum[sign * (ref_t - p)] += d
        if best is not None:
            session.best_depth_sum += depth[best]
    session.total_resting_sum += total
    session.n_samples += 1


def _record_quotes(session: Session, book: OrderBook, t: int) -> None:
    b, a = book.best_bid, book.best_ask
    crossed = book.crossed_volume() if b is not None and a is not None and a < b else 0
    quotes = session.quotes
    if quotes:
        last = quotes[-1]
        if (last.bid, last.ask, last.crossed) == (b, a, crossed):
            return
        if last.time_ms == t:
            quotes.pop()
            if quotes and (quotes[-1].bid, quotes[-1].ask, quotes[-1].crossed) == (b, a, crossed):
                return
    quotes.append(QuoteState(t, b, a, crossed))


def replay(ticks: Sequence[TickEvent], trades: Sequence[TradeRecord],
           config: Optional[SessionConfig] = None, sinks: Sequence[ReplaySink] = (),
           label: str = "") -> Session:
    """Rebuild the global book from a session's tick and trade records.

    Events are applied in time order; at equal timestamps, trades go first
    so that queue depths seen by a market order precede the departures it
    caused.  Event time advances by one per limit-order arrival.  Events
    outside the closed window ``[session_open_ms, session_close_ms]`` are
    skipped and counted.
    """
    config = config or SessionConfig()
    session = Session(config, label=label)
    book = session.book
    refs = TradeRefState()
    lo, hi = config.session_open_ms, config.session_close_ms
    groups = group_market_orders(trades, config.group_window_ms)
    session.departure_labels = classify_departures(ticks, trades)

    gi = ti = 0
    while gi < len(groups) or ti < len(ticks):
        take_group = ti >= len(ticks) or (gi < len(groups) and groups[gi].time_ms <= ticks[ti].time_ms)
        if take_group:
            g = groups[gi]
            gi += 1
            if not lo <= g.time_ms <= hi:
                session.skipped += len(g.fills)
                continue
            depth = book.depth(g.direction.opposite, g.price)
            rec = MarketOrderRecord(g.time_ms, session.n_samples, g.direction, g.size,
                                    g.price, len(g.prices), depth)
            for p, s in g.fills:
                refs = TradeRefState(B=p, A=refs.A) if g.direction is Side.SELL else TradeRefState(B=refs.B, A=p)
            session.market_orders.append(rec)
            session.n_trades += len(g.fills)
            for sink in sinks:
                sink.on_market_order(rec, book, refs)
            continue

        e = ticks[ti]
        ti += 1
        if not lo <= e.time_ms <= hi:
            session.skipped += 1
            continue
        if e.is_arrival:
            q, t = _relatives(book, refs, e.side, e.price)
            order = Order(e.order_id, None, e.price, -e.size if e.side is Side.BUY else e.size,
                          session.n_samples + 1, e.time_ms - lo)
            book.rest(order)
            rec = FlowRecord(e.time_ms, session.n_samples + 1, e.order_id, e.side, e.price, e.size, q, t)
            session.arrivals.append(rec)
            _sample_depth(session, book, refs)
            for sink in sinks:
                sink.on_arrival(rec, book, refs)
        else:
            if e.order_id not in book:
                session.skipped += 1
                continue
            resting = book.get(e.order_id)
            q, t = _relatives(book, refs, resting.side, resting.price)
            book.cancel(e.order_id)
            rec = FlowRecord(e.time_ms, session.n_samples, e.order_id, resting.side,
                             resting.price, resting.quantity, q, t)
            session.cancellations.append(rec)
            for sink in sinks:
                sink.on_departure(rec, book, refs)
        _record_quotes(session, book, e.time_ms)

    session.refs = refs
    return session


def load_session(directory, config: Optional[SessionConfig] = None) -> Session:
    """Replay ``ticks.csv`` + ``trades.csv`` found in ``directory``.

    A ``session.cfg`` next to them is used when ``config`` is not given.
    """
    directory = Path(directory)
    if config is None:
        cfg_path = directory / "session.cfg"
        config = SessionConfig.load(cfg_path) if cfg_path.exists() else SessionConfig()
    ticks = read_tick_file(directory / "ticks.csv")
    trades = read_trade_file(directory / "trades.csv")
    return replay(ticks, trades, config, label=directory.name)
