"""Order book with price-time priority and counterparty credit limits.

Prices are integer ticks and sizes integer lots.  An order's signed size
follows the usual microstructure convention: negative for buys, positive
for sells.  The same book runs either as a centralized LOB, where any two
institutions may trade, or as a quasi-centralized LOB (QCLOB), where every
fill is capped by the bilateral credit headroom between maker and taker.
"""

from __future__ import annotations

import bisect
import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterator, NamedTuple, Optional

UNLIMITED = math.inf


class Side(str, enum.Enum):
    BUY = "B"
    SELL = "S"

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class Mode(str, enum.Enum):
    CENTRALIZED = "centralized"
    QCLOB = "qclob"


class BookError(Exception):
    """Base class for order book errors."""


class DuplicateOrderError(BookError):
    pass


class OrderNotFoundError(BookError, KeyError):
    pass


class InvalidPairError(BookError, ValueError):
    pass


class CreditLimitError(BookError):
    pass


class UnknownInstitutionError(BookError):
    pass


@dataclass(frozen=True)
class Order:
    id: int
    owner: Optional[Hashable]
    price: int
    size: int
    submit_time: int = 0
    calendar_time: int = 0

    def __post_init__(self):
        if not isinstance(self.price, int) or isinstance(self.price, bool):
            raise TypeError(f"price must be an integer number of ticks, got {self.price!r}")
        if not isinstance(self.size, int) or self.size == 0:
            raise ValueError(f"size must be a non-zero integer number of lots, got {self.size!r}")

    @property
    def side(self) -> Side:
        return Side.BUY if self.size < 0 else Side.SELL

    @property
    def quantity(self) -> int:
        return abs(self.size)

    @classmethod
    def buy(cls, id: int, owner, price: int, quantity: int, **kw) -> "Order":
        return cls(id, owner, price, -abs(quantity), **kw)

    @classmethod
    def sell(cls, id: int, owner, price: int, quantity: int, **kw) -> "Order":
        return cls(id, owner, price, abs(quantity), **kw)


@dataclass(frozen=True)
class Trade:
    calendar_time: int
    price: int
    size: int
    direction: Side  # side of the taker: BUY means buyer-initiated
    maker_order: int
    taker_order: int
    maker: Optional[Hashable] = None
    taker: Optional[Hashable] = None


class SubmitResult(NamedTuple):
    trades: list
    residual: Optional[Order]
    cancelled: int = 0  # lots dropped by self-trade prevention

    @property
    def kind(self) -> str:
        """``"market"``, ``"limit"``, ``"mixed"`` for a partial match, or
        ``"rejected"`` when self-trade prevention dropped the whole order."""
        if not self.trades:
            return "limit" if self.residual is not None else "rejected"
        return "mixed" if self.residual is not None else "market"


class CreditMatrix:
    """Directed counterparty credit limits plus the running bilateral exposure.

    ``limits[(i, j)]`` is the most exposure institution ``i`` will extend to
    ``j``.  Missing entries are 0.  Exposure is cumulative traded lots per
    unordered pair and is never released within a session.
    """

    def __init__(self, limits: Optional[dict] = None, institutions=()):
        self._limits: dict = {}
        self._exposure: dict = {}
        self._institutions: set = set(institutions)
        for (i, j), c in (limits or {}).items():
            self.set_limit(i, j, c)

    @classmethod
    def unlimited(cls, institutions) -> "CreditMatrix":
        institutions = list(institutions)
        limits = {(i, j): UNLIMITED for i in institutions for j in institutions if i != j}
        return cls(limits, institutions)

    @property
    def institutions(self) -> frozenset:
        return frozenset(self._institutions)

    def add_institution(self, i) -> None:
        self._institutions.add(i)

    def set_limit(self, i, j, c) -> None:
        if i == j:
            raise InvalidPairError(f"credit limit of {i!r} with itself is undefined")
        if c < 0:
            raise ValueError(f"credit limit must be >= 0, got {c}")
        self._limits[(i, j)] = c
        self._institutions.update((i, j))

    def limit(self, i, j):
        return self._limits.get((i, j), 0)

    def bilateral_ccl(self, i, j):
        if i == j:
            raise InvalidPairError(f"bilateral CCL of {i!r} with itself is undefined")
        return min(self.limit(i, j), self.limit(j, i))

    def exposure(self, i, j) -> int:
        if i == j:
            raise InvalidPairError(f"exposure of {i!r} with itself is undefined")
        return self._exposure.get(frozenset((i, j)), 0)

    def headroom(self, i, j):
        cap = self.bilateral_ccl(i, j)
        if cap == UNLIMITED:
            return UNLIMITED
        return max(cap - self.exposure(i, j), 0)

    def record(self, i, j, lots: int) -> None:
        if lots > self.headroom(i, j):
            raise CreditLimitError(
                f"fill of {lots} lots between {i!r} and {j!r} exceeds headroom {self.headroom(i, j)}"
            )
        key = frozenset((i, j))
        self._exposure[key] = self._exposure.get(key, 0) + lots

    def exposures(self) -> dict:
        return dict(self._exposure)

    def limits(self) -> dict:
        return dict(self._limits)

    def copy(self) -> "CreditMatrix":
        other = CreditMatrix(institutions=self._institutions)
        other._limits = dict(self._limits)
        other._exposure = dict(self._exposure)
        return other


def bilateral_ccl(credit: CreditMatrix, i, j):
    return credit.bilateral_ccl(i, j)


def headroom(credit: CreditMatrix, i, j):
    return credit.headroom(i, j)


@dataclass(slots=True)
class _Resting:
    order: Order
    remaining: int
    seq: int

    def current(self) -> Order:
        if self.remaining == self.order.quantity:
            return self.order
        signed = -self.remaining if self.order.size < 0 else self.remaining
        return replace(self.order, size=signed)


@dataclass(frozen=True)
class LocalBookView:
    """What one institution can see of the global book.

    ``bids`` and ``asks`` hold ``(order, visible_size)`` pairs in priority
    order; the viewer's own resting orders are listed separately in ``own``.
    """

    viewer: Hashable
    bids: tuple
    asks: tuple
    own: tuple = ()

    @property
    def best_bid(self) -> Optional[int]:
        return max((o.price for o, _ in self.bids), default=None)

    @property
    def best_ask(self) -> Optional[int]:
        return min((o.price for o, _ in self.asks), default=None)

    @property
    def spread(self) -> Optional[int]:
        b, a = self.best_bid, self.best_ask
        return None if b is None or a is None else a - b

    @property
    def mid(self) -> Optional[float]:
        b, a = self.best_bid, self.best_ask
        return None if b is None or a is None else (a + b) / 2

    def depth(self, side: Side, price: int) -> int:
        entries = self.bids if side is Side.BUY else self.asks
        return sum(v for o, v in entries if o.price == price)


class OrderBook:
    """Global limit order book L(t).

    Orders at one price form a FIFO queue.  ``submit`` matches incoming
    orders; ``rest`` inserts without matching, which is what a replay of a
    tick-data file needs since the recorded book may legitimately be crossed.
    """

    def __init__(self):
        self._queues = {Side.BUY: {}, Side.SELL: {}}
        self._depth = {Side.BUY: {}, Side.SELL: {}}
        self._prices = {Side.BUY: [], Side.SELL: []}
        self._index: dict = {}
        self._seen: set = set()
        self._seq = 0

    # -- quotes -----------------------------------------------------------

    @property
    def best_bid(self) -> Optional[int]:
        prices = self._prices[Side.BUY]
        return prices[-1] if prices else None

    @property
    def best_ask(self) -> Optional[int]:
        prices = self._prices[Side.SELL]
        return prices[0] if prices else None

    @property
    def spread(self) -> Optional[int]:
        b, a = self.best_bid, self.best_ask
        return None if b is None or a is None else a - b

    @property
    def mid(self) -> Optional[float]:
        b, a = self.best_bid, self.best_ask
        return None if b is None or a is None else (a + b) / 2

    def best(self, side: Side) -> Optional[int]:
        return self.best_bid if side is Side.BUY else self.best_ask

    def depth(self, side: Side, price: int) -> int:
        return self._depth[side].get(price, 0)

    def levels(self, side: Side) -> list:
        """``(price, depth)`` pairs, best price first."""
        prices = self._prices[side]
        ordered = reversed(prices) if side is Side.BUY else prices
        depth = self._depth[side]
        return [(p, depth[p]) for p in ordered]

    def depth_map(self, side: Side) -> dict:
        return self._depth[side]

    def total_depth(self) -> int:
        return sum(self._depth[Side.BUY].values()) + sum(self._depth[Side.SELL].values())

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, order_id) -> bool:
        return order_id in self._index

    def get(self, order_id) -> Order:
        try:
            return self._index[order_id].current()
        except KeyError:
            raise OrderNotFoundError(order_id) from None

    def orders(self, side: Optional[Side] = None) -> list:
        """Resting orders in priority order (price, then time)."""
        sides = [side] if side is not None else [Side.BUY, Side.SELL]
        out = []
        for s in sides:
            for price, _ in self.levels(s):
                out.extend(r.current() for r in self._queues[s][price])
        return out

    def snapshot(self) -> tuple:
        """Hashable state: per side, the priority-ordered ``(id, price, remaining)``."""
        return tuple(
            tuple((r.order.id, p, r.remaining) for p, _ in self.levels(s) for r in self._queues[s][p])
            for s in (Side.BUY, Side.SELL)
        )

    # -- mutation ---------------------------------------------------------

    def _check_new(self, order: Order) -> None:
        if order.id in self._seen:
            raise DuplicateOrderError(f"order id {order.id!r} already used in this session")

    def _insert(self, order: Order, remaining: int) -> None:
        side = order.side
        queues = self._queues[side]
        if order.price not in queues:
            queues[order.price] = deque()
            self._depth[side][order.price] = 0
            bisect.insort(self._prices[side], order.price)
        self._seq += 1
        entry = _Resting(order, remaining, self._seq)
        queues[order.price].append(entry)
        self._depth[side][order.price] += remaining
        self._index[order.id] = entry

    def _drop_level_if_empty(self, side: Side, price: int) -> None:
        if not self._queues[side][price]:
            del self._queues[side][price]
            del self._depth[side][price]
            prices = self._prices[side]
            del prices[bisect.bisect_left(prices, price)]

    def rest(self, order: Order) -> None:
        """Place ``order`` in the book without attempting to match it."""
        self._check_new(order)
        self._seen.add(order.id)
        self._insert(order, order.quantity)

    def cancel(self, order_id) -> Order:
        entry = self._index.pop(order_id, None)
        if entry is None:
            raise OrderNotFoundError(order_id)
        side, price = entry.order.side, entry.order.price
        self._queues[side][price].remove(entry)
        self._depth[side][price] -= entry.remaining
        self._drop_level_if_empty(side, price)
        return entry.current()

    def _plan(self, order: Order, credit: Optional[CreditMatrix], mode: Mode) -> list:
        """Fills ``[(resting entry, lots)]`` that ``order`` would receive."""
        mode = Mode(mode)
        if mode is Mode.QCLOB:
            if credit is None:
                raise ValueError("qclob mode needs a CreditMatrix")
            if order.owner not in credit.institutions:
                raise UnknownInstitutionError(f"institution {order.owner!r} has no credit record")
        side = order.side.opposite
        prices = self._prices[side]
        if order.side is Side.BUY:
            levels = prices[: bisect.bisect_right(prices, order.price)]
        else:
            levels = reversed(prices[bisect.bisect_left(prices, order.price):])
        taker = order.owner
        remaining = order.quantity
        used: dict = {}
        fills = []
        for price in levels:
            for entry in self._queues[side][price]:
                maker = entry.order.owner
                if taker is not None and maker == taker:
                    continue
                qty = min(remaining, entry.remaining)
                if mode is Mode.QCLOB:
                    room = credit.headroom(taker, maker)
                    if room != UNLIMITED:
                        room -= used.get(maker, 0)
                    if room <= 0:
                        continue
                    qty = min(qty, room)
                    used[maker] = used.get(maker, 0) + qty
                fills.append((entry, int(qty)))
                remaining -= qty
                if remaining == 0:
                    return fills
        return fills

    def preview(self, order: Order, credit: Optional[CreditMatrix] = None,
                mode: Mode = Mode.CENTRALIZED) -> list:
        """Fills as ``[(resting Order, lots)]`` without touching the book."""
        return [(entry.current(), qty) for entry, qty in self._plan(order, credit, mode)]

    def submit(self, order: Order, credit: Optional[CreditMatrix] = None,
               mode: Mode = Mode.CENTRALIZED) -> SubmitResult:
        """Match ``order`` against the book; any unmatched part rests at its price."""
        self._check_new(order)
        fills = self._plan(order, credit, mode)
        self._seen.add(order.id)
        trades = []
        side = order.side.opposite
        qclob = Mode(mode) is Mode.QCLOB
        for entry, qty in fills:
            maker = entry.order
            if qclob:
                credit.record(order.owner, maker.owner, qty)
            entry.remaining -= qty
            self._depth[side][maker.price] -= qty
            if entry.remaining == 0:
                self._queues[side][maker.price].remove(entry)
                del self._index[maker.id]
                self._drop_level_if_empty(side, maker.price)
            trades.append(Trade(order.calendar_time, maker.price, qty, order.side,
                                maker.id, order.id, maker.owner, order.owner))
        filled = sum(t.size for t in trades)
        residual = None
        if filled < order.quantity:
            left = order.quantity - filled
            if self.blocked_by_own(order):
                # self-trade prevention: never rest across the owner's own
                # resting orders, so the remainder is cancelled instead
                return SubmitResult(trades, None, left)
            residual = replace(order, size=-left if order.size < 0 else left)
            self._insert(residual, left)
        return SubmitResult(trades, residual)

    def blocked_by_own(self, order: Order) -> bool:
        """Whether a resting order of ``order.owner`` is price-compatible with it."""
        if order.owner is None:
            return False
        side = order.side.opposite
        prices = self._prices[side]
        if order.side is Side.BUY:
            levels = prices[: bisect.bisect_right(prices, order.price)]
        else:
            levels = prices[bisect.bisect_left(prices, order.price):]
        return any(e.order.owner == order.owner for p in levels for e in self._queues[side][p])

    # -- observables ------------------------------------------------------

    def crossed_volume(self) -> int:
        """Lots of sells priced below b(t) plus buys priced above a(t)."""
        b, a = self.best_bid, self.best_ask
        if b is None or a is None or a >= b:
            return 0
        bids, asks = self._prices[Side.BUY], self._prices[Side.SELL]
        sells = sum(self._depth[Side.SELL][p] for p in asks[: bisect.bisect_left(asks, b)])
        buys = sum(self._depth[Side.BUY][p] for p in bids[bisect.bisect_right(bids, a):])
        return sells + buys

    def local_book(self, credit: CreditMatrix, viewer) -> LocalBookView:
        """Credit-filtered view of the book for ``viewer``.

        Each order of another owner is truncated to the current headroom
        between its owner and the viewer; orders with no headroom vanish.
        """
        views = {}
        own = []
        for side in (Side.BUY, Side.SELL):
            entries = []
            for price, _ in self.levels(side):
                for entry in self._queues[side][price]:
                    o = entry.order
                    if o.owner == viewer:
                        own.append(entry.current())
                        continue
                    room = credit.headroom(viewer, o.owner)
                    visible = min(entry.remaining, room)
                    if visible > 0:
                        entries.append((entry.current(), int(visible)))
            views[side] = tuple(entries)
        return LocalBookView(viewer, views[Side.BUY], views[Side.SELL], tuple(own))


def local_book(book: OrderBook, credit: CreditMatrix, viewer) -> LocalBookView:
    return book.local_book(credit, viewer)


def crossed_volume(book: OrderBook) -> int:
    return book.crossed_volume()
