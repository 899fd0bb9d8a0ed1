"""Quote-relative and trade-relative prices.

Quote-relative prices are measured from the global best quote on the
order's own side (b(t) for buys, a(t) for sells); trade-relative prices from
the last seller-initiated (B) or buyer-initiated (A) trade price.  Both are
signed so that larger values sit deeper in the book.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .book import Side, Trade


class Frame(str, enum.Enum):
    QUOTE = "quote"
    TRADE = "trade"


class UnavailableReference(LookupError):
    """The reference price for a relative-price computation is not defined."""


@dataclass(frozen=True)
class RelativePrice:
    value: int
    frame: Frame
    side: Side


@dataclass(frozen=True)
class TradeRefState:
    """Last seller-initiated (``B``) and buyer-initiated (``A``) trade prices."""

    B: Optional[int] = None
    A: Optional[int] = None

    def update(self, trade: Trade) -> "TradeRefState":
        return update_refs(self, trade)


def _relative(price: int, side: Side, ref_buy, ref_sell, frame: Frame) -> RelativePrice:
    side = Side(side)
    ref = ref_buy if side is Side.BUY else ref_sell
    if ref is None:
        raise UnavailableReference(f"no {frame.value}-relative reference for {side.name.lower()} orders")
    value = ref - price if side is Side.BUY else price - ref
    return RelativePrice(value, frame, side)


def quote_relative(price: int, side: Side, b: Optional[int], a: Optional[int]) -> RelativePrice:
    return _relative(price, side, b, a, Frame.QUOTE)


def trade_relative(price: int, side: Side, refs: TradeRefState) -> RelativePrice:
    return _relative(price, side, refs.B, refs.A, Frame.TRADE)


def update_refs(refs: TradeRefState, trade: Trade) -> TradeRefState:
    if Side(trade.direction) is Side.SELL:
        return replace(refs, B=trade.price)
    return replace(refs, A=trade.price)
