import pytest
from hypothesis import given
from hypothesis import strategies as st

from qclob import Frame, Side, Trade, TradeRefState, UnavailableReference, quote_relative, trade_relative, update_refs
from qclob.ingest import ReplaySink, TickEvent, TradeRecord, replay


def test_quote_relative_examples():
    assert quote_relative(100, Side.BUY, 100, 104).value == 0
    assert quote_relative(109, Side.SELL, 100, 104).value == 5
    r = quote_relative(103, Side.BUY, 100, 104)
    assert r.value == -3 and r.frame is Frame.QUOTE and r.side is Side.BUY


def test_quote_relative_needs_reference():
    with pytest.raises(UnavailableReference):
        quote_relative(100, Side.BUY, None, 104)
    with pytest.raises(UnavailableReference):
        quote_relative(100, Side.SELL, 99, None)


def test_trade_relative_examples():
    refs = TradeRefState(B=120, A=125)
    assert trade_relative(120, Side.BUY, refs).value == 0
    assert trade_relative(132, Side.SELL, refs).value == 7
    with pytest.raises(UnavailableReference):
        trade_relative(100, Side.BUY, TradeRefState())
    with pytest.raises(UnavailableReference):
        trade_relative(100, Side.SELL, TradeRefState(B=99))


def _trade(price, direction):
    return Trade(0, price, 1, direction, 1, 2)


def test_update_refs():
    refs = update_refs(TradeRefState(A=130), _trade(120, Side.SELL))
    assert refs == TradeRefState(B=120, A=130)
    refs = refs.update(_trade(125, Side.BUY))
    assert refs == TradeRefState(B=120, A=125)


class RefLog(ReplaySink):
    def __init__(self):
        self.seen = []

    def on_arrival(self, record, book, refs):
        self.seen.append(("A", refs))

    def on_departure(self, record, book, refs):
        self.seen.append(("D", refs))

    def on_market_order(self, record, book, refs):
        self.seen.append(("M", refs))


def test_multi_fill_market_order_leaves_last_fill_price():
    t0 = 8 * 3_600_000
    ticks = [
        TickEvent(t0 + 1, "A", 1, Side.BUY, 100, 2),
        TickEvent(t0 + 2, "A", 2, Side.BUY, 99, 2),
        TickEvent(t0 + 10, "D", 1),
        TickEvent(t0 + 10, "D", 2),
        TickEvent(t0 + 20, "A", 3, Side.BUY, 97, 1),
    ]
    trades = [TradeRecord(t0 + 10, Side.SELL, 100, 2), TradeRecord(t0 + 11, Side.SELL, 99, 2)]
    log = RefLog()
    s = replay(ticks, trades, sinks=[log])
    assert s.refs == TradeRefState(B=99, A=None)
    assert s.arrivals[-1].trade_rel == 2
    assert s.arrivals[0].trade_rel is None
    # refs only move at market orders
    prev = TradeRefState()
    for kind, refs in log.seen:
        if kind != "M":
            assert refs == prev
        prev = refs


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_mirror_symmetry(p, b, a):
    # negating prices and swapping sides leaves relative prices unchanged
    assert quote_relative(p, Side.BUY, b, a).value == quote_relative(-p, Side.SELL, -a, -b).value
    assert quote_relative(p, Side.SELL, b, a).value == quote_relative(-p, Side.BUY, -a, -b).value
    refs = TradeRefState(B=b, A=a)
    mirror = TradeRefState(B=-a, A=-b)
    assert trade_relative(p, Side.BUY, refs).value == trade_relative(-p, Side.SELL, mirror).value
