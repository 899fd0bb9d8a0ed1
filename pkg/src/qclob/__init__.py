"""Quasi-centralized limit order book laboratory."""

from .book import (
    UNLIMITED,
    BookError,
    CreditLimitError,
    CreditMatrix,
    DuplicateOrderError,
    InvalidPairError,
    LocalBookView,
    Mode,
    Order,
    OrderBook,
    OrderNotFoundError,
    Side,
    SubmitResult,
    Trade,
    UnknownInstitutionError,
    bilateral_ccl,
    crossed_volume,
    headroom,
    local_book,
)
from .coordinates import Frame, RelativePrice, TradeRefState, UnavailableReference, quote_relative, trade_relative, update_refs
from .ingest import (
    ParseError,
    SessionConfig,
    TickEvent,
    TradeRecord,
    classify_departures,
    group_market_orders,
    load_session,
    parse_tick_file,
    parse_trade_file,
    replay,
)

__version__ = "0.1.0"
