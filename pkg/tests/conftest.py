from __future__ import annotations

from datetime import datetime
from decimal import Decimal
from pathlib import Path

import pytest

from shillbid.ingest import RawBidRecord
from shillbid.preprocess import Auction, CleanBid

FIXTURES = Path(__file__).parent / "fixtures"


def raw_bid(
    bidder="b1",
    amount="100.00",
    seller="s1",
    url="u1",
    currency="USD",
    bid_at=datetime(2017, 4, 1, 12, 0, 0),
    start=datetime(2017, 4, 1, 0, 0, 0),
    duration="7 Days",
    opening="10.00",
    winning=None,
    n_bids=None,
    **kw,
) -> RawBidRecord:
    return RawBidRecord(
        product_url=url,
        seller_id=seller,
        bidder_id=bidder,
        bid_amount=Decimal(amount),
        bid_currency=currency,
        bid_date=bid_at.date(),
        bid_time=bid_at.time(),
        auction_start_date=start.date(),
        auction_start_time=start.time(),
        duration_text=duration,
        opening_price=Decimal(opening),
        declared_winning_price=None if winning is None else Decimal(winning),
        declared_n_bids=n_bids,
        **kw,
    )


def make_auction(
    bids,
    auction_id=1,
    seller="s1",
    duration=7,
    opening="100.00",
    start=datetime(2017, 4, 1),
    url=None,
    product="",
) -> Auction:
    """``bids`` is a list of (bidder, time_in_days, amount). Aggregates are consistent."""
    clean = tuple(
        sorted(
            (CleanBid(auction_id, b, seller, float(t), Decimal(str(a)), duration) for b, t, a in bids),
            key=CleanBid.sort_key,
        )
    )
    return Auction(
        auction_id=auction_id,
        seller_id=seller,
        product_url=url or f"u{auction_id}",
        product=product,
        duration_days=duration,
        opening_price_usd=Decimal(opening),
        winning_price_usd=max(b.bid_amount_usd for b in clean),
        n_bids=len(clean),
        bids=clean,
        start=start,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def write_csv(path: Path, text: str) -> Path:
    path.write_text(text.lstrip("\n"), encoding="utf-8")
    return path

