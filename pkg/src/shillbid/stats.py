"""Dataset statistics in the two-column (auction / bidder history) table layout."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Sequence

from shillbid.ingest import AUCTION_COLUMNS, RawBidRecord, RawHistoryRecord
from shillbid.ingest import HISTORY_COLUMNS as RAW_HISTORY_COLUMNS
from shillbid.preprocess import BID_COLUMNS, HISTORY_COLUMNS, Auction, BidderHistory

NA = "NA"


@dataclass
class StatsReport:
    n_auction_ids: int
    n_bidder_ids: int
    n_records: int
    n_attributes: int
    n_history_bidder_ids: int | None = None
    n_history_records: int | None = None
    n_history_attributes: int | None = None
    avg_winning_price: Decimal | None = None
    avg_starting_price: Decimal | None = None
    avg_n_bids: Decimal | None = None
    foreign_currency: dict[str, int] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str, str]]:
        def v(x):
            return NA if x is None else str(x)

        out = [
            ("n_auction_ids", v(self.n_auction_ids), NA),
            ("n_bidder_ids", v(self.n_bidder_ids), v(self.n_history_bidder_ids)),
            ("n_records", v(self.n_records), v(self.n_history_records)),
            ("n_attributes", v(self.n_attributes), v(self.n_history_attributes)),
            ("avg_winning_price", v(self.avg_winning_price), NA),
            ("avg_starting_price", v(self.avg_starting_price), NA),
            ("avg_n_bids", v(self.avg_n_bids), NA),
        ]
        if self.foreign_currency:
            out.append(("foreign_currency_records", str(sum(self.foreign_currency.values())), NA))
            for code in sorted(self.foreign_currency):
                out.append((f"foreign_currency_{code}", str(self.foreign_currency[code]), NA))
        return out


def _avg(values: Sequence) -> Decimal | None:
    if not values:
        return None
    total = sum((Decimal(str(x)) for x in values), Decimal(0))
    return (total / len(values)).quantize(Decimal("0.01"))


def raw_stats(
    records: Sequence[RawBidRecord],
    history: Sequence[RawHistoryRecord] = (),
    n_attributes: int | None = None,
    n_history_attributes: int | None = None,
) -> StatsReport:
    """Statistics of accepted raw records, before any cleansing."""
    foreign = Counter(r.bid_currency for r in records if r.bid_currency != "USD")
    return StatsReport(
        n_auction_ids=len({(r.seller_id, r.product_url) for r in records}),
        n_bidder_ids=len({r.bidder_id for r in records}),
        n_records=len(records),
        n_attributes=n_attributes if n_attributes is not None else len(AUCTION_COLUMNS),
        n_history_bidder_ids=len({h.bidder_id for h in history}) if history else None,
        n_history_records=len(history) if history else None,
        n_history_attributes=(n_history_attributes or len(RAW_HISTORY_COLUMNS)) if history else None,
        foreign_currency=dict(foreign),
    )


def preprocessed_stats(
    auctions: Sequence[Auction], histories: Mapping[str, BidderHistory] | None = None
) -> StatsReport:
    return StatsReport(
        n_auction_ids=len(auctions),
        n_bidder_ids=len({b.bidder_id for a in auctions for b in a.bids}),
        n_records=sum(len(a.bids) for a in auctions),
        n_attributes=len(BID_COLUMNS),
        n_history_bidder_ids=len(histories) if histories else None,
        n_history_records=len(histories) if histories else None,
        n_history_attributes=len(HISTORY_COLUMNS) if histories else None,
        avg_winning_price=_avg([a.winning_price_usd for a in auctions]),
        avg_starting_price=_avg([a.opening_price_usd for a in auctions]),
        avg_n_bids=_avg([a.n_bids for a in auctions]),
    )


def write_stats(report: StatsReport, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["statistic", "auction_dataset", "bidder_history_dataset"])
        w.writerows(report.rows())
