"""Cleansing, reformatting and consistency repair of raw auction records.

Stage order: deduplicate -> drop masked ids -> assign auction ids ->
convert/reformat each record -> group into auctions -> repair aggregates.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TypeVar

from shillbid.errors import InputError, RecordError
from shillbid.ingest import (
    RawBidRecord,
    RawHistoryRecord,
    is_masked_id,
    parse_date,
    parse_time,
)

log = logging.getLogger(__name__)

DURATIONS = (1, 3, 5, 7, 10)
SECONDS_PER_DAY = 86400
CENT = Decimal("0.01")

BID_COLUMNS = (
    "auction_id",
    "bidder_id",
    "seller_id",
    "bid_time",
    "bid_amount_usd",
    "opening_price_usd",
    "winning_price_usd",
    "n_bids",
    "duration_days",
)
AUCTION_META_COLUMNS = (
    "auction_id",
    "seller_id",
    "product_url",
    "product",
    "start",
    "duration_days",
    "opening_price_usd",
    "winning_price_usd",
    "n_bids",
)
HISTORY_COLUMNS = (
    "bidder_id",
    "buyer_rating",
    "items_bid_on_30d",
    "n_bid_retractions_30d",
    "activity_with_seller",
)

T = TypeVar("T")


@dataclass(frozen=True)
class CleanBid:
    auction_id: int
    bidder_id: str
    seller_id: str
    bid_time: float  # days since auction start
    bid_amount_usd: Decimal
    duration_days: int

    def sort_key(self):
        return (self.bid_time, self.bid_amount_usd, self.bidder_id)


@dataclass(frozen=True)
class Auction:
    auction_id: int
    seller_id: str
    product_url: str
    duration_days: int
    opening_price_usd: Decimal
    winning_price_usd: Decimal | None
    n_bids: int | None
    bids: tuple[CleanBid, ...]
    start: datetime
    # concurrency key; falls back to product_url
    product: str = ""

    @property
    def product_key(self) -> str:
        return self.product or self.product_url

    @property
    def end(self) -> datetime:
        return self.start + timedelta(days=self.duration_days)


@dataclass(frozen=True)
class BidderHistory:
    bidder_id: str
    buyer_rating: int
    items_bid_on_30d: int
    n_bid_retractions_30d: int
    activity_with_seller: float

    def __post_init__(self):
        if not 0.0 <= self.activity_with_seller <= 1.0:
            raise ValueError(f"activity_with_seller out of [0,1]: {self.activity_with_seller}")


class RateTable:
    """USD-per-unit exchange rates. USD is always 1."""

    def __init__(self, rates: Mapping[str, Decimal | float | str] | None = None):
        self._rates: dict[str, Decimal] = {"USD": Decimal(1)}
        for code, rate in (rates or {}).items():
            value = Decimal(str(rate))
            if not value.is_finite() or value <= 0:
                raise ValueError(f"rate for {code} must be positive, got {rate}")
            self._rates[code.upper()] = value

    def rate(self, code: str) -> Decimal:
        try:
            return self._rates[code.upper()]
        except KeyError:
            raise RecordError("bid_currency", f"no exchange rate for {code!r}") from None

    def __contains__(self, code: str) -> bool:
        return code.upper() in self._rates

    def items(self):
        return sorted(self._rates.items())


@dataclass(frozen=True)
class Repair:
    auction_id: int
    field: str
    old: str
    new: str


@dataclass(frozen=True)
class RecordDefect:
    seller_id: str
    product_url: str
    bidder_id: str
    field: str
    reason: str


@dataclass
class Accounting:
    """Where every accepted raw record went."""

    rows_in: int = 0
    duplicates_removed: int = 0
    masked_dropped: int = 0
    defects: int = 0
    bids_out: int = 0

    def balanced(self) -> bool:
        return self.rows_in == (
            self.bids_out + self.duplicates_removed + self.masked_dropped + self.defects
        )


@dataclass
class PreprocessResult:
    auctions: list[Auction]
    repairs: list[Repair] = field(default_factory=list)
    defects: list[RecordDefect] = field(default_factory=list)
    accounting: Accounting = field(default_factory=Accounting)


@dataclass
class HistoryResult:
    histories: dict[str, BidderHistory]
    defects: list[RecordDefect] = field(default_factory=list)
    accounting: Accounting = field(default_factory=Accounting)
    conflicts: int = 0


# -- record-level operations ---------------------------------------------


def deduplicate(records: Iterable[T]) -> list[T]:
    """Drop exact repeats, keeping each record at its first position."""
    seen = set()
    out = []
    for r in records:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


def drop_masked(records: Iterable[T]) -> tuple[list[T], int]:
    kept = []
    dropped = 0
    for r in records:
        if is_masked_id(r.bidder_id):
            dropped += 1
        else:
            kept.append(r)
    return kept, dropped


def _as_date(value: date | str, name: str) -> date:
    return parse_date(value, name) if isinstance(value, str) else value


def _as_time(value: time | str, name: str) -> time:
    return parse_time(value, name) if isinstance(value, str) else value


def compute_bid_time(
    start_date: date | str,
    start_time: time | str,
    bid_date: date | str,
    bid_time: time | str,
) -> float:
    """Elapsed time from auction start to the bid, in days.

    Negative values and values past the auction end are returned as-is.
    """
    start = datetime.combine(
        _as_date(start_date, "auction_start_date"), _as_time(start_time, "auction_start_time")
    )
    bid = datetime.combine(_as_date(bid_date, "bid_date"), _as_time(bid_time, "bid_time"))
    return (bid - start).total_seconds() / SECONDS_PER_DAY


def convert_currency(amount: Decimal, code: str, rates: RateTable) -> Decimal:
    if code.upper() == "USD":
        return amount
    return amount * rates.rate(code)


_DURATION_RE = re.compile(r"^\s*(\d+)\s*days?\s*$", re.IGNORECASE)


def parse_duration(text: str) -> int:
    """``"7 Days"`` -> 7. Only the listing durations eBay offers are accepted."""
    m = _DURATION_RE.match(text)
    if not m:
        raise RecordError("duration_text", f"unrecognized duration: {text!r}")
    days = int(m.group(1))
    if days not in DURATIONS:
        raise RecordError("duration_text", f"duration {days} not in {DURATIONS}")
    return days


_PERCENT_RE = re.compile(r"^\s*([+-]?\d+(?:\.\d*)?|[+-]?\.\d+)\s*%?\s*$")


def percentage_to_fraction(text: str) -> float:
    """``"90%"`` (or a bare ``"90"``) -> 0.9."""
    m = _PERCENT_RE.match(text)
    if not m:
        raise RecordError("activity_with_seller", f"not a percentage: {text!r}")
    value = float(m.group(1))
    if not 0.0 <= value <= 100.0:
        raise RecordError("activity_with_seller", f"percentage out of [0,100]: {text!r}")
    return value / 100.0


def assign_auction_ids(records: Iterable[RawBidRecord]) -> dict[tuple[str, str], int]:
    """Number each (seller_id, product_url) pair by first appearance, from 1."""
    ids: dict[tuple[str, str], int] = {}
    for r in records:
        ids.setdefault((r.seller_id, r.product_url), len(ids) + 1)
    return ids


def _cents(value: Decimal) -> Decimal:
    return value.quantize(CENT, rounding=ROUND_HALF_EVEN)


# -- auction-level operations --------------------------------------------


@dataclass(frozen=True)
class AuctionMeta:
    seller_id: str
    product_url: str
    start: datetime
    duration_days: int
    opening_price_usd: Decimal
    declared_winning_price_usd: Decimal | None = None
    declared_n_bids: int | None = None
    product: str = ""


def group_auctions(bids: Iterable[CleanBid], meta: Mapping[int, AuctionMeta]) -> list[Auction]:
    by_id: dict[int, list[CleanBid]] = {}
    for b in bids:
        by_id.setdefault(b.auction_id, []).append(b)
    unknown = set(by_id) - set(meta)
    if unknown:
        raise ValueError(f"bids reference auctions without metadata: {sorted(unknown)}")

    auctions = []
    for auction_id in sorted(meta):
        group = by_id.get(auction_id)
        if not group:
            log.warning("auction %d has no bids; excluded", auction_id)
            continue
        m = meta[auction_id]
        auctions.append(
            Auction(
                auction_id=auction_id,
                seller_id=m.seller_id,
                product_url=m.product_url,
                product=m.product,
                start=m.start,
                duration_days=m.duration_days,
                opening_price_usd=m.opening_price_usd,
                winning_price_usd=m.declared_winning_price_usd,
                n_bids=m.declared_n_bids,
                bids=tuple(sorted(group, key=CleanBid.sort_key)),
            )
        )
    return auctions


def repair_consistency(a: Auction) -> tuple[Auction, list[Repair]]:
    """Make the winning price equal the highest bid and n_bids equal the bid count."""
    if not a.bids:
        raise ValueError(f"auction {a.auction_id} has no bids")
    repairs = []
    highest = max(b.bid_amount_usd for b in a.bids)
    if a.winning_price_usd != highest:
        repairs.append(Repair(a.auction_id, "winning_price_usd", _str(a.winning_price_usd), str(highest)))
    if a.n_bids != len(a.bids):
        repairs.append(Repair(a.auction_id, "n_bids", _str(a.n_bids), str(len(a.bids))))
    if repairs:
        a = replace(a, winning_price_usd=highest, n_bids=len(a.bids))
    return a, repairs


def _str(value) -> str:
    return "" if value is None else str(value)


def normalize_auctions(auctions: Sequence[Auction]) -> tuple[list[Auction], list[Repair]]:
    """Regroup, re-sort and repair. A no-op on already-preprocessed auctions."""
    meta = {
        a.auction_id: AuctionMeta(
            seller_id=a.seller_id,
            product_url=a.product_url,
            product=a.product,
            start=a.start,
            duration_days=a.duration_days,
            opening_price_usd=a.opening_price_usd,
            declared_winning_price_usd=a.winning_price_usd,
            declared_n_bids=a.n_bids,
        )
        for a in auctions
    }
    grouped = group_auctions((b for a in auctions for b in a.bids), meta)
    out, repairs = [], []
    for a in grouped:
        fixed, notes = repair_consistency(a)
        out.append(fixed)
        repairs.extend(notes)
    return out, repairs


def preprocess_bids(records: Sequence[RawBidRecord], rates: RateTable) -> PreprocessResult:
    acct = Accounting(rows_in=len(records))
    unique = deduplicate(records)
    acct.duplicates_removed = len(records) - len(unique)
    kept, acct.masked_dropped = drop_masked(unique)

    converted: list[tuple[RawBidRecord, float, Decimal, Decimal, int]] = []
    defects: list[RecordDefect] = []
    for r in kept:
        try:
            duration = parse_duration(r.duration_text)
            amount = _cents(convert_currency(r.bid_amount, r.bid_currency, rates))
            opening = _cents(convert_currency(r.opening_price, r.bid_currency, rates))
            if amount <= 0:
                raise RecordError("bid_amount", f"non-positive bid amount {r.bid_amount}")
            t = compute_bid_time(r.auction_start_date, r.auction_start_time, r.bid_date, r.bid_time)
        except RecordError as exc:
            defects.append(RecordDefect(r.seller_id, r.product_url, r.bidder_id, exc.field, exc.reason))
            continue
        converted.append((r, t, amount, opening, duration))
    acct.defects = len(defects)

    ids = assign_auction_ids(r for r, *_ in converted)
    meta: dict[int, AuctionMeta] = {}
    bids: list[CleanBid] = []
    for r, t, amount, opening, duration in converted:
        auction_id = ids[(r.seller_id, r.product_url)]
        if auction_id not in meta:
            declared = r.declared_winning_price
            if declared is not None:
                declared = _cents(convert_currency(declared, r.bid_currency, rates))
            meta[auction_id] = AuctionMeta(
                seller_id=r.seller_id,
                product_url=r.product_url,
                product=r.product,
                start=datetime.combine(r.auction_start_date, r.auction_start_time),
                duration_days=duration,
                opening_price_usd=opening,
                declared_winning_price_usd=declared,
                declared_n_bids=r.declared_n_bids,
            )
        bids.append(CleanBid(auction_id, r.bidder_id, r.seller_id, t, amount, duration))
    acct.bids_out = len(bids)

    auctions, repairs = [], []
    for a in group_auctions(bids, meta):
        fixed, notes = repair_consistency(a)
        auctions.append(fixed)
        repairs.extend(notes)
    return PreprocessResult(auctions, repairs, defects, acct)


def preprocess_histories(records: Sequence[RawHistoryRecord]) -> HistoryResult:
    """Clean bidder-history rows. A bidder listed twice with different values keeps the first row."""
    acct = Accounting(rows_in=len(records))
    unique = deduplicate(records)
    acct.duplicates_removed = len(records) - len(unique)
    kept, acct.masked_dropped = drop_masked(unique)

    histories: dict[str, BidderHistory] = {}
    defects = []
    conflicts = 0
    for r in kept:
        try:
            activity = percentage_to_fraction(r.activity_with_seller_raw)
        except RecordError as exc:
            defects.append(RecordDefect("", "", r.bidder_id, exc.field, exc.reason))
            continue
        if r.bidder_id in histories:
            conflicts += 1
            continue
        histories[r.bidder_id] = BidderHistory(
            r.bidder_id, r.buyer_rating, r.items_bid_on_30d, r.n_bid_retractions_30d, activity
        )
    # conflicting rows are counted as duplicates for the balance
    acct.duplicates_removed += conflicts
    acct.defects = len(defects)
    acct.bids_out = len(histories)
    return HistoryResult(histories, defects, acct, conflicts)


# -- files ----------------------------------------------------------------


def _writer(fh, delimiter):
    return csv.writer(fh, delimiter=delimiter, lineterminator="\n")


def write_bids(auctions: Sequence[Auction], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh, delimiter)
        w.writerow(BID_COLUMNS)
        for a in auctions:
            for b in a.bids:
                w.writerow([
                    a.auction_id, b.bidder_id, b.seller_id, repr(b.bid_time), b.bid_amount_usd,
                    a.opening_price_usd, a.winning_price_usd, a.n_bids, b.duration_days,
                ])


def write_auction_meta(auctions: Sequence[Auction], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh, delimiter)
        w.writerow(AUCTION_META_COLUMNS)
        for a in auctions:
            w.writerow([
                a.auction_id, a.seller_id, a.product_url, a.product, a.start.isoformat(),
                a.duration_days, a.opening_price_usd, a.winning_price_usd, a.n_bids,
            ])


def write_histories(histories: Mapping[str, BidderHistory], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh, delimiter)
        w.writerow(HISTORY_COLUMNS)
        for h in sorted(histories.values(), key=lambda h: h.bidder_id):
            w.writerow([
                h.bidder_id, h.buyer_rating, h.items_bid_on_30d, h.n_bid_retractions_30d,
                repr(h.activity_with_seller),
            ])


def write_repairs(repairs: Sequence[Repair], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh, delimiter)
        w.writerow(["auction_id", "field", "old", "new"])
        for r in repairs:
            w.writerow([r.auction_id, r.field, r.old, r.new])


def write_record_defects(defects: Sequence[RecordDefect], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh, delimiter)
        w.writerow(["seller_id", "product_url", "bidder_id", "field", "reason"])
        for d in defects:
            w.writerow([d.seller_id, d.product_url, d.bidder_id, d.field, d.reason])


def _read_dicts(path: str | Path, delimiter: str, expected: Sequence[str]) -> list[dict[str, str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            if tuple(reader.fieldnames or ()) != tuple(expected):
                raise InputError(f"{path}: header does not match {','.join(expected)}")
            return list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def load_auctions(bids_path: str | Path, meta_path: str | Path, delimiter: str = ",") -> list[Auction]:
    """Read back the files written by :func:`write_bids` and :func:`write_auction_meta`."""
    meta_rows = _read_dicts(meta_path, delimiter, AUCTION_META_COLUMNS)
    bid_rows = _read_dicts(bids_path, delimiter, BID_COLUMNS)
    bids: dict[int, list[CleanBid]] = {}
    for row in bid_rows:
        b = CleanBid(
            auction_id=int(row["auction_id"]),
            bidder_id=row["bidder_id"],
            seller_id=row["seller_id"],
            bid_time=float(row["bid_time"]),
            bid_amount_usd=Decimal(row["bid_amount_usd"]),
            duration_days=int(row["duration_days"]),
        )
        bids.setdefault(b.auction_id, []).append(b)
    auctions = []
    for row in meta_rows:
        auction_id = int(row["auction_id"])
        auctions.append(
            Auction(
                auction_id=auction_id,
                seller_id=row["seller_id"],
                product_url=row["product_url"],
                product=row["product"],
                start=datetime.fromisoformat(row["start"]),
                duration_days=int(row["duration_days"]),
                opening_price_usd=Decimal(row["opening_price_usd"]),
                winning_price_usd=Decimal(row["winning_price_usd"]),
                n_bids=int(row["n_bids"]),
                bids=tuple(bids.pop(auction_id, ())),
            )
        )
    if bids:
        raise InputError(f"{bids_path}: bids for unknown auctions {sorted(bids)}")
    return auctions


def load_histories(path: str | Path, delimiter: str = ",") -> dict[str, BidderHistory]:
    out = {}
    for row in _read_dicts(path, delimiter, HISTORY_COLUMNS):
        h = BidderHistory(
            bidder_id=row["bidder_id"],
            buyer_rating=int(row["buyer_rating"]),
            items_bid_on_30d=int(row["items_bid_on_30d"]),
            n_bid_retractions_30d=int(row["n_bid_retractions_30d"]),
            activity_with_seller=float(row["activity_with_seller"]),
        )
        out[h.bidder_id] = h
    return out
