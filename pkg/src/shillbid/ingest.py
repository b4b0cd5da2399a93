"""Parse raw auction-bid and bidder-history files into typed records.

Rows that fail validation are skipped and logged in a :class:`ParseReport`;
only an unreadable file or a missing mandatory column is fatal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from datetime import date, time
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Mapping, Sequence

from shillbid.errors import InputError, RecordError

SUPPORTED_CURRENCIES = ("USD", "CAD", "GBP", "EUR")
# eBay listings label Canadian dollars "CAN".
CURRENCY_ALIASES = {"CAN": "CAD", "US": "USD"}

# logical field -> default header name
AUCTION_COLUMNS = {
    "product_url": "product_url",
    "seller_id": "seller_id",
    "bidder_id": "bidder_id",
    "bid_amount": "bid_amount",
    "bid_currency": "currency",
    "bid_date": "bid_date",
    "bid_time": "bid_time",
    "auction_start_date": "start_date",
    "auction_start_time": "start_time",
    "duration_text": "duration",
    "opening_price": "opening_price",
    "declared_winning_price": "winning_price",
    "declared_n_bids": "n_bids",
}
# Used as the product key for concurrency when present; product_url otherwise.
AUCTION_OPTIONAL_COLUMNS = {"product": "product"}

HISTORY_COLUMNS = {
    "bidder_id": "bidder_id",
    "buyer_rating": "buyer_rating",
    "items_bid_on_30d": "items_bid_on_30d",
    "n_bid_retractions_30d": "n_bid_retractions_30d",
    "activity_with_seller_raw": "activity_with_seller",
}


@dataclass(frozen=True)
class RawBidRecord:
    product_url: str
    seller_id: str
    bidder_id: str
    bid_amount: Decimal
    bid_currency: str
    bid_date: date
    bid_time: time
    auction_start_date: date
    auction_start_time: time
    duration_text: str
    opening_price: Decimal
    declared_winning_price: Decimal | None
    declared_n_bids: int | None
    product: str = ""
    # (header, value) pairs for columns nothing downstream uses
    extra_fields: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class RawHistoryRecord:
    bidder_id: str
    buyer_rating: int
    items_bid_on_30d: int
    n_bid_retractions_30d: int
    activity_with_seller_raw: str


@dataclass
class Defect:
    row_number: int
    field: str
    reason: str


@dataclass
class ParseReport:
    """Row accounting for one parsed file. Row numbers count data rows from 1."""

    rows_read: int = 0
    rows_accepted: int = 0
    defects: list[Defect] = field(default_factory=list)
    n_columns: int = 0

    @property
    def rows_rejected(self) -> int:
        return len({d.row_number for d in self.defects})


def is_masked_id(bidder_id: str | None) -> bool:
    """True for ids that cannot identify anyone: empty, blank, or all '*'.

    Partial masks such as ``a***e`` still carry characters and stay usable.
    """
    if bidder_id is None:
        return True
    s = "".join(bidder_id.split())
    return s == "" or set(s) == {"*"}


# -- field parsers --------------------------------------------------------


def parse_decimal(text: str, name: str, *, optional: bool = False) -> Decimal | None:
    text = text.strip().replace(",", "").lstrip("$")
    if not text:
        if optional:
            return None
        raise RecordError(name, "missing value")
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise RecordError(name, f"not a number: {text!r}") from None
    if not value.is_finite():
        raise RecordError(name, f"not finite: {text!r}")
    if value < 0:
        raise RecordError(name, f"negative: {text!r}")
    return value


def parse_count(text: str, name: str, *, optional: bool = False) -> int | None:
    text = text.strip()
    if not text:
        if optional:
            return None
        raise RecordError(name, "missing value")
    try:
        value = int(text)
    except ValueError:
        raise RecordError(name, f"not an integer: {text!r}") from None
    if value < 0:
        raise RecordError(name, f"negative: {text!r}")
    return value


def parse_date(text: str, name: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise RecordError(name, f"not a YYYY-MM-DD date: {text!r}") from None


def parse_time(text: str, name: str) -> time:
    try:
        return time.fromisoformat(text.strip())
    except ValueError:
        raise RecordError(name, f"not a HH:MM[:SS] time: {text!r}") from None


def parse_currency(text: str, name: str = "bid_currency") -> str:
    code = text.strip().upper()
    code = CURRENCY_ALIASES.get(code, code)
    if code not in SUPPORTED_CURRENCIES:
        raise RecordError(name, f"unsupported currency: {text!r}")
    return code


# -- files ----------------------------------------------------------------


def _resolve_columns(
    header: Sequence[str],
    mandatory: Mapping[str, str],
    optional: Mapping[str, str],
    path: Path,
) -> tuple[dict[str, int], list[tuple[str, int]]]:
    index = {name.strip(): i for i, name in enumerate(header)}
    missing = [col for col in mandatory.values() if col not in index]
    if missing:
        raise InputError(f"{path}: missing mandatory column(s): {', '.join(missing)}")
    positions = {logical: index[col] for logical, col in mandatory.items()}
    for logical, col in optional.items():
        if col in index:
            positions[logical] = index[col]
    used = set(positions.values())
    extras = [(name.strip(), i) for i, name in enumerate(header) if i not in used]
    return positions, extras


def _read_rows(path: Path, delimiter: str):
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no header row")
    return rows[0], rows[1:]


def _parse_file(path, schema, defaults, optional, delimiter, build):
    path = Path(path)
    columns = {**defaults, **{k: v for k, v in (schema or {}).items() if k in defaults}}
    opt = {**optional, **{k: v for k, v in (schema or {}).items() if k in optional}}
    unknown = set(schema or {}) - set(defaults) - set(optional)
    if unknown:
        raise InputError(f"unknown schema field(s): {', '.join(sorted(unknown))}")
    header, rows = _read_rows(path, delimiter)
    positions, extras = _resolve_columns(header, columns, opt, path)

    records = []
    report = ParseReport(n_columns=len(header))
    for row_number, row in enumerate((r for r in rows if any(c.strip() for c in r)), start=1):
        report.rows_read += 1
        if len(row) != len(header):
            report.defects.append(
                Defect(row_number, "_row", f"expected {len(header)} fields, got {len(row)}")
            )
            continue
        values = {logical: row[i] for logical, i in positions.items()}
        errors: list[RecordError] = []
        record = build(values, tuple((name, row[i]) for name, i in extras), errors)
        if errors:
            report.defects.extend(Defect(row_number, e.field, e.reason) for e in errors)
            continue
        records.append(record)
        report.rows_accepted += 1
    return records, report


def _collect(errors: list[RecordError], fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except RecordError as exc:
        errors.append(exc)
        return None


def _build_bid(values, extras, errors) -> RawBidRecord | None:
    v = values
    parsed = dict(
        product_url=v["product_url"].strip(),
        seller_id=v["seller_id"].strip(),
        bidder_id=v["bidder_id"].strip(),
        bid_amount=_collect(errors, parse_decimal, v["bid_amount"], "bid_amount"),
        bid_currency=_collect(errors, parse_currency, v["bid_currency"]),
        bid_date=_collect(errors, parse_date, v["bid_date"], "bid_date"),
        bid_time=_collect(errors, parse_time, v["bid_time"], "bid_time"),
        auction_start_date=_collect(errors, parse_date, v["auction_start_date"], "auction_start_date"),
        auction_start_time=_collect(errors, parse_time, v["auction_start_time"], "auction_start_time"),
        duration_text=v["duration_text"].strip(),
        opening_price=_collect(errors, parse_decimal, v["opening_price"], "opening_price"),
        declared_winning_price=_collect(
            errors, parse_decimal, v["declared_winning_price"], "declared_winning_price", optional=True
        ),
        declared_n_bids=_collect(
            errors, parse_count, v["declared_n_bids"], "declared_n_bids", optional=True
        ),
        product=v.get("product", "").strip(),
        extra_fields=extras,
    )
    if not parsed["product_url"]:
        errors.append(RecordError("product_url", "missing value"))
    if not parsed["seller_id"]:
        errors.append(RecordError("seller_id", "missing value"))
    return None if errors else RawBidRecord(**parsed)


def _build_history(values, extras, errors) -> RawHistoryRecord | None:
    v = values
    parsed = dict(
        bidder_id=v["bidder_id"].strip(),
        buyer_rating=_collect(errors, parse_count, v["buyer_rating"], "buyer_rating"),
        items_bid_on_30d=_collect(errors, parse_count, v["items_bid_on_30d"], "items_bid_on_30d"),
        n_bid_retractions_30d=_collect(
            errors, parse_count, v["n_bid_retractions_30d"], "n_bid_retractions_30d"
        ),
        activity_with_seller_raw=v["activity_with_seller_raw"].strip(),
    )
    return None if errors else RawHistoryRecord(**parsed)


def parse_auction_file(
    path: str | Path, schema: Mapping[str, str] | None = None, delimiter: str = ","
) -> tuple[list[RawBidRecord], ParseReport]:
    """Parse a delimited auction-bid file.

    ``schema`` maps logical field names (keys of :data:`AUCTION_COLUMNS`) to
    the header names used in the file; unmapped fields use the defaults.
    """
    return _parse_file(
        path, schema, AUCTION_COLUMNS, AUCTION_OPTIONAL_COLUMNS, delimiter, _build_bid
    )


def parse_history_file(
    path: str | Path, schema: Mapping[str, str] | None = None, delimiter: str = ","
) -> tuple[list[RawHistoryRecord], ParseReport]:
    return _parse_file(path, schema, HISTORY_COLUMNS, {}, delimiter, _build_history)


# -- writers --------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (date, time)):
        return value.isoformat()
    return str(value)


def write_auction_file(
    records: Sequence[RawBidRecord],
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
) -> None:
    """Write records in canonical column order; parsing the result gives them back."""
    columns = {**AUCTION_COLUMNS, **{k: v for k, v in (schema or {}).items() if k in AUCTION_COLUMNS}}
    with_product = any(r.product for r in records)
    extra_names: list[str] = []
    for r in records:
        for name, _ in r.extra_fields:
            if name not in extra_names:
                extra_names.append(name)
    header = list(columns.values())
    if with_product:
        header.append((schema or {}).get("product", AUCTION_OPTIONAL_COLUMNS["product"]))
    header += extra_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = [_fmt(getattr(r, logical)) for logical in columns]
            if with_product:
                row.append(r.product)
            extra = dict(r.extra_fields)
            row += [extra.get(name, "") for name in extra_names]
            w.writerow(row)


def write_history_file(
    records: Sequence[RawHistoryRecord],
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
) -> None:
    columns = {**HISTORY_COLUMNS, **{k: v for k, v in (schema or {}).items() if k in HISTORY_COLUMNS}}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(columns.values())
        for r in records:
            w.writerow([_fmt(getattr(r, f.name)) for f in fields(r)])


def write_defects(report: ParseReport, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["row_number", "field", "reason"])
        for d in report.defects:
            w.writerow([d.row_number, d.field, d.reason])

