from datetime import date, time
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from conftest import raw_bid, write_csv
from shillbid.errors import InputError
from shillbid.ingest import (
    AUCTION_COLUMNS,
    RawHistoryRecord,
    is_masked_id,
    parse_auction_file,
    parse_history_file,
    write_auction_file,
    write_defects,
    write_history_file,
)

HEADER = ",".join(AUCTION_COLUMNS.values())
ROW = "u1,s1,{bidder},{amount},USD,2017-04-02,06:52:08,2017-04-01,00:00:00,7 Days,10.00,300.00,5"


def auction_file(tmp_path, rows):
    return write_csv(tmp_path / "a.csv", "\n".join([HEADER, *rows]) + "\n")


def test_header_only_file(tmp_path):
    records, report = parse_auction_file(auction_file(tmp_path, []))
    assert records == []
    assert report.rows_read == 0 and report.rows_accepted == 0


def test_three_rows_pass_through(tmp_path):
    rows = [ROW.format(bidder=f"b{i}", amount=100 + i) for i in range(3)]
    records, report = parse_auction_file(auction_file(tmp_path, rows))
    assert report.rows_accepted == 3
    assert [r.bidder_id for r in records] == ["b0", "b1", "b2"]
    r = records[0]
    assert r.bid_amount == Decimal("100")
    assert r.bid_date == date(2017, 4, 2) and r.bid_time == time(6, 52, 8)
    assert r.duration_text == "7 Days"
    assert r.declared_n_bids == 5


def test_bad_amount_is_a_defect_not_fatal(tmp_path):
    rows = [ROW.format(bidder=f"b{i}", amount="abc" if i == 2 else 50) for i in range(5)]
    records, report = parse_auction_file(auction_file(tmp_path, rows))
    assert len(records) == 4
    assert [(d.row_number, d.field) for d in report.defects] == [(3, "bid_amount")]
    assert report.rows_read == report.rows_accepted + report.rows_rejected


@pytest.mark.parametrize(
    "field_value, field",
    [("-5", "bid_amount"), ("NaN", "bid_amount"), ("inf", "bid_amount")],
)
def test_non_finite_or_negative_amounts(tmp_path, field_value, field):
    _, report = parse_auction_file(auction_file(tmp_path, [ROW.format(bidder="b", amount=field_value)]))
    assert report.rows_accepted == 0
    assert report.defects[0].field == field


def test_unsupported_currency_and_can_alias(tmp_path):
    rows = [
        ROW.format(bidder="b1", amount=1).replace("USD", "JPY"),
        ROW.format(bidder="b2", amount=1).replace("USD", "CAN"),
    ]
    records, report = parse_auction_file(auction_file(tmp_path, rows))
    assert [d.field for d in report.defects] == ["bid_currency"]
    assert records[0].bid_currency == "CAD"


def test_short_row_is_a_defect(tmp_path):
    records, report = parse_auction_file(auction_file(tmp_path, ["u1,s1,b1"]))
    assert records == [] and report.defects[0].field == "_row"


def test_missing_mandatory_column_is_fatal(tmp_path):
    path = write_csv(tmp_path / "a.csv", "product_url,seller_id\nu,s\n")
    with pytest.raises(InputError, match="missing mandatory column"):
        parse_auction_file(path)


def test_unreadable_file_is_fatal(tmp_path):
    with pytest.raises(InputError):
        parse_auction_file(tmp_path / "nope.csv")


def test_schema_maps_custom_headers(tmp_path):
    header = HEADER.replace("bid_amount", "Bid Amount")
    path = write_csv(tmp_path / "a.csv", header + "\n" + ROW.format(bidder="b", amount=7) + "\n")
    records, _ = parse_auction_file(path, {"bid_amount": "Bid Amount"})
    assert records[0].bid_amount == Decimal(7)


def test_semicolon_delimiter(tmp_path):
    path = write_csv(
        tmp_path / "a.csv",
        HEADER.replace(",", ";") + "\n" + ROW.format(bidder="b", amount=7).replace(",", ";") + "\n",
    )
    records, _ = parse_auction_file(path, delimiter=";")
    assert len(records) == 1


def test_extra_columns_ride_along(fixtures_dir):
    records, _ = parse_auction_file(fixtures_dir / "auctions_small.csv")
    assert records[0].extra_fields == (("item_condition", "Used"),)


def test_history_row_mapping(tmp_path):
    path = write_csv(
        tmp_path / "h.csv",
        "bidder_id,buyer_rating,items_bid_on_30d,n_bid_retractions_30d,activity_with_seller\n"
        "b1,0,8,1,30%\n",
    )
    records, report = parse_history_file(path)
    assert records == [RawHistoryRecord("b1", 0, 8, 1, "30%")]
    assert report.rows_accepted == 1


def test_history_negative_count_and_duplicates(fixtures_dir):
    records, report = parse_history_file(fixtures_dir / "history_small.csv")
    assert [(d.field, d.reason) for d in report.defects] == [
        ("n_bid_retractions_30d", "negative: '-1'")
    ]
    # duplicates are preprocess's concern
    assert [r.bidder_id for r in records].count("w***w") == 2


@pytest.mark.parametrize(
    "bidder_id, masked",
    [("", True), ("   ", True), ("****", True), ("* * *", True), ("a***e", False), ("****8", False)],
)
def test_is_masked_id(bidder_id, masked):
    assert is_masked_id(bidder_id) is masked


def test_parse_is_deterministic(fixtures_dir):
    first = parse_auction_file(fixtures_dir / "auctions_small.csv")
    second = parse_auction_file(fixtures_dir / "auctions_small.csv")
    assert first == second


def test_defect_report_format(tmp_path):
    rows = [ROW.format(bidder="b", amount="abc")]
    _, report = parse_auction_file(auction_file(tmp_path, rows))
    write_defects(report, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text() == (
        "row_number,field,reason\n1,bid_amount,not a number: 'abc'\n"
    )


ids = st.text(alphabet="abcxyz*019", min_size=1, max_size=6).filter(lambda s: not is_masked_id(s))
amounts = st.decimals(min_value=0, max_value=10_000, places=2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(ids, amounts), min_size=0, max_size=8))
def test_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "a.csv"
    records = [raw_bid(bidder=b, amount=str(a), winning="5.00", n_bids=3) for b, a in rows]
    write_auction_file(records, path)
    parsed, report = parse_auction_file(path)
    assert parsed == records
    assert report.defects == []


def test_round_trip_keeps_extras_and_history(tmp_path, fixtures_dir):
    records, _ = parse_auction_file(fixtures_dir / "auctions_small.csv")
    write_auction_file(records, tmp_path / "a.csv")
    assert parse_auction_file(tmp_path / "a.csv")[0] == records

    history, _ = parse_history_file(fixtures_dir / "history_small.csv")
    write_history_file(history, tmp_path / "h.csv")
    assert parse_history_file(tmp_path / "h.csv")[0] == history
