"""Seeded synthetic auctions with planted shill bidders.

Output uses the raw ingest schema, so generated files go through the same
path as scraped data. Each auction draws from its own sub-seeded RNG, which
keeps output identical for a given seed regardless of generation order.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Mapping, Sequence

from shillbid.ingest import RawBidRecord, RawHistoryRecord
from shillbid.metrics import SBSample
from shillbid.preprocess import DURATIONS, SECONDS_PER_DAY, Auction

CENT = Decimal("0.01")


@dataclass(frozen=True)
class ShillProfile:
    early_bid_fraction: float = 0.1
    stop_fraction: float = 0.8
    bid_share_target: float = 0.5
    target_seller: str = ""
    avoid_winning: bool = True
    zero_rating: bool = True
    items_30d: int = 8
    retractions: int = 0


@dataclass
class SynthConfig:
    n_auctions: int = 200
    n_honest_bidders: int = 300
    n_shills: int = 20
    n_sellers: int = 40
    n_products: int = 4
    durations: tuple[int, ...] = DURATIONS
    opening_price_range: tuple[float, float] = (1.0, 300.0)
    increment_range: tuple[float, float] = (1.0, 25.0)
    # distinct honest bidders per auction
    honest_participants: tuple[int, int] = (4, 12)
    # per-bidder bid count is 1 + Geometric(honest_bid_p) failures, capped
    honest_bid_p: float = 0.5
    max_bids_per_bidder: int = 10
    shill: ShillProfile = field(default_factory=ShillProfile)
    auctions_per_shill: int = 6
    start: date = date(2017, 3, 31)
    window_days: int = 90
    foreign_rate: float = 0.0
    rates: Mapping[str, float] = field(
        default_factory=lambda: {"CAD": 0.74, "GBP": 1.28, "EUR": 1.07}
    )
    # planted defects, all off by default except declared-aggregate drift
    inconsistency_rate: float = 0.1
    duplicate_rate: float = 0.0
    masked_rate: float = 0.0
    anomaly_rate: float = 0.0
    # honest bids placed before the start or after the close (shill-free auctions only)
    out_of_window_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        p = self.shill
        lo, hi = self.honest_participants
        if self.n_auctions < 1 or self.n_honest_bidders < 1 or self.n_shills < 0:
            raise ValueError("need at least one auction and one honest bidder")
        if not 1 <= lo <= hi:
            raise ValueError("honest_participants must satisfy 1 <= lo <= hi")
        if hi > self.n_honest_bidders:
            raise ValueError("honest_participants exceeds the honest bidder pool")
        if not set(self.durations) <= set(DURATIONS) or not self.durations:
            raise ValueError(f"durations must be drawn from {DURATIONS}")
        if not 0.0 <= p.early_bid_fraction <= p.stop_fraction <= 1.0:
            raise ValueError("shill profile needs 0 <= early_bid_fraction <= stop_fraction <= 1")
        if not 0.0 < p.bid_share_target < 1.0:
            # every auction has at least one honest participant besides the shill
            raise ValueError("bid_share_target must be in (0, 1)")
        if p.avoid_winning and p.stop_fraction >= 1.0:
            raise ValueError("avoid_winning needs stop_fraction < 1 to leave room for a later honest bid")
        if self.n_shills and self.n_sellers < 1:
            raise ValueError("shills need sellers to target")
        if not 0.0 < self.honest_bid_p <= 1.0:
            raise ValueError("honest_bid_p must be in (0, 1]")


@dataclass
class SyntheticData:
    auction_records: list[RawBidRecord]
    history_records: list[RawHistoryRecord]
    truth: dict[str, str]
    profiles: dict[str, ShillProfile]
    # shill id -> {product_url: total bids in that auction}
    shill_auctions: dict[str, dict[str, int]]


def _bidder_ids(rng: random.Random, n: int) -> list[str]:
    letters = "abcdefghijklmnopqrstuvwxyz0123456789"
    ids = set()
    while len(ids) < n:
        ids.add(f"{rng.choice(letters)}***{rng.choice(letters)}{rng.randrange(1000):03d}")
    out = sorted(ids)
    rng.shuffle(out)
    return out


def _money(x: float) -> Decimal:
    return Decimal(repr(x)).quantize(CENT, rounding=ROUND_HALF_EVEN)


def _geometric(rng: random.Random, p: float, cap: int) -> int:
    n = 1
    while n < cap and rng.random() > p:
        n += 1
    return n


def _displace(rng: random.Random, second: int, d_sec: int) -> int:
    if rng.random() < 0.5:
        return -rng.randint(1, SECONDS_PER_DAY)
    return d_sec + rng.randint(1, d_sec)


def _assign_shills(cfg: SynthConfig, sellers: Sequence[str], shills: Sequence[str]):
    """Give each shill up to ``auctions_per_shill`` auctions of its target seller."""
    by_seller: dict[str, list[int]] = {}
    for j in range(cfg.n_auctions):
        by_seller.setdefault(sellers[j % len(sellers)], []).append(j)
    taken: dict[int, str] = {}
    profiles = {}
    for k, shill in enumerate(shills):
        seller = sellers[k % len(sellers)]
        profiles[shill] = replace(cfg.shill, target_seller=seller)
        free = [j for j in by_seller.get(seller, []) if j not in taken]
        for j in free[: cfg.auctions_per_shill]:
            taken[j] = shill
    return taken, profiles


def _auction_events(cfg, rng, honest_pool, shill, profile, d_sec):
    """Bid events ``(second, bidder)`` in final order, plus the count of shill bids."""
    n_honest = rng.randint(*cfg.honest_participants)
    events = []
    for bidder in rng.sample(honest_pool, n_honest):
        for _ in range(_geometric(rng, cfg.honest_bid_p, cfg.max_bids_per_bidder)):
            events.append((rng.randint(0, d_sec), bidder))
    if shill is None:
        return sorted(events), 0

    # one second of margin keeps the float bounds strict
    early_sec = max(0, math.floor(profile.early_bid_fraction * d_sec) - 1)
    stop_sec = max(early_sec, math.floor(profile.stop_fraction * d_sec) - 1)
    if profile.avoid_winning:
        i = max(range(len(events)), key=lambda i: events[i][0])
        if events[i][0] <= stop_sec:
            events[i] = (rng.randint(stop_sec + 1, d_sec), events[i][1])
    s = profile.bid_share_target
    n_shill = max(1, math.ceil(s * len(events) / (1.0 - s) - 1e-9))
    first = rng.randint(0, early_sec)
    events.append((first, shill))
    for _ in range(n_shill - 1):
        events.append((rng.randint(first, stop_sec), shill))
    # on equal seconds the honest bid goes last, so a shill never takes the lead at the close
    return sorted(events, key=lambda e: (e[0], e[1] != shill, e[1])), n_shill


def generate(cfg: SynthConfig) -> SyntheticData:
    cfg.validate()
    rng = random.Random(cfg.seed)
    ids = _bidder_ids(rng, cfg.n_honest_bidders + cfg.n_shills)
    shills = ids[: cfg.n_shills]
    honest = sorted(ids[cfg.n_shills:])
    sellers = [f"seller{i:03d}" for i in range(max(1, cfg.n_sellers))]
    products = [f"Apple-iPhone-7-{v}" for v in ("32GB", "128GB", "256GB", "Plus-128GB", "Plus-256GB")]
    products = (products * (cfg.n_products // len(products) + 1))[: max(1, cfg.n_products)]
    taken, profiles = _assign_shills(cfg, sellers, shills)
    rates = {k: Decimal(str(v)) for k, v in cfg.rates.items()}
    window = cfg.window_days * SECONDS_PER_DAY

    records: list[RawBidRecord] = []
    shill_auctions: dict[str, dict[str, int]] = {s: {} for s in shills}
    for j in range(cfg.n_auctions):
        arng = random.Random(f"{cfg.seed}:auction:{j}")
        seller = sellers[j % len(sellers)]
        product = products[arng.randrange(len(products))]
        url = f"https://www.ebay.com/itm/{product}-/{152506000000 + j}"
        start = datetime.combine(cfg.start, datetime.min.time()) + timedelta(
            seconds=arng.randrange(window)
        )
        duration = arng.choice(cfg.durations)
        d_sec = duration * SECONDS_PER_DAY
        currency = "USD"
        if cfg.foreign_rate and arng.random() < cfg.foreign_rate:
            currency = arng.choice(sorted(rates))
        shill = taken.get(j)
        events, _ = _auction_events(cfg, arng, honest, shill, profiles.get(shill), d_sec)
        if shill is not None:
            shill_auctions[shill][url] = len(events)
        elif cfg.out_of_window_rate:
            events = sorted(
                (_displace(arng, second, d_sec) if arng.random() < cfg.out_of_window_rate else second, b)
                for second, b in events
            )

        opening = _money(arng.uniform(*cfg.opening_price_range))
        amounts, price = [], opening
        for _ in events:
            price += _money(arng.uniform(*cfg.increment_range))
            amounts.append(price)
        if shill is not None and len(amounts) > 2 and arng.random() < cfg.anomaly_rate:
            # an out-of-order lower bid, as seen on the live site
            i = arng.randrange(1, len(amounts) - 1)
            amounts[i] = max(CENT, amounts[i - 1] - _money(arng.uniform(1, 60)))

        declared_win, declared_n = max(amounts), len(events)
        if arng.random() < cfg.inconsistency_rate:
            declared_win = max(CENT, declared_win - _money(arng.uniform(1, 80)))
            declared_n += arng.randint(1, 10)

        def local(usd: Decimal) -> Decimal:
            if currency == "USD":
                return usd
            return (usd / rates[currency]).quantize(CENT, rounding=ROUND_HALF_EVEN)

        for (second, bidder), amount in zip(events, amounts):
            when = start + timedelta(seconds=second)
            if cfg.masked_rate and arng.random() < cfg.masked_rate:
                bidder = arng.choice(("", "****", "*****"))
            rec = RawBidRecord(
                product_url=url,
                seller_id=seller,
                bidder_id=bidder,
                bid_amount=local(amount),
                bid_currency=currency,
                bid_date=when.date(),
                bid_time=when.time(),
                auction_start_date=start.date(),
                auction_start_time=start.time(),
                duration_text=f"{duration} Day" + ("s" if duration != 1 else ""),
                opening_price=local(opening),
                declared_winning_price=local(declared_win),
                declared_n_bids=declared_n,
                product=product,
            )
            records.append(rec)
            if cfg.duplicate_rate and arng.random() < cfg.duplicate_rate:
                records.append(rec)

    hrng = random.Random(f"{cfg.seed}:history")
    histories = []
    for bidder in sorted(ids):
        if bidder in profiles:
            p = profiles[bidder]
            rating = 0 if p.zero_rating else hrng.randint(1, 50)
            histories.append(RawHistoryRecord(bidder, rating, p.items_30d, p.retractions, "100%"))
        else:
            rating = 0 if hrng.random() < 0.08 else int(hrng.lognormvariate(3.0, 1.5))
            retractions = hrng.randint(1, 3) if hrng.random() < 0.07 else 0
            histories.append(
                RawHistoryRecord(
                    bidder, rating, hrng.randint(1, 30), retractions, f"{hrng.randint(1, 100)}%"
                )
            )

    truth = {b: ("shill" if b in profiles else "honest") for b in sorted(ids)}
    return SyntheticData(records, histories, truth, profiles, shill_auctions)


@dataclass(frozen=True)
class ShillBounds:
    """What a shill's samples must satisfy given how it was generated."""

    early_bidding_min: float
    last_bidding_min: float
    # product_url -> lower bound on bidding_ratio in that auction
    bidding_ratio_min: dict[str, float]
    winning_ratio: float | None
    brbi: float | None

    def violations(self, sample: SBSample, product_url: str) -> list[str]:
        out = []
        if sample.early_bidding < self.early_bidding_min:
            out.append(f"early_bidding {sample.early_bidding} < {self.early_bidding_min}")
        if sample.last_bidding < self.last_bidding_min:
            out.append(f"last_bidding {sample.last_bidding} < {self.last_bidding_min}")
        floor = self.bidding_ratio_min.get(product_url)
        if floor is not None and sample.bidding_ratio < floor:
            out.append(f"bidding_ratio {sample.bidding_ratio} < {floor}")
        if self.winning_ratio is not None and sample.winning_ratio != self.winning_ratio:
            out.append(f"winning_ratio {sample.winning_ratio} != {self.winning_ratio}")
        if self.brbi is not None and sample.brbi != self.brbi:
            out.append(f"brbi {sample.brbi} != {self.brbi}")
        return out


def expected_metrics(
    truth: Mapping[str, str], data: SyntheticData, p_min: int = 4
) -> dict[str, ShillBounds]:
    """Bounds each shill's samples must meet, derived from its profile.

    The bounds assume ``masked_rate = 0``: a masked honest closing bid is
    dropped in preprocessing, which can hand the win to a shill.
    """
    bounds = {}
    for bidder, label in truth.items():
        if label != "shill":
            continue
        p = data.profiles[bidder]
        auctions = data.shill_auctions.get(bidder, {})
        bounds[bidder] = ShillBounds(
            early_bidding_min=1.0 - p.early_bid_fraction,
            last_bidding_min=1.0 - p.stop_fraction,
            bidding_ratio_min={
                url: p.bid_share_target - 1.0 / n for url, n in auctions.items()
            },
            winning_ratio=1.0 if p.avoid_winning and len(auctions) >= p_min else None,
            brbi=1.0 if p.zero_rating and p.items_30d >= 5 else None,
        )
    return bounds


def check_shills(
    bounds: Mapping[str, ShillBounds],
    samples: Sequence[SBSample],
    auctions: Sequence[Auction],
) -> dict[str, list[str]]:
    """Violations per shill; an empty list means every bound held."""
    urls = {a.auction_id: a.product_url for a in auctions}
    out: dict[str, list[str]] = {b: [] for b in bounds}
    for s in samples:
        if s.bidder_id in bounds:
            out[s.bidder_id] += bounds[s.bidder_id].violations(s, urls[s.auction_id])
    return out


def write_truth(truth: Mapping[str, str], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["bidder_id", "label"])
        for bidder in sorted(truth):
            w.writerow([bidder, truth[bidder]])


def read_truth(path: str | Path, delimiter: str = ",") -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["bidder_id"]: row["label"] for row in csv.DictReader(fh, delimiter=delimiter)}
