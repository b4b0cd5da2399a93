"""The nine shill-bidding pattern scores, one sample per (auction, bidder).

Every score is oriented so that higher means more suspicious. Early and last
bidding are left unclamped: bids outside the auction window push them out of
[0, 1], and the filter stage drops those samples.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import astuple, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from shillbid import FEATURES, SAMPLE_HEADER
from shillbid.errors import InputError
from shillbid.preprocess import Auction, BidderHistory

METRIC_WEIGHTS = {
    "opening_price_m": "Low",
    "early_bidding": "Low",
    "last_bidding": "Medium",
    "bidding_ratio": "Medium",
    "auction_bids": "Low",
    "buyer_tendency": "Medium",
    "winning_ratio": "High",
    "brbi": "Low",
    "bid_retraction": "Medium",
}

BRBI_ZERO_RATING_ITEMS = 5
BR_COLLUSION_ACTIVITY = 0.7


@dataclass(frozen=True)
class SBSample:
    auction_id: int
    bidder_id: str
    opening_price_m: float
    early_bidding: float
    last_bidding: float
    bidding_ratio: float
    auction_bids: float
    buyer_tendency: float
    winning_ratio: float
    brbi: float
    bid_retraction: float

    def features(self) -> tuple[float, ...]:
        return astuple(self)[2:]


@dataclass
class MetricConfig:
    p_min: int = 4
    # neutral score for bidders without retractions; 0.0 makes them score 0
    br_default: float = 0.5
    # None -> mean winning price over the dataset
    reference_price: float | None = None
    brbi_missing: float = 0.0


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


# -- single metrics -------------------------------------------------------


def opening_price_metric(a: Auction, ref_price: float) -> float:
    if ref_price <= 0:
        raise ValueError("reference price must be positive")
    return _clamp(1.0 - float(a.opening_price_usd) / ref_price)


def _bidder_times(a: Auction, bidder_id: str) -> list[float]:
    times = [b.bid_time for b in a.bids if b.bidder_id == bidder_id]
    if not times:
        raise ValueError(f"{bidder_id!r} did not bid in auction {a.auction_id}")
    return times


def early_bidding(bidder_id: str, a: Auction) -> float:
    return 1.0 - min(_bidder_times(a, bidder_id)) / a.duration_days


def last_bidding(bidder_id: str, a: Auction) -> float:
    return 1.0 - max(_bidder_times(a, bidder_id)) / a.duration_days


def bidding_ratio(bidder_id: str, a: Auction) -> float:
    n = a.n_bids if a.n_bids is not None else len(a.bids)
    if n < 1:
        raise ValueError(f"auction {a.auction_id} has no bids")
    return sum(1 for b in a.bids if b.bidder_id == bidder_id) / n


def auction_bids(a: Auction, concurrent: Sequence[Auction]) -> float:
    """How far ``a`` exceeds the mean bid count of its concurrent auctions."""
    others = [c for c in concurrent if c.auction_id != a.auction_id]
    if not others or not a.n_bids:
        return 0.0
    mean = sum(c.n_bids for c in others) / len(others)
    return _clamp(1.0 - mean / a.n_bids)


def buyer_tendency(bidder_id: str, seller_id: str, ctx: DatasetContext) -> float:
    total = len(ctx.participation.get(bidder_id, ()))
    if total == 0:
        raise ValueError(f"{bidder_id!r} has no participations")
    return ctx.bidder_seller_auctions[(bidder_id, seller_id)] / total


def winning_ratio(bidder_id: str, ctx: DatasetContext, p_min: int = 4) -> float:
    participations = len(ctx.participation.get(bidder_id, ()))
    if participations < p_min or participations == 0:
        return 0.0
    return 1.0 - ctx.wins[bidder_id] / participations


def brbi(buyer_rating: int, items_30d: int) -> float:
    """Buyer rating weighed against the number of items bid on in 30 days."""
    if buyer_rating < 0 or items_30d < 0:
        raise ValueError("buyer_rating and items_30d must be non-negative")
    if buyer_rating == 0:
        return 1.0 if items_30d >= BRBI_ZERO_RATING_ITEMS else 0.0
    if buyer_rating < items_30d:
        return buyer_rating / items_30d
    return 0.0


def bid_retraction(n_retractions: int, activity_with_seller: float, default: float = 0.5) -> float:
    """Retractions combined with concentration on one seller.

    The rule is kept literal: with the stock ``default`` the only reachable
    values are 0.5 and 1.0.
    """
    if n_retractions < 0:
        raise ValueError("n_retractions must be non-negative")
    if not 0.0 <= activity_with_seller <= 1.0:
        raise ValueError(f"activity_with_seller out of [0,1]: {activity_with_seller}")
    score = default
    if n_retractions >= 1 and activity_with_seller == 1.0:
        score = 1.0
    elif n_retractions >= 1 and activity_with_seller >= BR_COLLUSION_ACTIVITY:
        score = 0.5
    return score


# -- dataset context ------------------------------------------------------


def find_winner(a: Auction) -> str:
    """Bidder holding the highest bid; the earliest one on a tie."""
    best = a.bids[0]
    for b in a.bids[1:]:
        if b.bid_amount_usd > best.bid_amount_usd:
            best = b
    return best.bidder_id


def overlaps(a: Auction, b: Auction) -> bool:
    return a.start < b.end and b.start < a.end


@dataclass
class DatasetContext:
    auctions: dict[int, Auction]
    participation: dict[str, list[int]]
    bidder_seller_auctions: Counter
    winners: dict[int, str]
    wins: Counter
    concurrent: dict[int, list[Auction]] = field(default_factory=dict)

    @property
    def mean_winning_price(self) -> float:
        prices = [float(a.winning_price_usd) for a in self.auctions.values()]
        return sum(prices) / len(prices)

    @classmethod
    def build(cls, auctions: Sequence[Auction]) -> DatasetContext:
        participation: dict[str, list[int]] = defaultdict(list)
        pairs: Counter = Counter()
        winners = {}
        wins: Counter = Counter()
        by_product: dict[str, list[Auction]] = defaultdict(list)
        for a in auctions:
            for bidder in sorted({b.bidder_id for b in a.bids}):
                participation[bidder].append(a.auction_id)
                pairs[(bidder, a.seller_id)] += 1
            winners[a.auction_id] = find_winner(a)
            wins[winners[a.auction_id]] += 1
            by_product[a.product_key].append(a)

        concurrent: dict[int, list[Auction]] = {}
        for group in by_product.values():
            group = sorted(group, key=lambda a: (a.start, a.auction_id))
            for i, a in enumerate(group):
                found = []
                for b in group[i + 1:]:
                    if b.start >= a.end:
                        break
                    found.append(b)
                concurrent.setdefault(a.auction_id, []).extend(found)
                for b in found:
                    concurrent.setdefault(b.auction_id, []).append(a)
        for a in auctions:
            concurrent.setdefault(a.auction_id, [])
            concurrent[a.auction_id].sort(key=lambda c: c.auction_id)

        return cls(
            auctions={a.auction_id: a for a in auctions},
            participation=dict(participation),
            bidder_seller_auctions=pairs,
            winners=winners,
            wins=wins,
            concurrent=concurrent,
        )


def build_samples(
    auctions: Sequence[Auction],
    histories: Mapping[str, BidderHistory],
    cfg: MetricConfig | None = None,
) -> list[SBSample]:
    cfg = cfg or MetricConfig()
    if not auctions:
        return []
    ctx = DatasetContext.build(auctions)
    ref = cfg.reference_price if cfg.reference_price is not None else ctx.mean_winning_price

    samples = []
    for a in sorted(auctions, key=lambda a: a.auction_id):
        opening = opening_price_metric(a, ref)
        crowd = auction_bids(a, ctx.concurrent[a.auction_id])
        for bidder in sorted({b.bidder_id for b in a.bids}):
            h = histories.get(bidder)
            if h is None:
                rating_score, retraction_score = cfg.brbi_missing, cfg.br_default
            else:
                rating_score = brbi(h.buyer_rating, h.items_bid_on_30d)
                retraction_score = bid_retraction(
                    h.n_bid_retractions_30d, h.activity_with_seller, cfg.br_default
                )
            samples.append(
                SBSample(
                    auction_id=a.auction_id,
                    bidder_id=bidder,
                    opening_price_m=opening,
                    early_bidding=early_bidding(bidder, a),
                    last_bidding=last_bidding(bidder, a),
                    bidding_ratio=bidding_ratio(bidder, a),
                    auction_bids=crowd,
                    buyer_tendency=buyer_tendency(bidder, a.seller_id, ctx),
                    winning_ratio=winning_ratio(bidder, ctx, cfg.p_min),
                    brbi=rating_score,
                    bid_retraction=retraction_score,
                )
            )
    return samples


# -- files ----------------------------------------------------------------


def format_real(x: float) -> str:
    s = f"{x:.5f}"
    return "0.00000" if s == "-0.00000" else s


def write_samples(samples: Sequence[SBSample], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(SAMPLE_HEADER)
        for s in samples:
            w.writerow([s.auction_id, s.bidder_id, *(format_real(x) for x in s.features())])


def read_samples(path: str | Path, delimiter: str = ",") -> list[SBSample]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            header = next(reader, None)
            if header is None or tuple(header) != SAMPLE_HEADER:
                raise InputError(f"{path}: expected header {','.join(SAMPLE_HEADER)}")
            out = []
            for n, row in enumerate(reader, start=1):
                if not row:
                    continue
                try:
                    out.append(SBSample(int(row[0]), row[1], *(float(x) for x in row[2:])))
                except (ValueError, TypeError) as exc:
                    raise InputError(f"{path}: bad sample row {n}: {exc}") from exc
            return out
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


assert tuple(METRIC_WEIGHTS) == FEATURES
