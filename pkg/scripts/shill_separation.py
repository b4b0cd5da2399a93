#!/usr/bin/env python3
"""Measure how well the bidding-ratio feature separates planted shills.

Generates one synthetic dataset per seed, runs preprocess -> features in
memory and reports, per seed, the share of shills whose minimum bidding
ratio exceeds the chosen percentile of honest bidding ratios, plus the
number of shills that break their expected metric bounds.

    python scripts/shill_separation.py --seeds 0 1 2 3 4
"""

from __future__ import annotations

import argparse
import statistics
from dataclasses import replace

from shillbid.metrics import build_samples
from shillbid.preprocess import RateTable, preprocess_bids, preprocess_histories
from shillbid.synth import SynthConfig, check_shills, expected_metrics, generate


def separation(cfg: SynthConfig, percentile: int) -> tuple[float, float, int]:
    data = generate(cfg)
    result = preprocess_bids(data.auction_records, RateTable(cfg.rates))
    histories = preprocess_histories(data.history_records).histories
    samples = build_samples(result.auctions, histories)

    honest = [s.bidding_ratio for s in samples if data.truth[s.bidder_id] == "honest"]
    cut = statistics.quantiles(honest, n=100, method="inclusive")[percentile - 1]
    shill_min: dict[str, float] = {}
    for s in samples:
        if data.truth[s.bidder_id] == "shill":
            shill_min[s.bidder_id] = min(shill_min.get(s.bidder_id, 1.0), s.bidding_ratio)
    above = sum(1 for v in shill_min.values() if v > cut)
    violations = check_shills(expected_metrics(data.truth, data), samples, result.auctions)
    broken = sum(1 for v in violations.values() if v)
    return cut, above / max(1, len(shill_min)), broken


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--auctions", type=int, default=200)
    parser.add_argument("--honest", type=int, default=300)
    parser.add_argument("--shills", type=int, default=20)
    parser.add_argument("--share", type=float, default=0.5, help="shill bid_share_target")
    parser.add_argument("--percentile", type=int, default=90)
    args = parser.parse_args()

    base = SynthConfig(n_auctions=args.auctions, n_honest_bidders=args.honest, n_shills=args.shills)
    base = replace(base, shill=replace(base.shill, bid_share_target=args.share))
    print(f"seed  honest_p{args.percentile}  shills_above  bound_violations")
    for seed in args.seeds:
        cut, frac, broken = separation(replace(base, seed=seed), args.percentile)
        print(f"{seed:>4}  {cut:>10.4f}  {frac:>12.1%}  {broken:>16d}")


if __name__ == "__main__":
    main()
