"""Outlier handling for the sample set.

Per-feature Tukey fences are computed and reported. Samples with any feature
outside [0, 1] are dropped whole; in-range outliers are kept and every
feature is then min-max rescaled over the surviving samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from shillbid import FEATURES
from shillbid.metrics import SBSample, format_real


@dataclass(frozen=True)
class Fences:
    q1: float
    q3: float
    iqr: float
    lower: float
    upper: float
    k: float

    def flags(self, x: float) -> bool:
        return x < self.lower or x > self.upper


@dataclass
class DatasetCounts:
    n_auctions: int
    n_bidders: int
    n_records: int

    @classmethod
    def of(cls, samples: Sequence[SBSample]) -> DatasetCounts:
        return cls(
            n_auctions=len({s.auction_id for s in samples}),
            n_bidders=len({s.bidder_id for s in samples}),
            n_records=len(samples),
        )


@dataclass
class FilterReport:
    samples_in: int = 0
    samples_dropped: int = 0
    samples_out: int = 0
    fences: dict[str, Fences] = field(default_factory=dict)
    flagged: dict[str, int] = field(default_factory=dict)
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    # (auction_id, bidder_id, offending features)
    dropped: list[tuple[int, str, tuple[str, ...]]] = field(default_factory=list)
    before: DatasetCounts | None = None
    after: DatasetCounts | None = None


def _median(xs: Sequence[float]) -> float:
    n = len(xs)
    mid = n // 2
    if n % 2:
        return xs[mid]
    return (xs[mid - 1] + xs[mid]) / 2


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """Tukey hinges ``(q1, median, q3)``.

    Each hinge is the median of one half of the sorted data; with an odd
    count both halves include the middle value.
    """
    if len(values) == 0:
        raise ValueError("quartiles of an empty sequence")
    xs = sorted(values)
    n = len(xs)
    half = (n + 1) // 2
    return _median(xs[:half]), _median(xs), _median(xs[n - half:])


def fences(values: Sequence[float], k: float = 1.5) -> Fences:
    if k <= 0:
        raise ValueError("fence multiplier k must be positive")
    q1, _, q3 = quartiles(values)
    iqr = q3 - q1
    return Fences(q1=q1, q3=q3, iqr=iqr, lower=q1 - k * iqr, upper=q3 + k * iqr, k=k)


def out_of_range(sample: SBSample) -> tuple[str, ...]:
    return tuple(
        name for name, x in zip(FEATURES, sample.features()) if not 0.0 <= x <= 1.0
    )


def drop_out_of_range(
    samples: Sequence[SBSample],
) -> tuple[list[SBSample], list[SBSample], list[tuple[int, str, tuple[str, ...]]]]:
    kept, dropped, offenders = [], [], []
    for s in samples:
        bad = out_of_range(s)
        if bad:
            dropped.append(s)
            offenders.append((s.auction_id, s.bidder_id, bad))
        else:
            kept.append(s)
    return kept, dropped, offenders


def minmax_rescale(
    samples: Sequence[SBSample],
) -> tuple[list[SBSample], dict[str, tuple[float, float]]]:
    """Rescale each feature to [0, 1]; a constant feature maps to 0."""
    if not samples:
        raise ValueError("cannot rescale an empty sample set")
    ranges = {}
    columns = list(zip(*(s.features() for s in samples)))
    for name, col in zip(FEATURES, columns):
        ranges[name] = (min(col), max(col))

    def scale(x, lo, hi):
        return 0.0 if hi == lo else (x - lo) / (hi - lo)

    out = []
    for s in samples:
        changes = {
            name: scale(x, *ranges[name]) for name, x in zip(FEATURES, s.features())
        }
        out.append(replace(s, **changes))
    return out, ranges


def run_filter(samples: Sequence[SBSample], k: float = 1.5) -> tuple[list[SBSample], FilterReport]:
    report = FilterReport(samples_in=len(samples), before=DatasetCounts.of(samples))
    if samples:
        for name, col in zip(FEATURES, zip(*(s.features() for s in samples))):
            f = fences(col, k)
            report.fences[name] = f
            report.flagged[name] = sum(1 for x in col if f.flags(x))

    kept, dropped, report.dropped = drop_out_of_range(samples)
    report.samples_dropped = len(dropped)
    if kept:
        kept, report.ranges = minmax_rescale(kept)
    report.samples_out = len(kept)
    report.after = DatasetCounts.of(kept)
    return kept, report


def write_filter_report(report: FilterReport, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["feature", "q1", "q3", "lower", "upper", "min", "max", "flagged_count"])
        for name in FEATURES:
            f = report.fences.get(name)
            lo, hi = report.ranges.get(name, (None, None))
            w.writerow([
                name,
                *(("", "", "", "") if f is None else map(format_real, (f.q1, f.q3, f.lower, f.upper))),
                "" if lo is None else format_real(lo),
                "" if hi is None else format_real(hi),
                report.flagged.get(name, 0),
            ])


def write_filter_stats(report: FilterReport, path: str | Path, delimiter: str = ",") -> None:
    """Before/after dataset counts in the layout of a before/after table."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["statistic", "before", "after"])
        w.writerow(["n_auction_ids", report.before.n_auctions, report.after.n_auctions])
        w.writerow(["n_bidder_ids", report.before.n_bidders, report.after.n_bidders])
        w.writerow(["n_records", report.before.n_records, report.after.n_records])
        w.writerow(["samples_dropped", "", report.samples_dropped])


def write_dropped(report: FilterReport, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["auction_id", "bidder_id", "features"])
        for auction_id, bidder_id, bad in report.dropped:
            w.writerow([auction_id, bidder_id, ";".join(bad)])
