"""Command-line entry point: ``shillbid <stage> --config PATH``.

Every stage reads and writes plain files under the output directory, so the
stages can be run one at a time or chained with ``run``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from shillbid import filtering, ingest, metrics, preprocess, stats, synth
from shillbid.config import PipelineConfig, load_config
from shillbid.errors import InputError, PipelineError

log = logging.getLogger("shillbid")

RAW_AUCTIONS = "raw_auctions.csv"
RAW_HISTORY = "raw_history.csv"
TRUTH = "truth.csv"
AUCTION_DEFECTS = "auction_defects.csv"
HISTORY_DEFECTS = "history_defects.csv"
RECORD_DEFECTS = "record_defects.csv"
BIDS = "bids.csv"
AUCTIONS = "auctions.csv"
HISTORY = "history.csv"
REPAIRS = "repairs.csv"
ACCOUNTING = "accounting.csv"
STATS_RAW = "stats_raw.csv"
STATS_PREPROCESSED = "stats_preprocessed.csv"
SAMPLES = "samples.csv"
DATASET = "dataset.csv"
FILTER_REPORT = "filter_report.csv"
FILTER_STATS = "filter_stats.csv"
DROPPED = "dropped.csv"
SHILL_CHECK = "shill_check.csv"


@dataclass
class PreprocessOutcome:
    result: preprocess.PreprocessResult
    history: preprocess.HistoryResult | None
    auction_report: ingest.ParseReport
    history_report: ingest.ParseReport | None


def _out(cfg: PipelineConfig, name: str) -> Path:
    return cfg.out_dir / name


def _input_paths(cfg: PipelineConfig) -> tuple[Path, Path | None, dict, dict]:
    if cfg.source == "synth":
        return _out(cfg, RAW_AUCTIONS), _out(cfg, RAW_HISTORY), {}, {}
    return cfg.auctions_path, cfg.history_path, cfg.auction_schema, cfg.history_schema


def _write_rows(path: Path, header: Sequence[str], rows, delimiter: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_synth(cfg: PipelineConfig) -> synth.SyntheticData:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    data = synth.generate(cfg.synth)
    d = cfg.delimiter
    ingest.write_auction_file(data.auction_records, _out(cfg, RAW_AUCTIONS), delimiter=d)
    ingest.write_history_file(data.history_records, _out(cfg, RAW_HISTORY), delimiter=d)
    synth.write_truth(data.truth, _out(cfg, TRUTH), delimiter=d)
    log.info("synth: %d bid rows, %d bidders", len(data.auction_records), len(data.truth))
    return data


def cmd_preprocess(cfg: PipelineConfig) -> PreprocessOutcome:
    auctions_path, history_path, a_schema, h_schema = _input_paths(cfg)
    d = cfg.delimiter
    records, a_report = ingest.parse_auction_file(auctions_path, a_schema, d)
    if a_report.rows_read == 0:
        raise InputError(f"{auctions_path}: no auction records")
    for defect in a_report.defects:
        log.debug("auction row %d: %s: %s", defect.row_number, defect.field, defect.reason)

    result = preprocess.preprocess_bids(records, preprocess.RateTable(cfg.rates))
    if not result.auctions:
        raise InputError(f"{auctions_path}: no usable auctions after preprocessing")

    hist = h_report = None
    h_records: list = []
    if history_path is not None and history_path.exists():
        h_records, h_report = ingest.parse_history_file(history_path, h_schema, d)
        hist = preprocess.preprocess_histories(h_records)
    elif history_path is not None:
        log.warning("history file %s not found; continuing without it", history_path)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_defects(a_report, _out(cfg, AUCTION_DEFECTS), d)
    preprocess.write_record_defects(
        result.defects + (hist.defects if hist else []), _out(cfg, RECORD_DEFECTS), d
    )
    preprocess.write_bids(result.auctions, _out(cfg, BIDS), d)
    preprocess.write_auction_meta(result.auctions, _out(cfg, AUCTIONS), d)
    preprocess.write_repairs(result.repairs, _out(cfg, REPAIRS), d)
    if hist is not None:
        ingest.write_defects(h_report, _out(cfg, HISTORY_DEFECTS), d)
        preprocess.write_histories(hist.histories, _out(cfg, HISTORY), d)

    stats.write_stats(
        stats.raw_stats(
            records,
            h_records,
            a_report.n_columns,
            h_report.n_columns if h_report else None,
        ),
        _out(cfg, STATS_RAW),
        d,
    )
    stats.write_stats(
        stats.preprocessed_stats(result.auctions, hist.histories if hist else None),
        _out(cfg, STATS_PREPROCESSED),
        d,
    )

    rows = _accounting_rows("auction", a_report, result.accounting)
    if hist is not None:
        rows += _accounting_rows("history", h_report, hist.accounting)
    _write_rows(_out(cfg, ACCOUNTING), ["dataset", "item", "count"], rows, d)

    if not result.accounting.balanced():
        raise PipelineError(f"auction record accounting does not balance: {result.accounting}")
    log.info(
        "preprocess: %d auctions, %d bids, %d repairs",
        len(result.auctions), result.accounting.bids_out, len(result.repairs),
    )
    return PreprocessOutcome(result, hist, a_report, h_report)


def _accounting_rows(name, report: ingest.ParseReport, acct: preprocess.Accounting):
    return [
        (name, "rows_read", report.rows_read),
        (name, "rows_rejected_at_ingest", report.rows_rejected),
        (name, "duplicates_removed", acct.duplicates_removed),
        (name, "masked_dropped", acct.masked_dropped),
        (name, "defects", acct.defects),
        (name, "records_out", acct.bids_out),
    ]


def load_preprocessed(cfg: PipelineConfig):
    d = cfg.delimiter
    auctions = preprocess.load_auctions(_out(cfg, BIDS), _out(cfg, AUCTIONS), d)
    history_path = _out(cfg, HISTORY)
    if history_path.exists():
        histories = preprocess.load_histories(history_path, d)
    else:
        log.warning("no %s in %s; bidder-history metrics use defaults", HISTORY, cfg.out_dir)
        histories = {}
    return auctions, histories


def cmd_features(cfg: PipelineConfig) -> list[metrics.SBSample]:
    auctions, histories = load_preprocessed(cfg)
    samples = metrics.build_samples(auctions, histories, cfg.metric_config)
    missing = len({s.bidder_id for s in samples} - set(histories))
    if histories and missing:
        log.warning("%d bidders have no history; defaults applied", missing)
    metrics.write_samples(samples, _out(cfg, SAMPLES), cfg.delimiter)
    log.info("features: %d samples", len(samples))
    return samples


def cmd_filter(cfg: PipelineConfig) -> tuple[list[metrics.SBSample], filtering.FilterReport]:
    d = cfg.delimiter
    samples = metrics.read_samples(_out(cfg, SAMPLES), d)
    if not samples:
        raise InputError(f"{_out(cfg, SAMPLES)}: no samples to filter")
    final, report = filtering.run_filter(samples, cfg.iqr_k)
    metrics.write_samples(final, _out(cfg, DATASET), d)
    filtering.write_filter_report(report, _out(cfg, FILTER_REPORT), d)
    filtering.write_filter_stats(report, _out(cfg, FILTER_STATS), d)
    filtering.write_dropped(report, _out(cfg, DROPPED), d)
    log.info("filter: %d in, %d dropped, %d out", report.samples_in, report.samples_dropped, report.samples_out)
    return final, report


def cmd_stats(cfg: PipelineConfig) -> str:
    """Print the statistics tables already written by earlier stages."""
    parts = []
    for name in (STATS_RAW, STATS_PREPROCESSED, FILTER_STATS):
        path = _out(cfg, name)
        if path.exists():
            parts.append(f"# {name}\n{path.read_text(encoding='utf-8')}")
    if not parts:
        raise InputError(f"no statistics found in {cfg.out_dir}; run preprocess first")
    text = "\n".join(parts)
    sys.stdout.write(text)
    return text


def cmd_run(cfg: PipelineConfig) -> filtering.FilterReport:
    data = cmd_synth(cfg) if cfg.source == "synth" else None
    outcome = cmd_preprocess(cfg)
    samples = cmd_features(cfg)
    _, report = cmd_filter(cfg)

    if data is not None:
        bounds = synth.expected_metrics(data.truth, data, cfg.p_min)
        violations = synth.check_shills(bounds, samples, outcome.result.auctions)
        _write_rows(
            _out(cfg, SHILL_CHECK),
            ["bidder_id", "n_violations", "detail"],
            [(b, len(v), "; ".join(v)) for b, v in sorted(violations.items())],
            cfg.delimiter,
        )
        failed = sum(1 for v in violations.values() if v)
        if failed:
            log.warning("%d of %d shills violate their expected bounds", failed, len(bounds))
    return report


COMMANDS = {
    "preprocess": cmd_preprocess,
    "features": cmd_features,
    "filter": cmd_filter,
    "synth": cmd_synth,
    "run": cmd_run,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shillbid", description="Build a shill-bidding training dataset."
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="pipeline config file")
    parser.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="synth seed (overrides synth.seed)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.synth = replace(cfg.synth, seed=args.seed)
        COMMANDS[args.command](cfg)
    except PipelineError as exc:
        print(f"error: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort single-line report
        print(f"error: internal: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
