"""Flat ``key = value`` pipeline configuration.

Format, one setting per line::

    # comment
    input.auctions = data/auctions.csv
    rates.GBP = 1.28
    schema.auction.bid_amount = Bid Amount

Blank lines and lines starting with ``#`` or ``;`` are ignored. There are no
inline comments. Keys are dotted; unknown keys are an error. Relative paths
resolve against the config file's directory. A delimiter of ``\\t`` means tab.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path

from shillbid.errors import ConfigError
from shillbid.ingest import (
    AUCTION_COLUMNS,
    AUCTION_OPTIONAL_COLUMNS,
    CURRENCY_ALIASES,
    HISTORY_COLUMNS,
)
from shillbid.metrics import MetricConfig
from shillbid.synth import ShillProfile, SynthConfig


@dataclass
class PipelineConfig:
    auctions_path: Path | None = None
    history_path: Path | None = None
    # "synth" generates inputs into the output dir; "file" reads input.* paths
    source: str = "synth"
    out_dir: Path = Path("out")
    delimiter: str = ","
    auction_schema: dict[str, str] = field(default_factory=dict)
    history_schema: dict[str, str] = field(default_factory=dict)
    rates: dict[str, Decimal] = field(default_factory=dict)
    iqr_k: float = 1.5
    p_min: int = 4
    br_default: float = 0.5
    # None -> dataset mean winning price
    reference_price: float | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)

    @property
    def metric_config(self) -> MetricConfig:
        return MetricConfig(
            p_min=self.p_min, br_default=self.br_default, reference_price=self.reference_price
        )

    def validate(self) -> None:
        if self.iqr_k <= 0:
            raise ConfigError("filter.iqr_k must be positive")
        if self.p_min <= 0:
            raise ConfigError("metrics.p_min must be positive")
        if not 0.0 <= self.br_default <= 1.0:
            raise ConfigError("metrics.br_default must be in [0, 1]")
        if self.reference_price is not None and self.reference_price <= 0:
            raise ConfigError("metrics.reference_price must be positive")
        for code, rate in self.rates.items():
            if rate <= 0:
                raise ConfigError(f"rates.{code} must be positive")
        if self.source not in ("synth", "file"):
            raise ConfigError("input.source must be 'synth' or 'file'")
        if self.source == "file" and self.auctions_path is None:
            raise ConfigError("input.auctions is required when input.source = file")
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")
        try:
            self.synth.validate()
        except ValueError as exc:
            raise ConfigError(f"synth: {exc}") from exc
        if self.synth.foreign_rate > 0 and not self.synth.rates:
            raise ConfigError("synth.foreign_rate > 0 needs at least one rates.<CODE> entry")


def _bool(value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _int_pair(value: str) -> tuple[int, int]:
    lo, hi = (int(x) for x in value.split(","))
    return lo, hi


def _float_pair(value: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in value.split(","))
    return lo, hi


def _int_tuple(value: str) -> tuple[int, ...]:
    return tuple(int(x) for x in value.split(","))


_SYNTH_KEYS = {
    "seed": int,
    "n_auctions": int,
    "n_honest_bidders": int,
    "n_shills": int,
    "n_sellers": int,
    "n_products": int,
    "auctions_per_shill": int,
    "honest_participants": _int_pair,
    "honest_bid_p": float,
    "max_bids_per_bidder": int,
    "opening_price_range": _float_pair,
    "increment_range": _float_pair,
    "durations": _int_tuple,
    "window_days": int,
    "foreign_rate": float,
    "inconsistency_rate": float,
    "duplicate_rate": float,
    "masked_rate": float,
    "anomaly_rate": float,
    "out_of_window_rate": float,
}
_SHILL_KEYS = {
    "early_bid_fraction": float,
    "stop_fraction": float,
    "bid_share_target": float,
    "avoid_winning": _bool,
    "zero_rating": _bool,
    "items_30d": int,
    "retractions": int,
}


def parse_lines(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        key, sep, value = s.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_config(text: str, base_dir: Path | str = ".") -> PipelineConfig:
    base = Path(base_dir)
    cfg = PipelineConfig()
    synth: dict = {}
    shill: dict = {}
    source_set = False

    def path(v: str) -> Path:
        p = Path(v).expanduser()
        return p if p.is_absolute() else base / p

    for key, value in parse_lines(text).items():
        try:
            head, _, rest = key.partition(".")
            if key == "input.auctions":
                cfg.auctions_path = path(value)
            elif key == "input.history":
                cfg.history_path = path(value)
            elif key == "input.source":
                cfg.source = value
                source_set = True
            elif key == "output.dir":
                cfg.out_dir = path(value)
            elif key == "delimiter":
                cfg.delimiter = "\t" if value in ("\\t", "tab") else value
            elif head == "schema" and rest.startswith("auction."):
                name = rest[len("auction."):]
                if name not in AUCTION_COLUMNS and name not in AUCTION_OPTIONAL_COLUMNS:
                    raise ConfigError(f"unknown auction schema field {name!r}")
                cfg.auction_schema[name] = value
            elif head == "schema" and rest.startswith("history."):
                name = rest[len("history."):]
                if name not in HISTORY_COLUMNS:
                    raise ConfigError(f"unknown history schema field {name!r}")
                cfg.history_schema[name] = value
            elif head == "rates" and rest:
                rate = Decimal(value)
                if not rate.is_finite():
                    raise ValueError("rate must be finite")
                code = rest.upper()
                cfg.rates[CURRENCY_ALIASES.get(code, code)] = rate
            elif key == "filter.iqr_k":
                cfg.iqr_k = float(value)
            elif key == "metrics.p_min":
                cfg.p_min = int(value)
            elif key == "metrics.br_default":
                cfg.br_default = float(value)
            elif key == "metrics.reference_price":
                cfg.reference_price = None if value.lower() == "mean" else float(value)
            elif head == "synth" and rest.startswith("shill."):
                name = rest[len("shill."):]
                if name not in _SHILL_KEYS:
                    raise ConfigError(f"unknown key {key!r}")
                shill[name] = _SHILL_KEYS[name](value)
            elif head == "synth" and rest in _SYNTH_KEYS:
                synth[rest] = _SYNTH_KEYS[rest](value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except (ValueError, InvalidOperation) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None

    if not source_set:
        cfg.source = "file" if cfg.auctions_path is not None else "synth"
    cfg.synth = SynthConfig(
        **synth,
        shill=replace(ShillProfile(), **shill),
        rates={k: float(v) for k, v in cfg.rates.items() if k != "USD"},
    )
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)

