"""Build a shill-bidding training dataset from raw auction and bidder-history records."""

from shillbid.errors import ConfigError, InputError, PipelineError

__all__ = ["ConfigError", "InputError", "PipelineError", "FEATURES", "SAMPLE_HEADER"]

__version__ = "0.1.0"

# Order matters: this is the column order of every sample file.
FEATURES = (
    "opening_price_m",
    "early_bidding",
    "last_bidding",
    "bidding_ratio",
    "auction_bids",
    "buyer_tendency",
    "winning_ratio",
    "brbi",
    "bid_retraction",
)

SAMPLE_HEADER = ("auction_id", "bidder_id") + FEATURES
