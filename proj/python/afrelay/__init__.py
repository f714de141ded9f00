"""Power allocation and Monte-Carlo simulation for multi-hop OFDM AF relay chains."""

from ._afrelay import (
    ConfigError,
    SolverError,
    UsageError,
    a_coefficients,
    asy_stpc,
    cascade_snr,
    config_keys,
    csv_header,
    end_to_end_snr,
    epa,
    iterate_stpc,
    oracle_grid_search,
    outage,
    rate,
    resolve_config,
    run_cli,
    sweep,
)

__all__ = [
    "ConfigError",
    "SolverError",
    "UsageError",
    "a_coefficients",
    "asy_stpc",
    "cascade_snr",
    "config_keys",
    "csv_header",
    "end_to_end_snr",
    "epa",
    "iterate_stpc",
    "oracle_grid_search",
    "outage",
    "rate",
    "resolve_config",
    "run_cli",
    "sweep",
]
