"""Service offloading simulator: geometry, messages, CPU model and scenarios."""

import json
from pathlib import Path

from ._core import (
    ConfigError,
    DomainError,
    ParseError,
    SchemaError,
    ValidationError,
    break_even_ratio,
    codm_accept,
    cpu_usage,
    euclid,
    lodm_evaluate,
    message_kind,
    normalize_message,
    point_in_polygon,
    route_length,
    time_in_area,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "ParseError",
    "SchemaError",
    "ValidationError",
    "break_even_ratio",
    "codm_accept",
    "cpu_usage",
    "euclid",
    "lodm_evaluate",
    "message_kind",
    "normalize_message",
    "point_in_polygon",
    "route_length",
    "run",
    "sweep",
    "time_in_area",
]


def _yaml_text(config):
    """Accept a path or YAML text."""
    if isinstance(config, Path) or ("\n" not in str(config) and Path(str(config)).is_file()):
        return Path(config).read_text()
    return str(config)


def run(config, seed=None, duration_ms=None):
    """Run a scenario and return the report as a dict."""
    from ._core import run_json

    return json.loads(run_json(_yaml_text(config), seed, duration_ms))


def sweep(config, dt_max, n, replications=None, duration_ms=None):
    """Mean episode length per (n, dt_max) cell as a list of dicts."""
    from ._core import sweep_cells

    return sweep_cells(_yaml_text(config), list(dt_max), list(n), replications, duration_ms)
