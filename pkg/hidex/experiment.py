"""
Experiment files and scenario presets.

An experiment file is TOML whose keys mirror ExperimentConfig: top-level
scalars and grids, plus [frame], [code] and [threshold] tables and a
[[schedules]] array. Values are layered preset <- file <- command line.
"""

from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from .errors import ConfigurationError
from .models import ExperimentConfig, Scenario

CODED_FRAME = {"preamble_len": 8, "header_len": 0, "payload_len": 500, "pilot_period": 4}

# Per-scenario defaults on top of the ExperimentConfig field defaults.
PRESETS: dict[Scenario, dict[str, Any]] = {
    Scenario.UNCODED: {},
    Scenario.MSE: {"receivers": ["bp", "mmse", "conventional"]},
    Scenario.DETECT_PROB: {
        "snr_grid_db": [20.0],
        "sinr_db": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        "receivers": ["bp"],
    },
    Scenario.THRESHOLD: {"snr_grid_db": [20.0], "receivers": ["bp", "mmse"]},
    Scenario.COMPONENTS: {"snr_grid_db": [20.0], "receivers": ["bp"]},
    Scenario.CODED: {"frame": CODED_FRAME},
    Scenario.SCHEDULES: {
        "frame": CODED_FRAME,
        "receivers": ["bp"],
        "schedules": [
            {"i_det": 1, "i_dec": 30},
            {"i_det": 2, "i_dec": 15},
            {"i_det": 3, "i_dec": 10},
            {"i_det": 5, "i_dec": 6},
        ],
    },
}


def merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; tables merge key by key, everything else is replaced."""
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def read_experiment_file(path: str | Path) -> dict[str, Any]:
    try:
        with Path(path).open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigurationError(f"experiment file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"invalid TOML in {path}: {e}") from e


def _format_errors(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{where}: {item['msg']}")
    return "; ".join(parts)


def load_experiment(
    path: str | Path | None = None,
    scenario: Scenario | str | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """
    Build a validated ExperimentConfig.

    The scenario comes from the argument, else the file, else "uncoded";
    its preset supplies defaults the file and overrides can replace.
    """
    data = read_experiment_file(path) if path else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    chosen = scenario or overrides.get("scenario") or data.get("scenario") or Scenario.UNCODED.value
    try:
        chosen = Scenario(chosen)
    except ValueError as e:
        raise ConfigurationError(
            f"unknown scenario '{chosen}'; expected one of {', '.join(s.value for s in Scenario)}"
        ) from e

    layered = merge(merge(PRESETS[chosen], data), overrides)
    layered["scenario"] = chosen.value
    try:
        return ExperimentConfig.model_validate(layered)
    except ValidationError as e:
        raise ConfigurationError(f"invalid experiment configuration: {_format_errors(e)}") from e
