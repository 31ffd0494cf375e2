"""
Centralized runtime configuration for hidex.
All settings are loaded from environment variables with sensible defaults.
Experiment parameters live in ExperimentConfig (see models.py / experiment.py).
"""

import os
import sys
from dataclasses import dataclass


@dataclass(frozen=True)
class HarnessConfig:
    """How Monte Carlo sweeps are executed."""
    workers: int = 1  # worker processes for trial batches
    trial_cap: int = 20000  # auto-extension stops here unless the experiment sets max_trials
    batch_trials: int = 50  # trials per auto-extension batch


@dataclass(frozen=True)
class ServerConfig:
    """Configuration for the MCP task server."""
    output_dir: str = "."
    task_timeout: int = 3600  # default wait_for_task timeout in seconds


@dataclass(frozen=True)
class HidexConfig:
    """Main configuration container."""
    harness: HarnessConfig
    server: ServerConfig
    verbose: bool = True

    def print_warnings(self):
        """Print warnings for configurations that are valid but unusual."""
        if self.harness.workers > (os.cpu_count() or 1):
            print(
                f"[WARNING] HIDEX_WORKERS={self.harness.workers} exceeds the {os.cpu_count()} available CPUs",
                file=sys.stderr,
                flush=True,
            )


def _positive_int(name: str, default: int) -> int:
    """Parse a positive integer variable, falling back to the default with a warning."""
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        print(f"[WARNING] Invalid {name} value, using default {default}", file=sys.stderr)
        return default
    if value <= 0:
        print(f"[WARNING] {name} must be positive, using default {default}", file=sys.stderr)
        return default
    return value


def load_config() -> HidexConfig:
    """Load configuration from environment variables."""
    harness = HarnessConfig(
        workers=_positive_int("HIDEX_WORKERS", 1),
        trial_cap=_positive_int("HIDEX_TRIAL_CAP", 20000),
        batch_trials=_positive_int("HIDEX_BATCH_TRIALS", 50),
    )

    server = ServerConfig(
        output_dir=os.environ.get("HIDEX_OUTPUT_DIR", "").strip() or ".",
        task_timeout=_positive_int("HIDEX_TASK_TIMEOUT", 3600),
    )

    verbose = os.environ.get("HIDEX_VERBOSE", "true").lower() == "true"

    return HidexConfig(
        harness=harness,
        server=server,
        verbose=verbose,
    )


# Global config instance - loaded once at import time
config = load_config()
