"""
Data models for hidex - experiment configuration, result rows and task bookkeeping.
"""

import asyncio
import math
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import norm


class Scenario(str, Enum):
    """Experiment families the harness knows how to run."""
    UNCODED = "uncoded"
    CODED = "coded"
    DETECT_PROB = "detect-prob"
    MSE = "mse"
    THRESHOLD = "threshold"
    COMPONENTS = "components"  # BER vs. mixture budget
    SCHEDULES = "schedules"  # coded BER vs. (i_det, i_dec)


class ReceiverName(str, Enum):
    """Receivers available for comparison."""
    GENIE = "genie"
    BP = "bp"
    MMSE = "mmse"
    CONVENTIONAL = "conventional"


class Metric(str, Enum):
    """Metric names allowed in a ResultRow."""
    BER = "ber"
    MSE = "mse"
    FAULT_PROB = "fault_prob"
    BER_RATIO = "ber_ratio"


class HeaderMode(str, Enum):
    """How the receiver learns the first packet's length."""
    DECODED = "decoded"
    GENIE = "genie"


class InterfererPilots(str, Enum):
    """Whether the message-passing detector exploits the second packet's pilots."""
    USED = "used"
    IGNORED = "ignored"


class OffsetMode(str, Enum):
    """Where the second packet's start comes from."""
    DETECTED = "detected"
    GENIE = "genie"


class TaskStatus(str, Enum):
    """Background task status."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    CANCELLED = "cancelled"


# === Experiment configuration ===

class FrameConfig(BaseModel):
    """Packet layout shared by both stations."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    preamble_len: int = Field(default=56, ge=1)
    header_len: int = Field(default=16, ge=0)
    payload_len: int = Field(default=246, ge=0)
    pilot_period: int = Field(default=4, ge=1)
    preamble_seed: int = 7  # protocol constant, identical at every station


class CodeConfig(BaseModel):
    """LDPC code used by coded scenarios."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=500, ge=2)
    k: int = Field(default=250, ge=1)
    seed: int = 1
    profile: dict[int, float] = Field(default_factory=lambda: {2: 0.5, 3: 0.3, 8: 0.2})
    path: str | None = None  # parity-check file; overrides construction when set

    @model_validator(mode="after")
    def _check_rate(self) -> "CodeConfig":
        if self.k >= self.n:
            raise ValueError(f"code dimension k={self.k} must be below length n={self.n}")
        return self


class ScheduleConfig(BaseModel):
    """Detector/decoder exchange schedule."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    i_det: int = Field(default=3, ge=1)
    i_dec: int = Field(default=10, ge=1)

    @property
    def label(self) -> str:
        return f"({self.i_det},{self.i_dec})"

    @property
    def total_iterations(self) -> int:
        return self.i_det * self.i_dec


class ThresholdConfig(BaseModel):
    """Interference-level sweep used to locate the useful-detection threshold."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    power_ratio_grid_db: list[float] = Field(default_factory=lambda: [-15.0, -12.0, -9.0, -6.0, -3.0, 0.0])
    ratio_target: float = Field(default=3.0, gt=0)


class ExperimentConfig(BaseModel):
    """
    Full description of one Monte Carlo experiment.

    Defaults reproduce the uncoded setting: alpha 0.99, one pilot in every
    four symbols, eight mixture components, equal-power interferer.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Scenario = Scenario.UNCODED
    snr_grid_db: list[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    # Interferer power relative to the desired user, 10*log10(sigma_h'^2 / sigma_h^2)
    power_ratio_db: list[float] = Field(default_factory=lambda: [0.0])
    # When set, replaces power_ratio_db: sigma_h'^2 is solved from SINR = sigma_h^2/(sigma_h'^2+sigma_n^2)
    sinr_db: list[float] | None = None
    alpha: float = Field(default=0.99, ge=0.0, le=1.0)
    n_r: int = Field(default=1, ge=1)
    frame: FrameConfig = Field(default_factory=FrameConfig)
    k_max: int = Field(default=8, ge=1)
    k_max_grid: list[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])
    receivers: list[ReceiverName] = Field(
        default_factory=lambda: [ReceiverName.GENIE, ReceiverName.BP, ReceiverName.MMSE, ReceiverName.CONVENTIONAL]
    )
    schedules: list[ScheduleConfig] = Field(
        default_factory=lambda: [ScheduleConfig(i_det=1, i_dec=30), ScheduleConfig(i_det=3, i_dec=10)]
    )
    trials: int = Field(default=200, ge=1)
    max_trials: int | None = Field(default=None, ge=1)
    target_rel_halfwidth: float = Field(default=0.2, gt=0)
    seed: int = 0
    header_mode: HeaderMode = HeaderMode.DECODED
    interferer_pilots: InterfererPilots = InterfererPilots.USED
    offset_mode: OffsetMode = OffsetMode.DETECTED
    offset_min: int | None = Field(default=None, ge=0)
    offset_max: int | None = Field(default=None, ge=0)
    tau: float = Field(default=0.5, gt=0.0, lt=1.0)
    mmse_window: int = Field(default=2, ge=1)
    code: CodeConfig = Field(default_factory=CodeConfig)
    threshold: ThresholdConfig = Field(default_factory=ThresholdConfig)

    @field_validator("snr_grid_db", "power_ratio_db", "k_max_grid", "receivers", "schedules")
    @classmethod
    def _nonempty(cls, value: list) -> list:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    @field_validator("sinr_db")
    @classmethod
    def _nonempty_optional(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and not value:
            raise ValueError("sinr grid must not be empty when given")
        return value

    @model_validator(mode="after")
    def _check_layout(self) -> "ExperimentConfig":
        if self.frame.payload_len > 0 and self.frame.pilot_period < 2:
            raise ValueError("pilot_period must be at least 2 when the payload carries data")
        if self.scenario in (Scenario.CODED, Scenario.SCHEDULES) and self.frame.payload_len != self.code.n:
            raise ValueError(
                f"coded frames carry one codeword: payload_len={self.frame.payload_len} != n={self.code.n}"
            )
        if self.max_trials is not None and self.max_trials < self.trials:
            raise ValueError("max_trials must not be below trials")
        if self.offset_min is not None and self.offset_max is not None and self.offset_min > self.offset_max:
            raise ValueError("offset_min must not exceed offset_max")
        return self


class ResultRow(BaseModel):
    """One Monte Carlo measurement, serialized as one CSV line."""
    model_config = ConfigDict(frozen=True)

    scenario: str
    receiver: str
    snr_db: float
    sinr_db: float
    metric: Metric
    value: float
    count: int = Field(ge=1)  # symbols, bits or detection events measured
    trials: int = Field(ge=1)
    seed: int

    def interval(self, confidence: float = 0.95) -> tuple[float, float] | None:
        """Wilson score interval for proportion metrics, None otherwise."""
        if self.metric not in (Metric.BER, Metric.FAULT_PROB):
            return None
        return wilson_interval(self.value * self.count, self.count, confidence)


def wilson_interval(successes: float, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError(f"need at least one observation, got n={n}")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(max(p * (1 - p), 0.0) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# === Background tasks (MCP server) ===

@dataclass
class Task:
    """Represents a background sweep."""
    task_id: str
    status: str  # TaskStatus value
    command: str
    args: dict
    start_time: datetime
    context: Any | None = field(default=None, repr=False)  # MCP Context
    completion_time: datetime | None = None
    result: str | None = None
    outputs: list[str] | None = None
    error: str | None = None
    error_code: str | None = None
    async_task: asyncio.Task | None = field(default=None, repr=False)
    cancel_event: threading.Event = field(default_factory=threading.Event, repr=False)
    progress_lines: list[str] = field(default_factory=list)


class TaskResponse(BaseModel):
    """Response for task operations (start, get, wait)."""
    success: bool
    task_id: str | None = None
    status: str | None = None
    message: str | None = None
    content: str | None = None
    error: str | None = None
    error_code: str | None = None
    duration_seconds: float | None = None
    outputs: list[str] | None = None
