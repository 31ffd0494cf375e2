"""
Monte Carlo experiment driver.

A sweep walks a grid of (SNR, interference level[, mixture budget]) points.
At each point, trials are simulated in batches: one collision scene per
trial, shared by every receiver, so receiver comparisons are paired.
Trial t at a point always draws from the same seed stream, and batch
results are reduced in trial order, so the output does not depend on the
number of worker processes.
"""

from __future__ import annotations

import math
import sys
import threading
from collections.abc import Callable
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import repeat
from typing import NamedTuple

import numpy as np

from .bp import ChannelModel, SymbolPrior, UserLayout, bp_detect
from .channel import FadingParams, NoiseParams, ReceivedFrame, compose_received, gen_fading, trial_streams
from .config import config
from .detect import cross_correlate, detect_second_start, is_fault
from .errors import ConfigurationError, DegenerateMessageError, SweepCancelled
from .framing import PacketSpec, build_frame, decode_header, demap, encode_header, gen_preamble, make_collision, modulate
from .ldpc import LdpcCode, Schedule, build_code, encode, load_code
from .models import (
    CodeConfig,
    ExperimentConfig,
    HeaderMode,
    InterfererPilots,
    Metric,
    OffsetMode,
    ReceiverName,
    ResultRow,
    Scenario,
    wilson_interval,
)
from .receivers import RECEIVER_RUNNERS, BpRunner, ReceiverView, TrialTruth

ProgressCallback = Callable[[str], None] | None

CODED_SCENARIOS = (Scenario.CODED, Scenario.SCHEDULES)
PROPORTIONS = (Metric.BER, Metric.FAULT_PROB)
KNEE_SPAN_DB = (5.0, 10.0)  # SINR span for the fault-probability growth figure


def _log(msg: str):
    """Log to stderr."""
    print(msg, file=sys.stderr, flush=True)


__all__ = [
    "GridPoint",
    "Tally",
    "TrialOutcome",
    "ThresholdResult",
    "DetectionKnee",
    "grid_points",
    "run_trial",
    "run_sweep",
    "find_sinr_threshold",
    "locate_threshold",
    "locate_knee",
    "summarize_detection",
    "find_detection_knee",
    "wilson_interval",
]


# === Grid ===

class GridPoint(NamedTuple):
    """One sweep point. Points sharing `realization` see identical random draws."""
    index: int
    realization: int
    snr_db: float
    noise_var: float
    interferer_var: float
    k_max: int

    @property
    def sinr_db(self) -> float:
        """Desired power over interference plus noise, with sigma_h^2 = 1."""
        return 10.0 * math.log10(1.0 / (self.interferer_var + self.noise_var))

    @property
    def power_ratio_db(self) -> float:
        return 10.0 * math.log10(self.interferer_var)


def interferer_power(snr_db: float, sinr_db: float | None = None, power_ratio_db: float | None = None) -> float:
    """sigma_h'^2 for a desired user of unit power, from an SINR or a power ratio."""
    if sinr_db is not None:
        var = 10.0 ** (-sinr_db / 10.0) - 10.0 ** (-snr_db / 10.0)
        if var <= 0.0:
            raise ConfigurationError(f"SINR {sinr_db} dB is unreachable at SNR {snr_db} dB")
        return var
    if power_ratio_db is None:
        raise ConfigurationError("either an SINR or a power ratio is required")
    return 10.0 ** (power_ratio_db / 10.0)


def grid_points(cfg: ExperimentConfig) -> list[GridPoint]:
    """Sweep points in output order."""
    if cfg.scenario == Scenario.THRESHOLD:
        levels = [("ratio", v) for v in cfg.threshold.power_ratio_grid_db]
    elif cfg.sinr_db is not None:
        levels = [("sinr", v) for v in cfg.sinr_db]
    else:
        levels = [("ratio", v) for v in cfg.power_ratio_db]
    budgets = cfg.k_max_grid if cfg.scenario == Scenario.COMPONENTS else [cfg.k_max]

    points = []
    for i_snr, snr in enumerate(cfg.snr_grid_db):
        for i_level, (kind, level) in enumerate(levels):
            var = interferer_power(snr, sinr_db=level) if kind == "sinr" else interferer_power(snr, power_ratio_db=level)
            for k_max in budgets:
                points.append(GridPoint(
                    index=len(points),
                    realization=i_snr * len(levels) + i_level,
                    snr_db=float(snr),
                    noise_var=10.0 ** (-snr / 10.0),
                    interferer_var=var,
                    k_max=int(k_max),
                ))
    return points


# === Tallies ===

@dataclass
class Tally:
    """Running sum of one metric: error count (or squared error) over `count` observations."""
    metric: Metric
    total: float = 0.0
    count: int = 0

    @property
    def value(self) -> float:
        return self.total / self.count if self.count else math.nan

    def add(self, total: float, count: int):
        self.total += float(total)
        self.count += int(count)

    def converged(self, rel_halfwidth: float) -> bool:
        """True once the Wilson half-width is within rel_halfwidth of the estimate."""
        if self.metric not in PROPORTIONS:
            return True
        if self.count == 0 or self.total == 0:
            return False
        lo, hi = wilson_interval(self.total, self.count)
        return (hi - lo) / 2.0 <= rel_halfwidth * self.value


@dataclass
class TrialOutcome:
    """Everything one trial contributes, keyed by row label."""
    tallies: dict[str, Tally] = field(default_factory=dict)
    degenerate: dict[str, int] = field(default_factory=dict)

    def add(self, label: str, metric: Metric, total: float, count: int):
        self.tallies.setdefault(label, Tally(metric)).add(total, count)

    def failed(self, label: str):
        self.degenerate[label] = self.degenerate.get(label, 0) + 1

    def merge(self, other: TrialOutcome):
        for label, tally in other.tallies.items():
            self.add(label, tally.metric, tally.total, tally.count)
        for label, n in other.degenerate.items():
            self.degenerate[label] = self.degenerate.get(label, 0) + n

    def converged(self, rel_halfwidth: float) -> bool:
        return bool(self.tallies) and all(t.converged(rel_halfwidth) for t in self.tallies.values())


# === Trial simulation ===

def packet_spec(cfg: ExperimentConfig) -> PacketSpec:
    frame = cfg.frame
    return PacketSpec(
        preamble_len=frame.preamble_len,
        header_len=frame.header_len,
        payload_len=frame.payload_len,
        pilot_period=frame.pilot_period,
    )


@lru_cache(maxsize=4)
def _cached_code(n: int, k: int, seed: int, profile: tuple[tuple[int, float], ...], path: str | None) -> LdpcCode:
    if path:
        return load_code(path)
    return build_code(n, k, dict(profile), seed)


def code_for(code_cfg: CodeConfig) -> LdpcCode:
    """The experiment's code, built once per process."""
    code = _cached_code(code_cfg.n, code_cfg.k, code_cfg.seed,
                        tuple(sorted(code_cfg.profile.items())), code_cfg.path)
    if code.n != code_cfg.n or code.k != code_cfg.k:
        raise ConfigurationError(
            f"parity-check file gives a ({code.n}, {code.k}) code, config expects ({code_cfg.n}, {code_cfg.k})"
        )
    return code


def offset_range(cfg: ExperimentConfig, spec: PacketSpec) -> tuple[int, int]:
    """
    Inclusive range of the second packet's start.

    Defaults to [prefix_len, l - 1]: the first header stays in the clear and
    the packets always overlap.
    """
    lo = spec.prefix_len if cfg.offset_min is None else cfg.offset_min
    hi = spec.total_len - 1 if cfg.offset_max is None else cfg.offset_max
    if lo < 1:
        raise ConfigurationError("offset_min must be at least 1; offset 0 hides the second preamble")
    if lo > hi:
        raise ConfigurationError(
            f"empty offset range [{lo}, {hi}] for a {spec.total_len}-symbol frame; set offset_min/offset_max"
        )
    return lo, hi


@dataclass(frozen=True, eq=False)
class SimulatedTrial:
    """Ground truth and reception of one trial."""
    truth: TrialTruth
    y: ReceivedFrame
    fading_a: FadingParams
    fading_b: FadingParams
    messages: tuple[np.ndarray, np.ndarray] | None  # coded scenarios only


def simulate(cfg: ExperimentConfig, point: GridPoint, trial: int) -> SimulatedTrial:
    """Draw data, offset, fading and noise for one trial from its own seed streams."""
    streams = trial_streams(cfg.seed, point.realization, trial)
    spec = packet_spec(cfg)
    messages = None
    if cfg.scenario in CODED_SCENARIOS:
        code = code_for(cfg.code)
        msg_a = np.random.default_rng(streams.bits_a).integers(0, 2, code.k)
        msg_b = np.random.default_rng(streams.bits_b).integers(0, 2, code.k)
        messages = (msg_a, msg_b)
        bits_a, bits_b = encode(code, msg_a), encode(code, msg_b)
    else:
        bits_a = np.random.default_rng(streams.bits_a).integers(0, 2, spec.payload_len)
        bits_b = np.random.default_rng(streams.bits_b).integers(0, 2, spec.payload_len)

    frame_a = build_frame(bits_a, spec, cfg.frame.preamble_seed)
    frame_b = build_frame(bits_b, spec, cfg.frame.preamble_seed)
    lo, hi = offset_range(cfg, spec)
    offset = int(np.random.default_rng(streams.offset).integers(lo, hi + 1))
    scene = make_collision(frame_a, frame_b, offset, point.power_ratio_db)

    fading_a = FadingParams(alpha=cfg.alpha, sigma_h2=1.0, n_r=cfg.n_r)
    fading_b = FadingParams(alpha=cfg.alpha, sigma_h2=point.interferer_var, n_r=cfg.n_r)
    h = gen_fading(fading_a, scene.window_len, streams.fading_a)
    h_prime = gen_fading(fading_b, scene.window_len, streams.fading_b)
    noise = NoiseParams(sigma_n2=point.noise_var)
    y = compose_received(scene, h, h_prime, noise, streams.noise)

    data = spec.data_positions()
    truth = TrialTruth(scene=scene, h=h, h_prime=h_prime, noise=noise, positions=[data, data + offset])
    return SimulatedTrial(truth=truth, y=y, fading_a=fading_a, fading_b=fading_b, messages=messages)


def locate_second_packet(cfg: ExperimentConfig, sim: SimulatedTrial) -> int | None:
    if cfg.offset_mode == OffsetMode.GENIE and cfg.scenario != Scenario.DETECT_PROB:
        return sim.truth.scene.offset
    preamble = gen_preamble(cfg.frame.preamble_len, cfg.frame.preamble_seed)
    return detect_second_start(cross_correlate(sim.y, preamble), cfg.tau)


def read_header(y: ReceivedFrame, spec: PacketSpec, preamble: np.ndarray, model: ChannelModel,
                k_max: int) -> tuple[int, np.ndarray]:
    """
    Single-user pass over the first packet's preamble and header.

    Returns the decoded frame length and the header symbol decisions.
    """
    prefix = spec.prefix_len
    known = np.concatenate([preamble, np.full(spec.header_len, np.nan)])
    priors = SymbolPrior.from_layout(prefix, UserLayout(start=0, known=known), None)
    posterior = bp_detect(ReceivedFrame(y=y.y[:prefix]), priors, model, k_max)
    symbols = posterior.decisions[spec.preamble_len : prefix, 0]
    return decode_header(demap(symbols)), symbols


def receiver_view(cfg: ExperimentConfig, point: GridPoint, sim: SimulatedTrial,
                  detected: int | None) -> ReceiverView:
    """Priors and code-bit positions as a practical receiver reconstructs them."""
    spec = packet_spec(cfg)
    preamble = gen_preamble(spec.preamble_len, cfg.frame.preamble_seed)
    window = len(sim.y)
    model = ChannelModel(fading_a=sim.fading_a, fading_b=sim.fading_b, noise=sim.truth.noise)

    length_a, header_a = spec.total_len, None
    if spec.header_len > 0:
        if cfg.header_mode == HeaderMode.GENIE:
            header_a = modulate(encode_header(spec.total_len, spec.header_len))
        else:
            length_a, header_a = read_header(sim.y, spec, preamble, model, point.k_max)
            length_a = int(np.clip(length_a, spec.prefix_len, window))
    layout_a = UserLayout.from_spec(spec, preamble, start=0, length=length_a, header_symbols=header_a)

    layout_b = None
    positions_b = None
    if detected is not None:
        use_pilots = cfg.interferer_pilots == InterfererPilots.USED
        header_b = modulate(encode_header(spec.total_len, spec.header_len)) if use_pilots and spec.header_len else None
        layout_b = UserLayout.from_spec(spec, preamble, start=detected, use_pilots=use_pilots, header_symbols=header_b)
        positions_b = spec.data_positions() + detected
        positions_b[positions_b >= window] = -1

    return ReceiverView(
        y=sim.y,
        priors=SymbolPrior.from_layout(window, layout_a, layout_b),
        model=model,
        positions=[spec.data_positions(), positions_b],
        k_max=point.k_max,
        mmse_window=cfg.mmse_window,
    )


def _bit_errors(decided: np.ndarray | None, truth: np.ndarray) -> int:
    """Errors against the true bits; a packet that was never recovered counts as all wrong."""
    if decided is None:
        return int(truth.shape[0])
    return int(np.count_nonzero(np.asarray(decided) != truth))


def _uncoded_trial(cfg: ExperimentConfig, point: GridPoint, sim: SimulatedTrial, view: ReceiverView,
                   outcome: TrialOutcome):
    scene = sim.truth.scene
    overlap = np.arange(scene.overlap.start, scene.overlap.stop)
    data = [np.intersect1d(pos, overlap) for pos in sim.truth.positions]
    signals = scene.signals()

    if cfg.scenario == Scenario.COMPONENTS:
        runners = [(f"bp[k={point.k_max}]", RECEIVER_RUNNERS[ReceiverName.BP])]
    elif cfg.scenario == Scenario.THRESHOLD:
        runners = [(name.value, RECEIVER_RUNNERS[name]) for name in (ReceiverName.BP, ReceiverName.MMSE)]
    else:
        runners = [(name.value, RECEIVER_RUNNERS[name]) for name in cfg.receivers]

    for label, runner in runners:
        if cfg.scenario == Scenario.MSE and runner.name == ReceiverName.GENIE.value:
            continue
        try:
            detection = runner.detect(view, sim.truth)
        except DegenerateMessageError:
            outcome.failed(label)
            continue

        if cfg.scenario == Scenario.MSE:
            if detection.channel is not None and overlap.size:
                err = np.sum(np.abs(detection.channel[overlap] - sim.truth.h.samples[overlap]) ** 2)
                outcome.add(label, Metric.MSE, err / sim.fading_a.sigma_h2, overlap.size)
            continue

        errors = []
        for user in runner.users:
            pos = data[user]
            errors.append((int(np.count_nonzero(detection.decisions[pos, user] != signals[user][pos])), pos.size))
        if errors[0][1]:
            outcome.add(label, Metric.BER, *errors[0])
        if len(errors) > 1 and errors[1][1]:
            outcome.add(f"{label}:b", Metric.BER, *errors[1])
            outcome.add(f"{label}:both", Metric.BER, errors[0][0] + errors[1][0], errors[0][1] + errors[1][1])


def _coded_trial(cfg: ExperimentConfig, sim: SimulatedTrial, view: ReceiverView, outcome: TrialOutcome):
    code = code_for(cfg.code)
    schedules = [Schedule(s.i_det, s.i_dec) for s in cfg.schedules]
    runs = [(f"bp{s.label}", BpRunner(), sched) for s, sched in zip(cfg.schedules, schedules)]
    if cfg.scenario == Scenario.CODED:
        budget = max(schedules, key=lambda s: s.i_det * s.i_dec)
        flat = Schedule(1, budget.i_det * budget.i_dec)
        runs += [(name.value, RECEIVER_RUNNERS[name], flat) for name in cfg.receivers if name != ReceiverName.BP]

    for label, runner, schedule in runs:
        try:
            decoded = runner.decode(view, sim.truth, code, schedule)
        except DegenerateMessageError:
            outcome.failed(label)
            continue
        err_a = _bit_errors(decoded[0], sim.messages[0])
        outcome.add(label, Metric.BER, err_a, code.k)
        if 1 in runner.users:
            err_b = _bit_errors(decoded[1], sim.messages[1])
            outcome.add(f"{label}:b", Metric.BER, err_b, code.k)
            outcome.add(f"{label}:both", Metric.BER, err_a + err_b, 2 * code.k)


def run_trial(cfg: ExperimentConfig, point: GridPoint, trial: int) -> TrialOutcome:
    """
    Simulate one trial at one grid point and run every receiver on it.

    Pure function of its arguments; safe to call from worker processes.
    """
    sim = simulate(cfg, point, trial)
    outcome = TrialOutcome()
    try:
        detected = locate_second_packet(cfg, sim)
    except DegenerateMessageError:
        outcome.failed("detector")
        return outcome

    if cfg.scenario == Scenario.DETECT_PROB:
        outcome.add("detector", Metric.FAULT_PROB, int(is_fault(detected, sim.truth.scene.offset)), 1)
        return outcome

    try:
        view = receiver_view(cfg, point, sim, detected)
    except DegenerateMessageError:
        outcome.failed("header")
        return outcome

    if cfg.scenario in CODED_SCENARIOS:
        _coded_trial(cfg, sim, view, outcome)
    else:
        _uncoded_trial(cfg, point, sim, view, outcome)
    return outcome


# === Sweeps ===

def _trial_cap(cfg: ExperimentConfig) -> int:
    """Trials a point may reach: max_trials when set, else HIDEX_TRIAL_CAP. Never below `trials`."""
    limit = config.harness.trial_cap
    if cfg.max_trials is None:
        return max(limit, cfg.trials)
    if cfg.max_trials > limit:
        _log(f"[WARNING] max_trials={cfg.max_trials} exceeds HIDEX_TRIAL_CAP={limit}; capping")
        return max(limit, cfg.trials)
    return cfg.max_trials


def _run_batch(cfg: ExperimentConfig, point: GridPoint, trials: range, executor: Executor | None,
               workers: int = 1):
    if executor is None:
        return (run_trial(cfg, point, t) for t in trials)
    chunk = max(1, len(trials) // (4 * workers))
    return executor.map(run_trial, repeat(cfg), repeat(point), trials, chunksize=chunk)


def _rows(cfg: ExperimentConfig, point: GridPoint, outcome: TrialOutcome, trials: int) -> list[ResultRow]:
    return [
        ResultRow(
            scenario=cfg.scenario.value,
            receiver=label,
            snr_db=point.snr_db,
            sinr_db=point.sinr_db,
            metric=tally.metric,
            value=tally.value,
            count=tally.count,
            trials=trials,
            seed=cfg.seed,
        )
        for label, tally in outcome.tallies.items()
        if tally.count > 0
    ]


def _describe(point: GridPoint, outcome: TrialOutcome, trials: int) -> list[str]:
    lines = []
    for label, tally in outcome.tallies.items():
        text = f"[hidex] snr={point.snr_db:g} dB sinr={point.sinr_db:.2f} dB {label}: {tally.metric.value}={tally.value:.4g}"
        if tally.metric in PROPORTIONS and tally.count:
            lo, hi = wilson_interval(tally.total, tally.count)
            text += f" [{lo:.3g}, {hi:.3g}]"
        lines.append(f"{text} ({trials} trials)")
    for label, n in outcome.degenerate.items():
        lines.append(f"[WARNING] {label}: {n} trial(s) lost to degenerate messages at snr={point.snr_db:g} dB")
    return lines


def run_point(cfg: ExperimentConfig, point: GridPoint, executor: Executor | None = None,
              progress: ProgressCallback = None, cancel_event: threading.Event | None = None,
              workers: int = 1) -> list[ResultRow]:
    """
    Run one grid point, extending in batches until every proportion is
    resolved to the target relative half-width or the trial cap is hit.

    Without max_trials the cap is HIDEX_TRIAL_CAP; set max_trials = trials
    to run exactly `trials` trials.
    """
    cap = _trial_cap(cfg)
    total = TrialOutcome()
    done = 0
    batch = cfg.trials
    while True:
        if cancel_event is not None and cancel_event.is_set():
            raise SweepCancelled(f"sweep cancelled at snr={point.snr_db:g} dB after {done} trials")
        for outcome in _run_batch(cfg, point, range(done, done + batch), executor, workers):
            total.merge(outcome)
        done += batch
        if done >= cap or total.converged(cfg.target_rel_halfwidth):
            break
        batch = min(config.harness.batch_trials, cap - done)

    for line in _describe(point, total, done):
        if config.verbose:
            _log(line)
        if progress is not None:
            progress(line)
    return _rows(cfg, point, total, done)


def run_sweep(cfg: ExperimentConfig, workers: int | None = None, progress: ProgressCallback = None,
              cancel_event: threading.Event | None = None) -> list[ResultRow]:
    """
    Run every grid point of the experiment and return its result rows.

    Rows come out in grid order, then in the order receivers first reported.
    The threshold scenario also appends one BER-ratio row per level.
    """
    workers = workers or config.harness.workers
    if cfg.scenario in CODED_SCENARIOS:
        code_for(cfg.code)  # fail fast on a bad code before spawning workers
    points = grid_points(cfg)
    rows: list[ResultRow] = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for point in points:
            rows.extend(run_point(cfg, point, executor, progress, cancel_event, workers))
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
    if cfg.scenario == Scenario.THRESHOLD:
        rows.extend(_ratio_rows(cfg, rows))
    return rows


# === Interference threshold ===

class ThresholdResult(NamedTuple):
    """Interferer power ratio (dB) where the MMSE/BP BER ratio crosses the target."""
    threshold_db: float | None  # None when the grid never crosses the target
    max_ratio: float
    rows: list[ResultRow]

    @property
    def in_range(self) -> bool:
        return self.threshold_db is not None


def _ber_ratio(ber_mmse: float, ber_bp: float) -> float:
    if ber_bp > 0:
        return ber_mmse / ber_bp
    return math.inf if ber_mmse > 0 else math.nan


def _ratio_rows(cfg: ExperimentConfig, rows: list[ResultRow]) -> list[ResultRow]:
    by_point: dict[tuple[float, float], dict[str, ResultRow]] = {}
    for row in rows:
        if row.metric == Metric.BER:
            by_point.setdefault((row.snr_db, row.sinr_db), {})[row.receiver] = row
    out = []
    for (snr, sinr), found in by_point.items():
        bp, mmse = found.get(ReceiverName.BP.value), found.get(ReceiverName.MMSE.value)
        if bp is None or mmse is None:
            continue
        out.append(ResultRow(
            scenario=cfg.scenario.value,
            receiver="mmse/bp",
            snr_db=snr,
            sinr_db=sinr,
            metric=Metric.BER_RATIO,
            value=_ber_ratio(mmse.value, bp.value),
            count=bp.count,
            trials=bp.trials,
            seed=cfg.seed,
        ))
    return out


def locate_threshold(levels_db: list[float], ratios: list[float], target: float = 3.0) -> float | None:
    """
    Weakest interferer level at which the ratio reaches the target.

    Scans levels from weakest to strongest and interpolates linearly across
    the first upward crossing. Returns None when the weakest level already
    meets the target or no level does.
    """
    order = np.argsort(levels_db, kind="stable")
    levels = np.asarray(levels_db, dtype=float)[order]
    values = np.asarray(ratios, dtype=float)[order]
    above = np.nan_to_num(values, nan=-np.inf) >= target
    if not above.any() or above[0]:
        return None
    j = int(np.argmax(above))
    if math.isinf(values[j]):
        return float(levels[j])
    x0, x1, r0, r1 = levels[j - 1], levels[j], values[j - 1], values[j]
    if math.isnan(r0):
        return float(x1)
    return float(x0 + (target - r0) * (x1 - x0) / (r1 - r0))


def find_sinr_threshold(cfg: ExperimentConfig, workers: int | None = None, progress: ProgressCallback = None,
                        cancel_event: threading.Event | None = None) -> ThresholdResult:
    """
    Sweep the interferer power at the first SNR of the grid and locate where
    BER(mmse) / BER(bp) crosses the configured target.
    """
    cfg = cfg.model_copy(update={"scenario": Scenario.THRESHOLD, "snr_grid_db": cfg.snr_grid_db[:1]})
    rows = run_sweep(cfg, workers, progress, cancel_event)
    level_of = {(p.snr_db, p.sinr_db): p.power_ratio_db for p in grid_points(cfg)}
    ratio_rows = [r for r in rows if r.metric == Metric.BER_RATIO]
    levels = [level_of[(r.snr_db, r.sinr_db)] for r in ratio_rows]
    ratios = [r.value for r in ratio_rows]
    finite = [v for v in ratios if not math.isnan(v)]
    threshold = locate_threshold(levels, ratios, cfg.threshold.ratio_target)
    max_ratio = max(finite) if finite else math.nan
    if threshold is None:
        _log(f"[WARNING] BER ratio never crosses {cfg.threshold.ratio_target} on the grid "
             f"(max observed {max_ratio:.3g})")
    return ThresholdResult(threshold_db=threshold, max_ratio=max_ratio, rows=rows)


# === Detection knee ===

class DetectionKnee(NamedTuple):
    """Where the preamble fault probability rises fastest against SINR."""
    knee_db: float | None  # midpoint of the steepest segment; None with fewer than two levels
    slope: float  # fault-probability rise per dB across that segment
    growth: float  # P(fault) at the high end of the span over P(fault) at the low end
    monotone: bool  # no level falls significantly below its weaker neighbour
    rows: list[ResultRow]

    def describe(self) -> str:
        if self.knee_db is None:
            return "knee: need at least two SINR levels"
        lo, hi = KNEE_SPAN_DB
        return (
            f"knee: steepest rise at {self.knee_db:.2f} dB SINR ({self.slope:.3g} per dB), "
            f"P(fault) {lo:g}->{hi:g} dB grows {self.growth:.3g}x, "
            f"monotone={'yes' if self.monotone else 'no'}"
        )


def locate_knee(levels_db: list[float], probabilities: list[float]) -> tuple[float | None, float]:
    """
    Midpoint and slope of the steepest rise between consecutive levels.

    Levels are sorted first. Returns (None, nan) when fewer than two levels
    are given.
    """
    order = np.argsort(levels_db, kind="stable")
    levels = np.asarray(levels_db, dtype=float)[order]
    values = np.asarray(probabilities, dtype=float)[order]
    if levels.size < 2:
        return None, math.nan
    slopes = np.diff(values) / np.diff(levels)
    j = int(np.argmax(slopes))
    return float((levels[j] + levels[j + 1]) / 2), float(slopes[j])


def fault_growth(levels_db: list[float], probabilities: list[float],
                 span_db: tuple[float, float] = KNEE_SPAN_DB) -> float:
    """P(fault) at span_db[1] over P(fault) at span_db[0], linearly interpolated on the grid."""
    order = np.argsort(levels_db, kind="stable")
    levels = np.asarray(levels_db, dtype=float)[order]
    values = np.asarray(probabilities, dtype=float)[order]
    lo, hi = (float(np.interp(x, levels, values)) for x in span_db)
    if lo > 0:
        return hi / lo
    return math.inf if hi > 0 else math.nan


def _monotone(rows: list[ResultRow]) -> bool:
    ordered = sorted(rows, key=lambda r: r.sinr_db)
    for weak, strong in zip(ordered, ordered[1:]):
        _, hi = wilson_interval(round(strong.value * strong.count), strong.count)
        lo, _ = wilson_interval(round(weak.value * weak.count), weak.count)
        if hi < lo:
            return False
    return True


def summarize_detection(rows: list[ResultRow]) -> DetectionKnee:
    """
    Knee, growth and monotonicity of the fault-probability curve.

    Only the first SNR in the rows is summarized.
    """
    faults = [r for r in rows if r.metric == Metric.FAULT_PROB]
    if not faults:
        raise ConfigurationError("no fault-probability rows to summarize")
    snr = faults[0].snr_db
    faults = [r for r in faults if r.snr_db == snr]
    levels = [r.sinr_db for r in faults]
    values = [r.value for r in faults]
    knee_db, slope = locate_knee(levels, values)
    return DetectionKnee(
        knee_db=knee_db,
        slope=slope,
        growth=fault_growth(levels, values),
        monotone=_monotone(faults),
        rows=rows,
    )


def find_detection_knee(cfg: ExperimentConfig, workers: int | None = None, progress: ProgressCallback = None,
                        cancel_event: threading.Event | None = None) -> DetectionKnee:
    """Run the detect-prob sweep and summarize its fault-probability curve."""
    cfg = cfg.model_copy(update={"scenario": Scenario.DETECT_PROB})
    summary = summarize_detection(run_sweep(cfg, workers, progress, cancel_event))
    if not summary.monotone:
        _log("[WARNING] fault probability falls significantly between neighbouring SINR levels")
    return summary
