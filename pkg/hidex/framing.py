"""
Packet construction and two-packet collision scenes.

A frame is preamble + header + payload region, where the payload region
follows the pilot pattern "P D ... D" (one pilot then pilot_period - 1 data
symbols) until every payload bit has a slot. Symbols are BPSK: bit 0 -> +1,
bit 1 -> -1.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ShapeError

PILOT_SYMBOL = 1.0
SIDELOBE_LIMIT = 0.35
MAX_PREAMBLE_DRAWS = 1000


def _log(msg: str):
    """Log to stderr."""
    print(msg, file=sys.stderr, flush=True)


@dataclass(frozen=True)
class PacketSpec:
    """Lengths of the frame sections, in symbols."""
    preamble_len: int
    header_len: int = 16
    payload_len: int = 0
    pilot_period: int = 4

    def __post_init__(self):
        if self.preamble_len < 1:
            raise ParameterError(f"preamble_len must be at least 1, got {self.preamble_len}")
        if self.header_len < 0 or self.payload_len < 0:
            raise ParameterError("section lengths must be nonnegative")
        if self.pilot_period < 1:
            raise ParameterError(f"pilot_period must be at least 1, got {self.pilot_period}")
        if self.payload_len > 0 and self.pilot_period < 2:
            raise ParameterError("pilot_period 1 leaves no room for payload data")

    @property
    def payload_slots(self) -> int:
        """Payload data plus the pilots interleaved with it."""
        if self.payload_len == 0:
            return 0
        return self.payload_len + math.ceil(self.payload_len / (self.pilot_period - 1))

    @property
    def prefix_len(self) -> int:
        """Preamble plus header."""
        return self.preamble_len + self.header_len

    @property
    def total_len(self) -> int:
        return self.prefix_len + self.payload_slots

    def pilot_pattern(self) -> np.ndarray:
        """Pilot mask over the payload region (True = pilot)."""
        slots = np.arange(self.payload_slots)
        return slots % self.pilot_period == 0

    def data_positions(self) -> np.ndarray:
        """Frame-relative indices of payload data slots, in bit order."""
        return np.flatnonzero(~self.pilot_pattern()) + self.prefix_len


@dataclass(frozen=True, eq=False)
class Frame:
    """A modulated packet with its section layout."""
    symbols: np.ndarray
    pilot_map: np.ndarray
    preamble_len: int
    header_span: range
    payload_span: range
    bits: np.ndarray  # payload bits carried by the data slots

    def __post_init__(self):
        if self.symbols.shape != self.pilot_map.shape:
            raise ShapeError("symbols and pilot map differ in length")

    def __len__(self) -> int:
        return self.symbols.shape[0]

    @property
    def known_map(self) -> np.ndarray:
        """Positions whose symbol the receiver knows in advance (preamble and pilots)."""
        known = self.pilot_map.copy()
        known[: self.preamble_len] = True
        return known

    @property
    def data_positions(self) -> np.ndarray:
        """Indices of payload data symbols, in bit order."""
        payload = np.zeros(len(self), dtype=bool)
        payload[self.payload_span.start : self.payload_span.stop] = True
        return np.flatnonzero(payload & ~self.pilot_map)


def peak_sidelobe(sequence: np.ndarray) -> float:
    """Largest aperiodic autocorrelation magnitude at a nonzero lag, normalized by length."""
    length = len(sequence)
    if length < 2:
        return 0.0
    acf = np.correlate(sequence, sequence, mode="full")
    sidelobes = np.delete(acf, length - 1)
    return float(np.max(np.abs(sidelobes)) / length)


@lru_cache(maxsize=32)
def _screened_preamble(length: int, seed: int) -> tuple[float, ...]:
    best, best_psl = None, math.inf
    for attempt in range(MAX_PREAMBLE_DRAWS):
        rng = np.random.default_rng(seed + attempt)
        candidate = 1.0 - 2.0 * rng.integers(0, 2, size=length)
        psl = peak_sidelobe(candidate)
        if psl < SIDELOBE_LIMIT:
            return tuple(candidate)
        if psl < best_psl:
            best, best_psl = candidate, psl
    _log(
        f"[WARNING] no length-{length} preamble below sidelobe {SIDELOBE_LIMIT} "
        f"after {MAX_PREAMBLE_DRAWS} draws; using best found ({best_psl:.3f})"
    )
    return tuple(best)


def gen_preamble(L: int, seed: int) -> np.ndarray:
    """
    Pseudo-random +/-1 preamble shared by every station.

    Draws are screened for off-peak autocorrelation below 0.35 (normalized);
    a failing draw is replaced by the draw for seed+1, seed+2, ... so the
    result stays a deterministic function of (L, seed).
    """
    if L < 1:
        raise ParameterError(f"preamble length must be at least 1, got {L}")
    return np.array(_screened_preamble(int(L), int(seed)))


def encode_header(length: int, header_len: int) -> np.ndarray:
    """Frame length as an unsigned MSB-first integer of header_len bits."""
    if header_len == 0:
        return np.zeros(0, dtype=np.int8)
    if not 0 <= length < 2 ** header_len:
        raise ParameterError(f"frame length {length} does not fit in a {header_len}-bit header")
    shifts = np.arange(header_len - 1, -1, -1)
    return ((length >> shifts) & 1).astype(np.int8)


def decode_header(bits: np.ndarray) -> int:
    """Inverse of encode_header."""
    value = 0
    for bit in np.asarray(bits, dtype=int):
        value = (value << 1) | int(bit)
    return value


def modulate(bits: np.ndarray) -> np.ndarray:
    """BPSK map: 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def demap(symbols: np.ndarray) -> np.ndarray:
    """Hard BPSK demapping; nonnegative values map to bit 0."""
    return (np.asarray(symbols) < 0).astype(np.int8)


def build_frame(payload_bits: np.ndarray, spec: PacketSpec, seed: int) -> Frame:
    """Assemble preamble, length header and pilot-interleaved payload."""
    payload_bits = np.asarray(payload_bits, dtype=np.int8)
    if payload_bits.shape != (spec.payload_len,):
        raise ShapeError(f"expected {spec.payload_len} payload bits, got {payload_bits.shape[0]}")

    preamble = gen_preamble(spec.preamble_len, seed)
    header = modulate(encode_header(spec.total_len, spec.header_len))

    pattern = spec.pilot_pattern()
    payload = np.full(spec.payload_slots, PILOT_SYMBOL)
    payload[~pattern] = modulate(payload_bits)

    pilot_map = np.concatenate([np.zeros(spec.prefix_len, dtype=bool), pattern])
    return Frame(
        symbols=np.concatenate([preamble, header, payload]),
        pilot_map=pilot_map,
        preamble_len=spec.preamble_len,
        header_span=range(spec.preamble_len, spec.prefix_len),
        payload_span=range(spec.prefix_len, spec.total_len),
        bits=payload_bits,
    )


@dataclass(frozen=True, eq=False)
class CollisionScene:
    """Two frames on a common absolute time axis; frame_b starts at `offset`."""
    frame_a: Frame
    frame_b: Frame
    offset: int
    power_ratio_db: float = 0.0

    def __post_init__(self):
        if self.offset < 0:
            raise ParameterError(f"offset must be nonnegative, got {self.offset}")

    @property
    def window_len(self) -> int:
        return max(len(self.frame_a), self.offset + len(self.frame_b))

    @property
    def overlap(self) -> range:
        """Absolute times where both packets are on the air."""
        stop = min(len(self.frame_a), self.offset + len(self.frame_b))
        return range(self.offset, max(self.offset, stop))

    def active(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean activity masks of both users over the window."""
        window = self.window_len
        active_a = np.zeros(window, dtype=bool)
        active_a[: len(self.frame_a)] = True
        active_b = np.zeros(window, dtype=bool)
        active_b[self.offset : self.offset + len(self.frame_b)] = True
        return active_a, active_b

    def signals(self) -> tuple[np.ndarray, np.ndarray]:
        """x_i and x'_i over the window, zero where a user is silent."""
        window = self.window_len
        x_a = np.zeros(window)
        x_a[: len(self.frame_a)] = self.frame_a.symbols
        x_b = np.zeros(window)
        x_b[self.offset : self.offset + len(self.frame_b)] = self.frame_b.symbols
        return x_a, x_b

    def header_in_clear(self) -> bool:
        """True when the first packet's header ends before the second packet starts."""
        return self.offset >= self.frame_a.header_span.stop


def make_collision(frame_a: Frame, frame_b: Frame, offset: int, power_ratio_db: float = 0.0) -> CollisionScene:
    """Place frame_b `offset` symbols after the start of frame_a."""
    return CollisionScene(frame_a=frame_a, frame_b=frame_b, offset=int(offset), power_ratio_db=power_ratio_db)
