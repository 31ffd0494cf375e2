"""
Irregular LDPC codes: progressive-edge-growth construction, systematic
encoding, sum-product decoding, and the detector/decoder exchange loop.

Parity-check file format (one code per file):
    line 1:        "n m"
    lines 2..m+1:  1-based variable indices of check j, space separated
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import galois
import numpy as np
from scipy import sparse

from .bp import ChannelModel, SymbolPrior, bp_detect, extrinsic_llrs
from .channel import ReceivedFrame
from .errors import ConstructionError, OutputError, ParameterError, ShapeError

GF2 = galois.GF(2)
DEFAULT_PROFILE = {2: 0.5, 3: 0.3, 8: 0.2}
TANH_LIMIT = 0.9999999999999  # keeps arctanh finite
MAX_CONSTRUCTION_ATTEMPTS = 20


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Binary code defined by a sparse parity-check matrix, with a systematic encoder."""
    H: sparse.csr_array
    info_positions: np.ndarray  # codeword positions carrying the message, in message order
    parity_positions: np.ndarray
    parity_map: np.ndarray  # (n - k, k) over GF(2): parity bits = parity_map @ msg

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k(self) -> int:
        return self.info_positions.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def variable_degrees(self) -> np.ndarray:
        return np.asarray(self.H.sum(axis=0)).ravel().astype(int)

    @property
    def check_degrees(self) -> np.ndarray:
        return np.asarray(self.H.sum(axis=1)).ravel().astype(int)

    @classmethod
    def from_parity_check(cls, H) -> LdpcCode:
        """Row-reduce H over GF(2) and derive the systematic encoder."""
        dense = np.asarray(H.toarray() if sparse.issparse(H) else H, dtype=np.uint8) % 2
        reduced = np.asarray(GF2(dense).row_reduce(), dtype=np.uint8)
        nonzero_rows = np.flatnonzero(reduced.any(axis=1))
        reduced = reduced[nonzero_rows]
        pivots = np.argmax(reduced, axis=1)
        info = np.setdiff1d(np.arange(dense.shape[1]), pivots)
        return cls(
            H=sparse.csr_array(dense.astype(np.int8)),
            info_positions=info,
            parity_positions=pivots,
            parity_map=reduced[:, info],
        )


@dataclass(frozen=True)
class Schedule:
    """i_det detector/decoder exchanges with i_dec decoder iterations each."""
    i_det: int
    i_dec: int

    def __post_init__(self):
        if self.i_det < 1 or self.i_dec < 1:
            raise ParameterError(f"schedule counts must be at least 1, got ({self.i_det}, {self.i_dec})")


@dataclass(frozen=True, eq=False)
class DecodeResult:
    """Sum-product decoder output."""
    bits: np.ndarray  # hard codeword decisions
    parity_ok: bool
    iterations: int
    llr_total: np.ndarray
    llr_extrinsic: np.ndarray  # total minus the channel input


# === Construction ===

def degree_counts(profile: dict[int, float], n: int) -> np.ndarray:
    """
    Per-variable degrees from an edge-perspective profile.

    Edge fractions lambda_d become node fractions proportional to lambda_d / d,
    rounded to node counts by largest remainder.
    """
    if not profile or any(d < 1 or f <= 0 for d, f in profile.items()):
        raise ConstructionError(f"infeasible degree profile {profile}")
    if not math.isclose(sum(profile.values()), 1.0, abs_tol=1e-6):
        raise ConstructionError(f"profile fractions sum to {sum(profile.values())}, expected 1")
    degrees = np.array(sorted(profile))
    node_share = np.array([profile[d] / d for d in degrees])
    exact = n * node_share / node_share.sum()
    counts = np.floor(exact).astype(int)
    shortfall = n - counts.sum()
    counts[np.argsort(-(exact - counts), kind="stable")[:shortfall]] += 1
    return np.repeat(degrees, counts)


def _peg_candidates(v: int, var_adj: list[list[int]], check_adj: list[set[int]], m: int) -> set[int]:
    """Checks at maximum distance from v in its current subgraph (progressive edge growth)."""
    reached = set(var_adj[v])
    frontier = set(var_adj[v])
    seen_vars = {v}
    while True:
        next_vars = {u for c in frontier for u in check_adj[c]} - seen_vars
        seen_vars |= next_vars
        next_checks = {c for u in next_vars for c in var_adj[u]} - reached
        if not next_checks or len(reached) + len(next_checks) == m:
            return set(range(m)) - reached
        reached |= next_checks
        frontier = next_checks


def peg_construct(var_degrees: np.ndarray, m: int, rng: np.random.Generator) -> sparse.csr_array:
    """
    Progressive-edge-growth parity-check matrix.

    Variables are connected lowest degree first; each new edge goes to a
    least-loaded check among those farthest from the variable. Checks that
    would close a 4-cycle are never eligible.
    """
    n = var_degrees.shape[0]
    if int(var_degrees.max()) > m:
        raise ConstructionError(f"variable degree {var_degrees.max()} exceeds the {m} checks")
    var_adj: list[list[int]] = [[] for _ in range(n)]
    check_adj: list[set[int]] = [set() for _ in range(m)]
    check_deg = np.zeros(m, dtype=int)

    for v in np.argsort(var_degrees, kind="stable"):
        for _ in range(int(var_degrees[v])):
            if var_adj[v]:
                candidates = _peg_candidates(v, var_adj, check_adj, m)
                neighbours = {u for c in var_adj[v] for u in check_adj[c]} - {v}
                forbidden = {c for u in neighbours for c in var_adj[u]} | set(var_adj[v])
                candidates -= forbidden
                if not candidates:
                    # Farthest checks all close a 4-cycle; any safe check will do.
                    candidates = set(range(m)) - forbidden
            else:
                candidates = set(range(m))
            if not candidates:
                raise ConstructionError(f"no 4-cycle-free check left for variable {v}")
            pool = np.array(sorted(candidates))
            loads = check_deg[pool]
            lightest = pool[loads == loads.min()]
            c = int(rng.choice(lightest))
            var_adj[v].append(c)
            check_adj[c].add(int(v))
            check_deg[c] += 1

    rows = np.concatenate([np.full(len(vs), c) for c, vs in enumerate(check_adj)]).astype(int)
    cols = np.concatenate([sorted(vs) for vs in check_adj]).astype(int)
    data = np.ones(rows.shape[0], dtype=np.int8)
    return sparse.csr_array((data, (rows, cols)), shape=(m, n))


def has_four_cycles(H) -> bool:
    """True when two checks share more than one variable."""
    H = sparse.csr_array(H, dtype=np.int32)
    overlap = (H @ H.T).tocoo()
    off_diagonal = overlap.row != overlap.col
    return bool(np.any(overlap.data[off_diagonal] > 1))


def build_code(n: int = 500, k: int = 250, profile: dict[int, float] | None = None, seed: int = 0) -> LdpcCode:
    """
    Construct an (n, k) irregular code by progressive edge growth.

    The construction is retried with seed+1, seed+2, ... until H has full
    rank n - k; every returned code is free of 4-cycles.
    """
    if not 0 < k < n:
        raise ParameterError(f"need 0 < k < n, got n={n}, k={k}")
    degrees = degree_counts(profile or DEFAULT_PROFILE, n)
    m = n - k
    if int(degrees.max()) > m:
        raise ConstructionError(f"variable degree {degrees.max()} exceeds the {m} checks")
    for attempt in range(MAX_CONSTRUCTION_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        try:
            H = peg_construct(degrees, m, rng)
        except ConstructionError:
            continue
        if has_four_cycles(H):
            continue
        code = LdpcCode.from_parity_check(H)
        if code.k == k:
            return code
    raise ConstructionError(f"no full-rank ({n}, {k}) code after {MAX_CONSTRUCTION_ATTEMPTS} attempts")


def save_code(code: LdpcCode, path: str | Path):
    """Write H in the sparse parity-check text format."""
    H = code.H.tocsr()
    lines = [f"{code.n} {code.m}"]
    for j in range(code.m):
        cols = H.indices[H.indptr[j] : H.indptr[j + 1]]
        lines.append(" ".join(str(int(c) + 1) for c in np.sort(cols)))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise OutputError(f"cannot write parity-check file ({e.strerror})", str(path)) from e


def load_code(path: str | Path) -> LdpcCode:
    """Read a code written by save_code (or any file in the same format)."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise OutputError(f"cannot read parity-check file ({e.strerror})", str(path)) from e
    lines = text.splitlines()
    try:
        n, m = (int(v) for v in lines[0].split())
        rows, cols = [], []
        for j in range(m):
            for token in lines[1 + j].split():
                col = int(token) - 1
                if not 0 <= col < n:
                    raise ValueError(f"variable index {token} out of range")
                rows.append(j)
                cols.append(col)
    except (ValueError, IndexError) as e:
        raise ConstructionError(f"malformed parity-check file {path}: {e}") from e
    H = sparse.csr_array((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(m, n))
    return LdpcCode.from_parity_check(H)


# === Encoding / decoding ===

def encode(code: LdpcCode, msg: np.ndarray) -> np.ndarray:
    """Systematic codeword: message at info_positions, parity bits at the pivots."""
    msg = np.asarray(msg, dtype=np.uint8)
    if msg.shape != (code.k,):
        raise ShapeError(f"message must have {code.k} bits, got {msg.shape[0]}")
    codeword = np.zeros(code.n, dtype=np.int8)
    codeword[code.info_positions] = msg
    codeword[code.parity_positions] = (code.parity_map.astype(np.int64) @ msg) % 2
    return codeword


def syndrome(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    return (code.H @ np.asarray(bits, dtype=np.int64)) % 2


def message_bits(code: LdpcCode, codeword: np.ndarray) -> np.ndarray:
    return np.asarray(codeword)[code.info_positions]


@dataclass(frozen=True, eq=False)
class _EdgeLayout:
    """Edges sorted by check, with each edge's slot in its check row."""
    checks: np.ndarray
    variables: np.ndarray
    slots: np.ndarray
    max_check_degree: int

    @classmethod
    def of(cls, code: LdpcCode) -> _EdgeLayout:
        H = code.H.tocsr()
        H.sort_indices()
        degrees = np.diff(H.indptr)
        checks = np.repeat(np.arange(code.m), degrees)
        slots = np.arange(checks.shape[0]) - H.indptr[checks]
        return cls(checks=checks, variables=H.indices.astype(int), slots=slots,
                   max_check_degree=int(degrees.max()))


def _exclusive_products(values: np.ndarray) -> np.ndarray:
    """Row-wise product of every entry except itself, computed without division."""
    ones = np.ones((values.shape[0], 1))
    prefix = np.cumprod(np.hstack([ones, values[:, :-1]]), axis=1)
    suffix = np.cumprod(np.hstack([ones, values[:, :0:-1]]), axis=1)[:, ::-1]
    return prefix * suffix


def decode(code: LdpcCode, llrs: np.ndarray, iters: int) -> DecodeResult:
    """
    Sum-product (tanh rule) decoding with early stop on a zero syndrome.

    LLRs are log P(bit=0)/P(bit=1). At least one iteration always runs so
    the extrinsic output is informative. A decode counts as valid only when
    the syndrome is zero and no total LLR is exactly zero.
    """
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (code.n,):
        raise ShapeError(f"expected {code.n} LLRs, got {llrs.shape[0]}")
    if iters < 1:
        raise ParameterError(f"iters must be at least 1, got {iters}")
    edges = _EdgeLayout.of(code)
    view = np.ones((code.m, edges.max_check_degree))

    v2c = llrs[edges.variables]
    total = llrs.copy()
    bits = (total < 0).astype(np.int8)
    parity_ok = False
    used = 0
    for used in range(1, iters + 1):
        view[:] = 1.0
        view[edges.checks, edges.slots] = np.tanh(v2c / 2.0)
        excl = _exclusive_products(view)[edges.checks, edges.slots]
        c2v = 2.0 * np.arctanh(np.clip(excl, -TANH_LIMIT, TANH_LIMIT))
        total = llrs + np.bincount(edges.variables, weights=c2v, minlength=code.n)
        v2c = total[edges.variables] - c2v
        bits = (total < 0).astype(np.int8)
        parity_ok = not syndrome(code, bits).any() and bool(np.all(total != 0))
        if parity_ok:
            break
    return DecodeResult(
        bits=bits,
        parity_ok=parity_ok,
        iterations=used,
        llr_total=total,
        llr_extrinsic=total - llrs,
    )


# === Joint detection and decoding ===

@dataclass(frozen=True, eq=False)
class JointResult:
    """Final per-user decoder outputs plus per-exchange diagnostics."""
    results: list[DecodeResult | None]
    parity_history: list[list[bool]] = field(default_factory=list)

    def message(self, code: LdpcCode, user: int) -> np.ndarray | None:
        result = self.results[user]
        return None if result is None else message_bits(code, result.bits)


def joint_receive(
    y: ReceivedFrame,
    priors: SymbolPrior,
    model: ChannelModel,
    code: LdpcCode,
    schedule: Schedule,
    positions: list[np.ndarray | None],
    k_max: int | None = 8,
) -> JointResult:
    """
    Iterate detector and decoder, exchanging extrinsic information.

    `positions[u]` lists the absolute time of each code bit of user u (-1
    when the receiver places the bit outside the window; None skips the
    user). Each exchange runs one detector sweep under the current priors,
    decodes each user's detector extrinsic LLRs with i_dec iterations, and
    turns the decoder extrinsic LLRs into the next symbol priors.
    """
    for pos in positions:
        if pos is not None and pos.shape != (code.n,):
            raise ShapeError(f"each user needs {code.n} code-bit positions")
    current = priors
    results: list[DecodeResult | None] = [None] * len(positions)
    history = []
    for _ in range(schedule.i_det):
        posterior = bp_detect(y, current, model, k_max)
        updated = current
        flags = []
        for user, pos in enumerate(positions):
            if pos is None:
                continue
            inside = pos >= 0
            channel = np.zeros(code.n)
            channel[inside] = extrinsic_llrs(posterior, current, user, pos[inside])
            result = decode(code, channel, schedule.i_dec)
            results[user] = result
            flags.append(result.parity_ok)
            updated = updated.with_data_llrs(user, pos[inside], result.llr_extrinsic[inside])
        history.append(flags)
        current = updated
    return JointResult(results=results, parity_history=history)
