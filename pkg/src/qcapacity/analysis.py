"""Transcript files, bound sweeps and fluctuation analyses.

Record files are plain CSV::

    # kind=estimation
    # q=0.9
    index,basis,prepared,outcome
    0,X,1,1
    1,Z,0,0
    2,D,,

Lines starting with ``#`` carry ``key=value`` metadata. Data slots (``D``)
have empty bit fields; measured data from an experiment only has X and Z.
"""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .bounds import (
    BoundParams,
    BoundResult,
    asymptotic_rate,
    general_estimation_bound,
    optimize_bound,
)
from .channels import BASIS_CODES, BASIS_DATA, BASIS_X, BASIS_Z
from .protocol import NO_BIT, ErrorRates, Transcript

HEADER = "index,basis,prepared,outcome"


class RecordError(ValueError):
    """A record file cannot be used for the requested computation."""


class RecordFormatError(RecordError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True, eq=False)
class RecordFile:
    transcript: Transcript
    metadata: dict[str, str] = field(default_factory=dict)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def format_records(transcript: Transcript, metadata: dict[str, object] | None = None) -> str:
    meta: dict[str, object] = {"kind": transcript.kind}
    if transcript.seed is not None:
        meta["seed"] = transcript.seed
    if transcript.channel:
        meta["channel"] = transcript.channel
    meta.update(metadata or {})
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(HEADER)
    labels = ("X", "Z", "D")
    for i, b, s, o in zip(transcript.index.tolist(), transcript.basis.tolist(),
                          transcript.prepared.tolist(), transcript.outcome.tolist()):
        lines.append(f"{i},D,," if b == BASIS_DATA else f"{i},{labels[b]},{s},{o}")
    return "\n".join(lines) + "\n"


def write_records(path: str | os.PathLike, transcript: Transcript,
                  metadata: dict[str, object] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_records(transcript, metadata))


def _parse(lines: Iterable[str]) -> RecordFile:
    metadata: dict[str, str] = {}
    index: list[int] = []
    basis: list[int] = []
    prepared: list[int] = []
    outcome: list[int] = []
    seen_header = False
    bits = {"0": 0, "1": 1}
    last = -1
    for row, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                metadata[key.strip()] = value.strip()
            continue
        if not seen_header:
            if line.strip() != HEADER:
                raise RecordFormatError(row, f"expected header {HEADER!r}, got {line!r}")
            seen_header = True
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise RecordFormatError(row, f"expected 4 fields, got {len(fields)}")
        idx, b, s, o = fields
        try:
            i = int(idx)
        except ValueError:
            raise RecordFormatError(row, f"index {idx!r} is not an integer") from None
        if i <= last:
            raise RecordFormatError(row, f"index {i} is not strictly increasing")
        last = i
        code = BASIS_CODES.get(b)
        if code is None:
            raise RecordFormatError(row, f"basis {b!r} is not X, Z or D")
        if code == BASIS_DATA:
            if s or o:
                raise RecordFormatError(row, "data slots must have empty bit fields")
            sv = ov = NO_BIT
        else:
            if s not in bits:
                raise RecordFormatError(row, f"prepared bit {s!r} is not 0 or 1")
            if o not in bits:
                raise RecordFormatError(row, f"outcome bit {o!r} is not 0 or 1")
            sv, ov = bits[s], bits[o]
        index.append(i)
        basis.append(code)
        prepared.append(sv)
        outcome.append(ov)
    if not seen_header:
        raise RecordFormatError(0, "missing header line")
    seed = metadata.get("seed")
    transcript = Transcript(
        metadata.get("kind", "record"),
        np.array(index, dtype=np.int64),
        np.array(basis, dtype=np.uint8),
        np.array(prepared, dtype=np.int8),
        np.array(outcome, dtype=np.int8),
        int(seed) if seed is not None and seed.lstrip("-").isdigit() else None,
        metadata.get("channel", ""),
    )
    return RecordFile(transcript, metadata)


def parse_records(text: str | TextIO) -> RecordFile:
    if isinstance(text, str):
        text = io.StringIO(text)
    return _parse(text)


def read_records(path: str | os.PathLike) -> RecordFile:
    with open(path, encoding="utf-8") as fh:
        return _parse(fh)


def _as_transcript(records: RecordFile | Transcript) -> Transcript:
    return records.transcript if isinstance(records, RecordFile) else records


def ingest(records: RecordFile | Transcript) -> tuple[Transcript, ErrorRates]:
    """Error rates with per-basis denominators; both bases must be present."""
    transcript = _as_transcript(records)
    rates = transcript.error_rates()
    if rates.n_x == 0 or rates.n_z == 0:
        missing = "X" if rates.n_x == 0 else "Z"
        raise RecordError(f"no {missing}-basis rows; cannot compute both error rates")
    return transcript, rates


def bound_from_rates(rates: ErrorRates, q: float, epsilon: float, p: float | None = None, *,
                     log2_one_minus_p: float | None = None) -> BoundResult:
    """Estimation bound for realised counts (general split, joint ``p``)."""
    return general_estimation_bound(rates.n_x, rates.n_z, q, rates.e_x, rates.e_z, epsilon,
                                    p=p, log2_one_minus_p=log2_one_minus_p)


# -- sweeps ------------------------------------------------------------------

class SweepRow(NamedTuple):
    axis_value: float
    rate: float
    value: float
    eta_star: float


SWEEP_VARIANTS = ("estimation", "verification", "general-estimation")


@dataclass(frozen=True)
class SweepSpec:
    """One bound evaluation per grid point along ``N`` or ``epsilon``.

    For ``axis="N"`` grid values are rounded to valid qubit counts (even for
    estimation). The ``general-estimation`` variant sweeps ``epsilon`` at a
    fixed X/Z split ``(n_x, n_z)``.
    """

    axis: str
    grid: tuple[float, ...]
    q: float
    e_x: float
    e_z: float
    epsilon: float | None = None
    N: int | None = None
    p: float | None = None
    log2_one_minus_p: float | None = None
    variant: str = "estimation"
    n_x: int | None = None
    n_z: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.axis not in ("N", "epsilon"):
            raise ValueError(f"axis must be 'N' or 'epsilon', got {self.axis!r}")
        if self.variant not in SWEEP_VARIANTS:
            raise ValueError(f"variant must be one of {SWEEP_VARIANTS}, got {self.variant!r}")
        if not self.grid:
            raise ValueError("grid is empty")
        if any(g <= 0 or not math.isfinite(g) for g in self.grid):
            raise ValueError("grid values must be positive and finite")
        if any(b < a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be sorted ascending")
        if self.axis == "N" and self.epsilon is None:
            raise ValueError("an N sweep needs a fixed epsilon")
        if self.axis == "epsilon":
            if self.variant == "general-estimation":
                if self.n_x is None or self.n_z is None:
                    raise ValueError("general-estimation sweeps need n_x and n_z")
            elif self.N is None:
                raise ValueError("an epsilon sweep needs a fixed N")
        elif self.variant == "general-estimation":
            raise ValueError("general-estimation sweeps run along epsilon only")
        if (self.p is None) == (self.log2_one_minus_p is None):
            raise ValueError("give exactly one of p and log2_one_minus_p")

    @classmethod
    def log_grid(cls, axis: str, start: float, stop: float, num: int, **fixed) -> "SweepSpec":
        if num < 1:
            raise ValueError("num must be >= 1")
        grid = np.geomspace(start, stop, num) if num > 1 else np.array([float(start)])
        return cls(axis, tuple(grid.tolist()), **fixed)

    def qubits(self, value: float) -> int:
        if self.variant == "estimation":
            return max(2, 2 * int(round(value / 2)))
        return max(1, int(round(value)))

    def evaluate(self, value: float) -> tuple[float, BoundResult]:
        kw = {"p": self.p, "log2_one_minus_p": self.log2_one_minus_p}
        if self.variant == "general-estimation":
            res = general_estimation_bound(self.n_x, self.n_z, self.q, self.e_x, self.e_z,
                                           value, **kw)
            return value, res
        if self.axis == "N":
            N, eps, axis_value = self.qubits(value), self.epsilon, float(self.qubits(value))
        else:
            N, eps, axis_value = self.N, value, value
        make = BoundParams.estimation if self.variant == "estimation" else BoundParams.verification
        params = make(N, self.q, self.e_x, self.e_z, eps, self.p,
                      log2_one_minus_p=self.log2_one_minus_p)
        return axis_value, optimize_bound(params, self.variant)


def sweep(spec: SweepSpec, threads: int | None = None) -> list[SweepRow]:
    """Rows in grid order; ``threads`` only changes wall time."""
    def row(value: float) -> SweepRow:
        axis_value, res = spec.evaluate(value)
        return SweepRow(axis_value, res.rate, res.value, res.eta_star)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(row, spec.grid))
    return [row(v) for v in spec.grid]


def format_sweep(rows: Iterable[SweepRow], axis: str) -> str:
    lines = [f"{axis},rate,value,eta_star"]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    return "\n".join(lines) + "\n"


# -- fluctuation analyses ----------------------------------------------------

class SegmentRate(NamedTuple):
    segment: int
    start: int
    stop: int
    n_x: int
    n_z: int
    e_x: float
    e_z: float
    rate: float
    flagged: bool


def _cumulative(transcript: Transcript):
    is_x = transcript.basis == BASIS_X
    is_z = transcript.basis == BASIS_Z
    mism = (transcript.prepared != transcript.outcome)
    zero = np.zeros(1, dtype=np.int64)
    return (np.concatenate([zero, np.cumsum(is_x)]),
            np.concatenate([zero, np.cumsum(is_z)]),
            np.concatenate([zero, np.cumsum(mism & is_x)]),
            np.concatenate([zero, np.cumsum(mism & is_z)]))


def segment_rates(records: RecordFile | Transcript, num_segments: int, q: float) -> list[SegmentRate]:
    """Asymptotic rate q - h(e_x) - h(e_z) on consecutive chronological segments.

    Segments have ``len // num_segments`` rows; the final one absorbs the
    remainder. A segment missing a basis is flagged with NaN rates.
    """
    transcript = _as_transcript(records)
    total = len(transcript)
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    if num_segments > total:
        raise ValueError(f"cannot split {total} rows into {num_segments} segments")
    cx, cz, mx, mz = _cumulative(transcript)
    size = total // num_segments
    out = []
    for s in range(num_segments):
        lo = s * size
        hi = total if s == num_segments - 1 else lo + size
        rates = ErrorRates(int(cx[hi] - cx[lo]), int(cz[hi] - cz[lo]),
                           int(mx[hi] - mx[lo]), int(mz[hi] - mz[lo]))
        if rates.n_x == 0 or rates.n_z == 0:
            nan = float("nan")
            out.append(SegmentRate(s, lo, hi, rates.n_x, rates.n_z, rates.e_x, rates.e_z, nan, True))
            continue
        out.append(SegmentRate(s, lo, hi, rates.n_x, rates.n_z, rates.e_x, rates.e_z,
                               asymptotic_rate(q, rates.e_x, rates.e_z), False))
    return out


def _entropy_slope(e: float) -> float:
    return math.log2((1.0 - e) / e)


def iid_segment_variance(segments: list[SegmentRate]) -> float:
    """Delta-method variance of segment rates if flips were i.i.d.

    Per-basis flip probabilities are the pooled rates over all segments; each
    segment contributes h'(e)**2 e(1-e)/n per basis. Returns the mean over
    unflagged segments.
    """
    good = [s for s in segments if not s.flagged]
    if not good:
        raise RecordError("no segment has both bases")
    n_x = sum(s.n_x for s in good)
    n_z = sum(s.n_z for s in good)
    e_x = sum(s.e_x * s.n_x for s in good) / n_x
    e_z = sum(s.e_z * s.n_z for s in good) / n_z
    terms = []
    for s in good:
        v = 0.0
        for e, n in ((e_x, s.n_x), (e_z, s.n_z)):
            if 0.0 < e < 1.0:
                v += _entropy_slope(e) ** 2 * e * (1.0 - e) / n
        terms.append(v)
    return float(np.mean(terms))


def segment_variance_ratio(records: RecordFile | Transcript, num_segments: int, q: float) -> float:
    """Observed segment-rate variance over the i.i.d. prediction.

    Values well above 1 indicate flips that are correlated in time.
    """
    segments = segment_rates(records, num_segments, q)
    rates = np.array([s.rate for s in segments if not s.flagged])
    if rates.size < 2:
        raise RecordError("need at least two complete segments")
    return float(np.var(rates, ddof=1) / iid_segment_variance(segments))


class BreakPoint(NamedTuple):
    n_prefix: int
    n_x: int
    n_z: int
    e_x: float
    e_z: float
    rate: float
    value: float
    eta_star: float
    flagged: bool


def breakpoint_lengths(total: int, num_breaks: int) -> np.ndarray:
    """Log-spaced prefix lengths ending at ``total`` (duplicates removed)."""
    if num_breaks < 1:
        raise ValueError("num_breaks must be >= 1")
    if total < 1:
        raise RecordError("no rows")
    if num_breaks == 1:
        return np.array([total])
    lengths = np.unique(np.rint(np.geomspace(1, total, num_breaks)).astype(np.int64))
    lengths[-1] = total
    return lengths


def breakpoint_bounds(records: RecordFile | Transcript, num_breaks: int, q: float,
                      epsilon: float, p: float | None = None, *,
                      log2_one_minus_p: float | None = None,
                      threads: int | None = None) -> list[BreakPoint]:
    """Bound as if the run had stopped after each log-spaced prefix.

    Prefix rates use the realised per-basis counts and the general
    estimation bound. Prefixes lacking a basis are flagged with NaN.
    """
    transcript = _as_transcript(records)
    cx, cz, mx, mz = _cumulative(transcript)
    lengths = breakpoint_lengths(len(transcript), num_breaks)

    def point(length: int) -> BreakPoint:
        rates = ErrorRates(int(cx[length]), int(cz[length]), int(mx[length]), int(mz[length]))
        if rates.n_x == 0 or rates.n_z == 0:
            nan = float("nan")
            return BreakPoint(int(length), rates.n_x, rates.n_z, rates.e_x, rates.e_z,
                              nan, nan, nan, True)
        res = bound_from_rates(rates, q, epsilon, p, log2_one_minus_p=log2_one_minus_p)
        return BreakPoint(int(length), rates.n_x, rates.n_z, rates.e_x, rates.e_z,
                          res.rate, res.value, res.eta_star, False)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(point, lengths.tolist()))
    return [point(n) for n in lengths.tolist()]


def format_table(rows: Iterable[tuple], header: Iterable[str]) -> str:
    lines = [",".join(header)]
    for r in rows:
        cells = []
        for v in r:
            if isinstance(v, (bool, np.bool_)):
                cells.append(str(int(v)))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(_fmt(float(v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
