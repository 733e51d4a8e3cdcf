"""Classical flip-process models of N-qubit noise channels.

Both protocols prepare and measure every test slot in the same basis, so for
Pauli-diagonal noise a channel is fully described by the probability that a
prepared bit comes out flipped. Memoryless models are a fixed table indexed
by (basis, prepared bit); the Gilbert-Elliott model adds a hidden two-state
Markov chain that runs over the physical slots and makes flips bursty.

Basis codes are ``X = 0``, ``Z = 1`` and ``D = 2`` (data slot, never
measured). Channels still act on data slots, which matters for models with
memory.
"""
from __future__ import annotations

import abc
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from ._rng import generator, seed_sequence

BASIS_X, BASIS_Z, BASIS_DATA = 0, 1, 2
BASIS_LABELS = ("X", "Z", "D")
BASIS_CODES = {label: code for code, label in enumerate(BASIS_LABELS)}

BLOCK_SIZE = 1 << 16


class PreparedQubit(NamedTuple):
    slot: int
    basis: str
    bit: int


@dataclass(frozen=True, eq=False)
class Preparation:
    """Column-wise sequence of prepared slots; slot ``i`` is position ``i``."""

    basis: np.ndarray
    bit: np.ndarray

    def __post_init__(self) -> None:
        basis = np.ascontiguousarray(self.basis, dtype=np.uint8)
        bit = np.ascontiguousarray(self.bit, dtype=np.uint8)
        if basis.ndim != 1 or basis.shape != bit.shape:
            raise ValueError("basis and bit must be 1-d arrays of equal length")
        if basis.size and basis.max() > BASIS_DATA:
            raise ValueError("basis codes must be 0 (X), 1 (Z) or 2 (D)")
        if bit.size and bit.max() > 1:
            raise ValueError("prepared bits must be 0 or 1")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "bit", bit)

    @classmethod
    def from_qubits(cls, qubits: Iterable[PreparedQubit]) -> "Preparation":
        qubits = list(qubits)
        for i, qb in enumerate(qubits):
            if qb.slot != i:
                raise ValueError(f"slot indices must be contiguous from 0; got {qb.slot} at {i}")
            if qb.basis not in BASIS_CODES:
                raise ValueError(f"unknown basis label {qb.basis!r} in slot {i}")
        return cls(np.array([BASIS_CODES[q.basis] for q in qubits], dtype=np.uint8),
                   np.array([q.bit for q in qubits], dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.basis.size)

    def __iter__(self) -> Iterator[PreparedQubit]:
        for i, (b, s) in enumerate(zip(self.basis.tolist(), self.bit.tolist())):
            yield PreparedQubit(i, BASIS_LABELS[b], s)


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _xor_prob(a: float, b: float) -> float:
    """Probability that exactly one of two independent flips happens."""
    return a + b - 2.0 * a * b


class ChannelModel(abc.ABC):
    """Stochastic map from prepared slots to measured bits."""

    @abc.abstractmethod
    def flips(self, prepared: Preparation, seed) -> np.ndarray:
        """Boolean flip indicator per slot, deterministic in (model, prepared, seed)."""

    @abc.abstractmethod
    def describe(self) -> str:
        """Channel spec string accepted by :func:`parse_channel`."""

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.describe()}>"


class IidFlipChannel(ChannelModel):
    """Memoryless channel: each slot flips independently.

    ``table[b][s]`` is the flip probability for basis code ``b`` (X or Z) and
    prepared bit ``s``. Sampling is split into fixed blocks whose generators
    are derived from (seed, block index), so the output does not depend on
    ``threads``.
    """

    def __init__(self, table, descriptor: str, threads: int | None = None):
        table = np.asarray(table, dtype=float)
        if table.shape != (2, 2):
            raise ValueError("flip table must be 2x2 (basis X/Z by prepared bit)")
        if np.any((table < 0) | (table > 1)) or np.any(np.isnan(table)):
            raise ValueError("flip probabilities must lie in [0, 1]")
        full = np.zeros((3, 2))
        full[:2] = table
        self._table = full
        self._table.setflags(write=False)
        self._descriptor = descriptor
        self.threads = threads

    @property
    def flip_table(self) -> np.ndarray:
        return self._table[:2]

    def flip_probability(self, basis: str, bit: int) -> float:
        return float(self._table[BASIS_CODES[basis], bit])

    def describe(self) -> str:
        return self._descriptor

    def _block(self, prepared: Preparation, seed, index: int) -> np.ndarray:
        lo, hi = index * BLOCK_SIZE, min(len(prepared), (index + 1) * BLOCK_SIZE)
        p = self._table[prepared.basis[lo:hi], prepared.bit[lo:hi]]
        return generator(seed, index).random(hi - lo) < p

    def flips(self, prepared: Preparation, seed) -> np.ndarray:
        seed = seed_sequence(seed)
        blocks = range(math.ceil(len(prepared) / BLOCK_SIZE))
        if self.threads and self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda i: self._block(prepared, seed, i), blocks))
        else:
            parts = [self._block(prepared, seed, i) for i in blocks]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


def identity() -> IidFlipChannel:
    return IidFlipChannel([[0.0, 0.0], [0.0, 0.0]], "identity")


def iid_dephasing(alpha: float, axis: str = "Z") -> IidFlipChannel:
    """rho -> (1 - alpha/2) rho + (alpha/2) sigma rho sigma on every qubit.

    Dephasing about Z flips X-basis states only, about X flips Z-basis states
    only, and about Y flips both.
    """
    alpha = _check_prob("alpha", alpha)
    f = alpha / 2.0
    rows = {"Z": ([f, f], [0.0, 0.0]), "X": ([0.0, 0.0], [f, f]), "Y": ([f, f], [f, f])}
    if axis not in rows:
        raise ValueError(f"dephasing axis must be X, Y or Z, got {axis!r}")
    tag = f"dephasing:{alpha!r}" + ("" if axis == "Z" else f",{axis}")
    return IidFlipChannel(rows[axis], tag)


def iid_depolarizing(r: float) -> IidFlipChannel:
    """rho -> (1 - r) rho + r I/2 on every qubit; flips with r/2 in any basis."""
    r = _check_prob("r", r)
    return IidFlipChannel([[r / 2, r / 2], [r / 2, r / 2]], f"depolarizing:{r!r}")


def fully_depolarizing() -> IidFlipChannel:
    """Outputs the maximally mixed state: every outcome is a fair coin."""
    return IidFlipChannel([[0.5, 0.5], [0.5, 0.5]], "fully-depolarizing")


def transmon_like(t1: float, t2star: float, delta_t: float,
                  readout_e01: float, readout_e10: float) -> IidFlipChannel:
    """Idling transmon stand-in with amplitude damping, dephasing and readout error.

    Times share one unit (microseconds in the CLI). ``readout_e01`` is the
    chance to read 1 from |0>, ``readout_e10`` to read 0 from |1>. X-basis
    states are rotated back before a Z readout, so they see the mean readout
    error. Decay and readout errors compose as independent flips.
    """
    if not (t1 > 0 and t2star > 0):
        raise ValueError("t1 and t2star must be positive")
    if not delta_t >= 0:
        raise ValueError("delta_t must be non-negative")
    e01 = _check_prob("readout_e01", readout_e01)
    e10 = _check_prob("readout_e10", readout_e10)
    relax = 0.5 * -math.expm1(-delta_t / t1)
    dephase = 0.5 * -math.expm1(-delta_t / t2star)
    x_flip = _xor_prob(dephase, 0.5 * (e01 + e10))
    table = [[x_flip, x_flip], [e01, _xor_prob(relax, e10)]]
    return IidFlipChannel(table, f"transmon:{t1!r},{t2star!r},{delta_t!r},{e01!r},{e10!r}")


class GilbertElliottChannel(ChannelModel):
    """Two-state (good/bad) Markov flip process over physical slots.

    The chain starts from its stationary law unless ``start`` is ``"good"``
    or ``"bad"``; with both transition probabilities zero the stationary law
    is undefined and the chain starts good. Flip probabilities may be a
    single number or an (X, Z) pair for basis-dependent noise.

    Application is inherently sequential, so a single random stream is used.
    """

    def __init__(self, p_good_to_bad: float, p_bad_to_good: float,
                 flip_good, flip_bad, start: str = "stationary"):
        self.p_gb = _check_prob("p_good_to_bad", p_good_to_bad)
        self.p_bg = _check_prob("p_bad_to_good", p_bad_to_good)
        self.flip_good = self._pair("flip_good", flip_good)
        self.flip_bad = self._pair("flip_bad", flip_bad)
        if start not in ("stationary", "good", "bad"):
            raise ValueError(f"start must be stationary, good or bad, got {start!r}")
        self.start = start
        # rows: state (good, bad); columns: basis code X, Z, D
        self._table = np.array([[*self.flip_good, 0.0], [*self.flip_bad, 0.0]])

    @staticmethod
    def _pair(name: str, value) -> tuple[float, float]:
        if np.ndim(value) == 0:
            v = _check_prob(name, value)
            return v, v
        x, z = value
        return _check_prob(name + "[X]", x), _check_prob(name + "[Z]", z)

    @property
    def stationary_bad(self) -> float:
        total = self.p_gb + self.p_bg
        return self.p_gb / total if total > 0 else 0.0

    def long_run_flip_rate(self, basis: str = "X") -> float:
        b = BASIS_CODES[basis]
        pi_bad = self.stationary_bad
        return (1.0 - pi_bad) * self._table[0, b] + pi_bad * self._table[1, b]

    def describe(self) -> str:
        def fmt(pair):
            return repr(pair[0]) if pair[0] == pair[1] else f"{pair[0]!r}/{pair[1]!r}"
        tail = "" if self.start == "stationary" else f",{self.start}"
        return f"ge:{self.p_gb!r},{self.p_bg!r},{fmt(self.flip_good)},{fmt(self.flip_bad)}{tail}"

    def states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Hidden state per slot (0 good, 1 bad), built from geometric sojourns."""
        if self.start == "stationary":
            state = int(rng.random() < self.stationary_bad)
        else:
            state = int(self.start == "bad")
        leave = (self.p_gb, self.p_bg)
        out = np.empty(n, dtype=np.uint8)
        pos = 0
        while pos < n:
            remaining = n - pos
            if leave[state] == 0.0:
                out[pos:] = state
                break
            pairs = max(64, int(remaining * min(leave) / 2) + 64)

            def sojourns(s):
                if leave[s] == 0.0:
                    return np.full(pairs, remaining, dtype=np.int64)
                return rng.geometric(leave[s], size=pairs)

            lengths = np.empty(2 * pairs, dtype=np.int64)
            lengths[0::2] = sojourns(state)
            lengths[1::2] = sojourns(1 - state)
            pattern = np.tile(np.array([state, 1 - state], dtype=np.uint8), pairs)
            ends = np.cumsum(lengths)
            used = min(int(np.searchsorted(ends, remaining)) + 1, lengths.size)
            seq = np.repeat(pattern[:used], lengths[:used])[:remaining]
            out[pos:pos + seq.size] = seq
            pos += seq.size
            # chunk exhausted: its last run ended, so the chain switched state
            state = 1 - int(pattern[used - 1])
        return out

    def flips(self, prepared: Preparation, seed) -> np.ndarray:
        rng = generator(seed)
        n = len(prepared)
        states = self.states(n, rng)
        p = self._table[states, prepared.basis]
        return rng.random(n) < p


def gilbert_elliott(p_good_to_bad: float, p_bad_to_good: float, flip_good, flip_bad,
                    start: str = "stationary") -> GilbertElliottChannel:
    return GilbertElliottChannel(p_good_to_bad, p_bad_to_good, flip_good, flip_bad, start)


def apply(channel: ChannelModel, prepared: Preparation | Sequence[PreparedQubit], seed) -> np.ndarray:
    """Measured bit per slot (data slots included; callers ignore those)."""
    if not isinstance(prepared, Preparation):
        prepared = Preparation.from_qubits(prepared)
    return prepared.bit ^ channel.flips(prepared, seed).astype(np.uint8)


def parse_channel(spec: str) -> ChannelModel:
    """Build a channel from ``name:param,param,...``.

    Recognised names: ``identity``, ``dephasing:alpha[,axis]``,
    ``depolarizing:r``, ``fully-depolarizing``,
    ``ge:p_gb,p_bg,flip_good,flip_bad[,start]`` (a flip may be written
    ``x/z``) and ``transmon:t1,t2star,delta_t,e01,e10``.
    """
    name, _, rest = spec.strip().partition(":")
    args = [a.strip() for a in rest.split(",")] if rest else []

    def nums(count: int, optional_tail: int = 0):
        if not count <= len(args) <= count + optional_tail:
            raise ValueError(f"channel {name!r} takes {count} parameters, got {len(args)}")
        try:
            return [float(a) for a in args[:count]], args[count:]
        except ValueError:
            raise ValueError(f"non-numeric parameter in channel spec {spec!r}") from None

    if name == "identity":
        nums(0)
        return identity()
    if name == "fully-depolarizing":
        nums(0)
        return fully_depolarizing()
    if name == "dephasing":
        (alpha,), tail = nums(1, 1)
        return iid_dephasing(alpha, *(t.upper() for t in tail))
    if name == "depolarizing":
        (r,), _ = nums(1)
        return iid_depolarizing(r)
    if name == "transmon":
        vals, _ = nums(5)
        return transmon_like(*vals)
    if name == "ge":
        if not 4 <= len(args) <= 5:
            raise ValueError(f"channel 'ge' takes 4 or 5 parameters, got {len(args)}")
        try:
            p_gb, p_bg = float(args[0]), float(args[1])
            flips = [tuple(float(v) for v in a.split("/")) for a in args[2:4]]
        except ValueError:
            raise ValueError(f"non-numeric parameter in channel spec {spec!r}") from None
        for f in flips:
            if len(f) not in (1, 2):
                raise ValueError(f"flip probability must be 'f' or 'fx/fz' in {spec!r}")
        good, bad = (f[0] if len(f) == 1 else f for f in flips)
        return gilbert_elliott(p_gb, p_bg, good, bad, *args[4:])
    raise ValueError(f"unknown channel {name!r}")
