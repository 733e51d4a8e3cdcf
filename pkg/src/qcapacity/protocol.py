"""Prepare-and-measure estimation and verification protocols.

A run draws three independent sub-streams from one master seed: the basis
string, Alice's state bits, and the channel noise. Swapping the channel
therefore leaves bases and states unchanged, which keeps A/B comparisons
between channels paired.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal

import numpy as np

from ._rng import BASIS_STREAM, CHANNEL_STREAM, STATE_STREAM, generator, seed_sequence
from .channels import (
    BASIS_DATA,
    BASIS_LABELS,
    BASIS_X,
    BASIS_Z,
    ChannelModel,
    Preparation,
    apply,
)

Kind = Literal["estimation", "verification"]
Decision = Literal["accept", "abort"]

NO_BIT = -1


@dataclass(frozen=True)
class ErrorRates:
    """Per-basis mismatch counts and the rates derived from them."""

    n_x: int
    n_z: int
    mismatches_x: int
    mismatches_z: int

    def __post_init__(self) -> None:
        if not (0 <= self.mismatches_x <= self.n_x and 0 <= self.mismatches_z <= self.n_z):
            raise ValueError("mismatch counts must lie between 0 and the basis counts")

    @property
    def e_x(self) -> float:
        return self.mismatches_x / self.n_x if self.n_x else float("nan")

    @property
    def e_z(self) -> float:
        return self.mismatches_z / self.n_z if self.n_z else float("nan")

    # names used for the verification protocol
    gamma = e_x
    lam = e_z

    def exact(self) -> tuple[Fraction, Fraction]:
        return Fraction(self.mismatches_x, self.n_x), Fraction(self.mismatches_z, self.n_z)

    @classmethod
    def from_arrays(cls, basis: np.ndarray, prepared: np.ndarray, outcome: np.ndarray) -> "ErrorRates":
        mism = prepared != outcome
        is_x = basis == BASIS_X
        is_z = basis == BASIS_Z
        return cls(int(is_x.sum()), int(is_z.sum()),
                   int((mism & is_x).sum()), int((mism & is_z).sum()))


@dataclass(frozen=True, eq=False)
class Transcript:
    """Slot-ordered record of one run.

    ``prepared`` and ``outcome`` hold ``-1`` on data slots.
    """

    kind: str
    index: np.ndarray
    basis: np.ndarray
    prepared: np.ndarray
    outcome: np.ndarray
    seed: int | None = None
    channel: str = ""

    def __post_init__(self) -> None:
        n = self.basis.shape[0]
        if not (self.index.shape == self.prepared.shape == self.outcome.shape == (n,)):
            raise ValueError("transcript columns must have equal length")
        data = self.basis == BASIS_DATA
        if np.any(self.outcome[data] != NO_BIT) or np.any(self.prepared[data] != NO_BIT):
            raise ValueError("data slots carry no prepared bit or outcome")

    def __len__(self) -> int:
        return int(self.basis.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented
        return (self.kind == other.kind and self.seed == other.seed
                and self.channel == other.channel
                and all(np.array_equal(getattr(self, c), getattr(other, c))
                        for c in ("index", "basis", "prepared", "outcome")))

    def records(self) -> Iterator[tuple[int, str, int | None, int | None]]:
        for i, b, s, o in zip(self.index.tolist(), self.basis.tolist(),
                              self.prepared.tolist(), self.outcome.tolist()):
            if b == BASIS_DATA:
                yield i, "D", None, None
            else:
                yield i, BASIS_LABELS[b], s, o

    def counts(self) -> dict[str, int]:
        return {label: int((self.basis == code).sum()) for code, label in enumerate(BASIS_LABELS)}

    def error_rates(self) -> ErrorRates:
        return ErrorRates.from_arrays(self.basis, self.prepared, self.outcome)


def _shuffled(counts: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    labels = np.repeat(np.arange(len(counts), dtype=np.uint8), counts)
    return rng.permutation(labels)


def sample_basis_string(kind: Kind, N: int, seed) -> np.ndarray:
    """Uniformly random basis codes with exact counts.

    Estimation: ``N/2`` X and ``N/2`` Z (N even). Verification: ``N`` each of
    X, Z and D, so ``3N`` slots.
    """
    rng = generator(seed, BASIS_STREAM)
    if kind == "estimation":
        if N < 2 or N % 2:
            raise ValueError(f"estimation needs an even N >= 2, got {N}; "
                             "use run_general_estimation for unbalanced splits")
        return _shuffled((N // 2, N // 2), rng)
    if kind == "verification":
        if N < 1:
            raise ValueError(f"verification needs N >= 1, got {N}")
        return _shuffled((N, N, N), rng)
    raise ValueError(f"unknown protocol kind {kind!r}")


def _execute(kind: str, basis: np.ndarray, channel: ChannelModel, seed) -> Transcript:
    bits = generator(seed, STATE_STREAM).integers(0, 2, size=basis.size, dtype=np.uint8)
    measured = apply(channel, Preparation(basis, bits), seed_sequence(seed, CHANNEL_STREAM))
    data = basis == BASIS_DATA
    prepared = bits.astype(np.int8)
    outcome = measured.astype(np.int8)
    prepared[data] = NO_BIT
    outcome[data] = NO_BIT
    return Transcript(kind, np.arange(basis.size, dtype=np.int64), basis, prepared, outcome,
                      seed if isinstance(seed, int) else None, channel.describe())


def run_estimation(channel: ChannelModel, N: int, seed: int) -> tuple[Transcript, ErrorRates]:
    """Estimation protocol on ``N`` test slots split evenly between X and Z."""
    basis = sample_basis_string("estimation", N, seed)
    transcript = _execute("estimation", basis, channel, seed)
    return transcript, transcript.error_rates()


def run_general_estimation(channel: ChannelModel, n: int, k: int, seed: int) -> tuple[Transcript, ErrorRates]:
    """Estimation with ``n`` X-tests and ``k`` Z-tests."""
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    basis = _shuffled((n, k), generator(seed, BASIS_STREAM))
    transcript = _execute("estimation", basis, channel, seed)
    return transcript, transcript.error_rates()


def decide(rates: ErrorRates, tol_ex: float, tol_ez: float) -> Decision:
    """Accept iff both measured rates are at or below their tolerances."""
    return "accept" if rates.e_x <= tol_ex and rates.e_z <= tol_ez else "abort"


def run_verification(channel: ChannelModel, N: int, tol_ex: float, tol_ez: float,
                     seed: int) -> tuple[Transcript, ErrorRates, Decision]:
    """Verification protocol over ``3N`` slots; data slots are never measured.

    On ``"accept"`` the data qubits are covered by the verification bound
    evaluated at the tolerances, not at the measured rates.
    """
    for name, tol in (("tol_ex", tol_ex), ("tol_ez", tol_ez)):
        if not 0.0 <= tol <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {tol!r}")
    basis = sample_basis_string("verification", N, seed)
    transcript = _execute("verification", basis, channel, seed)
    rates = transcript.error_rates()
    return transcript, rates, decide(rates, tol_ex, tol_ez)
