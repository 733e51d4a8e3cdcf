"""Scalar primitives shared by the capacity bounds.

Logarithms are base 2 unless a function name says otherwise. The ``ln``
helpers exist because the finite-size slack mixes natural logs (inside the
square root) with base-2 logs (everywhere else).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QubitBasis:
    """Orthonormal single-qubit basis given by its two kets."""

    ket0: tuple[complex, complex]
    ket1: tuple[complex, complex]

    def __post_init__(self) -> None:
        k0 = np.asarray(self.ket0, dtype=complex)
        k1 = np.asarray(self.ket1, dtype=complex)
        if k0.shape != (2,) or k1.shape != (2,):
            raise ValueError("basis kets must be complex 2-vectors")
        for name, k in (("ket0", k0), ("ket1", k1)):
            if abs(np.linalg.norm(k) - 1.0) > 1e-12:
                raise ValueError(f"{name} is not normalised (norm={np.linalg.norm(k)!r})")
        if abs(np.vdot(k0, k1)) > 1e-12:
            raise ValueError("basis kets are not orthogonal")
        object.__setattr__(self, "ket0", (complex(k0[0]), complex(k0[1])))
        object.__setattr__(self, "ket1", (complex(k1[0]), complex(k1[1])))

    @property
    def kets(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.ket0), np.asarray(self.ket1)

    @classmethod
    def pauli_z(cls) -> "QubitBasis":
        return cls((1, 0), (0, 1))

    @classmethod
    def pauli_x(cls) -> "QubitBasis":
        r = 1 / math.sqrt(2)
        return cls((r, r), (r, -r))

    @classmethod
    def pauli_y(cls) -> "QubitBasis":
        r = 1 / math.sqrt(2)
        return cls((r, 1j * r), (r, -1j * r))

    @classmethod
    def rotated(cls, theta: float, phi: float = 0.0) -> "QubitBasis":
        """Basis whose ``ket0`` sits at Bloch angles (theta, phi).

        ``rotated(0)`` is the Z basis and ``rotated(pi / 2)`` the X basis.
        """
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        ph = complex(math.cos(phi), math.sin(phi))
        return cls((c, ph * s), (-s * ph.conjugate(), c))


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_entropy_array(x) -> np.ndarray:
    """Vectorised :func:`binary_entropy` for numpy inputs."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("binary_entropy needs all entries in [0, 1]")
    out = np.zeros_like(x)
    inner = (x > 0.0) & (x < 1.0)
    xi = x[inner]
    out[inner] = -xi * np.log2(xi) - (1.0 - xi) * np.log2(1.0 - xi)
    return out


def preparation_quality(bx: QubitBasis, bz: QubitBasis) -> float:
    """-log2 of the largest squared overlap between kets of the two bases."""
    overlaps = [abs(np.vdot(a, b)) ** 2 for a in bx.kets for b in bz.kets]
    # overlap can round slightly above 1 for identical bases
    return max(0.0, -math.log2(min(1.0, max(overlaps))))


def ln_one_minus_p(p: float | None = None, log2_one_minus_p: float | None = None) -> float:
    """Natural log of ``1 - p`` from either parameterisation.

    Exactly one of ``p`` and ``log2_one_minus_p`` must be given. The log form
    stays finite when ``1 - p`` underflows a double (e.g. ``1 - p = 2**-5000``).
    """
    if (p is None) == (log2_one_minus_p is None):
        raise ValueError("give exactly one of p and log2_one_minus_p")
    if log2_one_minus_p is not None:
        if not log2_one_minus_p <= 0.0 or math.isinf(log2_one_minus_p):
            raise ValueError(f"log2(1-p) must be finite and <= 0, got {log2_one_minus_p!r}")
        return log2_one_minus_p * LN2
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p!r}")
    return math.log1p(-p)


def ln_typicality_factor(ln_1mp: float) -> float:
    """ln(3 + 5 / sqrt(1 - p)) given ln(1 - p)."""
    a = -0.5 * ln_1mp  # ln(1 / sqrt(1 - p)) >= 0
    return a + math.log(5.0 + 3.0 * math.exp(-a))


def log_ratio_term(
    epsilon: float,
    eta: float,
    p: float | None = None,
    *,
    log2_one_minus_p: float | None = None,
) -> float:
    """ln((3 + 5/sqrt(1-p)) / (sqrt(epsilon/2) - eta)), evaluated in log space.

    Args:
        epsilon: decoding error probability, > 0.
        eta: smoothing slack, 0 < eta < sqrt(epsilon/2).
        p: atypicality/abort probability in [0, 1).
        log2_one_minus_p: alternative to ``p`` for 1 - p below double range.
    """
    gap = smoothing_gap(epsilon, eta)
    return ln_typicality_factor(ln_one_minus_p(p, log2_one_minus_p)) - math.log(gap)


def smoothing_gap(epsilon: float, eta: float) -> float:
    """sqrt(epsilon/2) - eta, validated to be positive."""
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not eta > 0.0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    gap = math.sqrt(epsilon / 2.0) - eta
    if not gap > 0.0:
        raise ValueError(f"eta={eta!r} must be below sqrt(epsilon/2)={math.sqrt(epsilon / 2.0)!r}")
    return gap
