"""One-shot quantum capacity lower bounds.

Two families of evaluators live here:

* the balanced forms used by the estimation protocol (N/2 X-tests, N/2
  Z-tests) and the verification protocol (N X-tests, N Z-tests, N data
  slots), written in terms of a single slack ``mu`` and the constant
  ``kappa``;
* the general forms with arbitrary X/Z test counts ``n``/``k`` and separate
  pass probabilities, written in terms of ``delta``.

The two families are implemented independently so that each can check the
other under the balanced substitution.

Every bound is a supremum over the smoothing slack ``eta`` in
``(0, sqrt(epsilon/2))``. The optimizer scans a log-spaced grid and refines
the best bracket by golden-section search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Literal, Mapping

import numpy as np

from .mathcore import (
    LN2,
    binary_entropy,
    binary_entropy_array,
    ln_one_minus_p,
    ln_typicality_factor,
    log_ratio_term,
    smoothing_gap,
)
from .serfling import hypergeometric_tail_oracle, serfling_tail

__all__ = [
    "BoundParams",
    "BoundResult",
    "Variant",
    "asymptotic_rate",
    "bound_at_eta",
    "general_bound_at_eta",
    "general_estimation_bound",
    "general_verification_bound",
    "hypergeometric_tail_oracle",
    "kappa",
    "log2_kappa",
    "mu_estimation",
    "mu_verification",
    "optimize_bound",
    "serfling_tail",
]

Variant = Literal["estimation", "verification"]

GRID_POINTS = 512
GRID_EDGE = 1e-8
ETA_REL_TOL = 1e-10
# entropy arguments are capped where h peaks; beyond 1/2 h would decrease
H_CAP = 0.5


@dataclass(frozen=True)
class BoundParams:
    """Inputs to a balanced capacity bound.

    Give exactly one of ``p`` and ``log2_one_minus_p``; the latter keeps
    ``1 - p`` representable when it is far below double precision.
    """

    n_x: int
    n_z: int
    n_data: int
    q: float
    e_x: float
    e_z: float
    epsilon: float
    p: float | None = None
    log2_one_minus_p: float | None = None

    def __post_init__(self) -> None:
        if self.n_x < 1 or self.n_z < 1:
            raise ValueError(f"n_x and n_z must be >= 1, got {self.n_x}, {self.n_z}")
        if self.n_data < 0:
            raise ValueError(f"n_data must be >= 0, got {self.n_data}")
        for name in ("e_x", "e_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not math.isfinite(self.q):
            raise ValueError(f"q must be finite, got {self.q!r}")
        ln_one_minus_p(self.p, self.log2_one_minus_p)

    @classmethod
    def estimation(cls, N: int, q: float, e_x: float, e_z: float, epsilon: float,
                   p: float | None = None, *, log2_one_minus_p: float | None = None) -> "BoundParams":
        if N < 2 or N % 2:
            raise ValueError(f"estimation needs an even N >= 2, got {N}")
        return cls(N // 2, N // 2, 0, q, e_x, e_z, epsilon, p, log2_one_minus_p)

    @classmethod
    def verification(cls, N: int, q: float, e_x: float, e_z: float, epsilon: float,
                     p: float | None = None, *, log2_one_minus_p: float | None = None) -> "BoundParams":
        if N < 1:
            raise ValueError(f"verification needs N >= 1, got {N}")
        return cls(N, N, N, q, e_x, e_z, epsilon, p, log2_one_minus_p)

    @property
    def ln_one_minus_p(self) -> float:
        return ln_one_minus_p(self.p, self.log2_one_minus_p)

    def default_variant(self) -> Variant:
        return "verification" if self.n_data else "estimation"

    def covered(self, variant: Variant) -> int:
        """Number of qubits the bound speaks about."""
        if variant == "estimation":
            if self.n_x != self.n_z or self.n_data:
                raise ValueError("estimation bound needs n_x == n_z and n_data == 0; "
                                 "use general_estimation_bound for other splits")
            return self.n_x + self.n_z
        if variant == "verification":
            if not self.n_x == self.n_z == self.n_data:
                raise ValueError("verification bound needs n_x == n_z == n_data; "
                                 "use general_verification_bound for other splits")
            return self.n_data
        raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class BoundResult:
    """An evaluated lower bound on the one-shot capacity (in qubits).

    ``value`` is reported raw and may be negative, which certifies nothing.
    ``terms`` splits it as ``entropy - log_kappa - log_inv_eta - constant``.
    """

    value: float
    rate: float
    eta_star: float
    mu_x: float
    mu_z: float
    covered: int
    terms: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", MappingProxyType(dict(self.terms)))

    @property
    def value_clamped(self) -> float:
        return max(self.value, 0.0)

    @property
    def rate_clamped(self) -> float:
        return max(self.rate, 0.0)


# -- balanced forms ----------------------------------------------------------

def _ln_ratio(epsilon, eta, p, log2_one_minus_p) -> float:
    return log_ratio_term(epsilon, eta, p, log2_one_minus_p=log2_one_minus_p)


def _slack(factor: float, lr: float) -> float:
    if lr < 0.0:
        raise ValueError("log-ratio term is negative; mu would be imaginary "
                         "(epsilon too large for this eta/p)")
    return math.sqrt(factor * lr)


def mu_estimation(N: int, epsilon: float, eta: float, p: float | None = None, *,
                  log2_one_minus_p: float | None = None) -> float:
    """Statistical slack for the balanced estimation protocol."""
    if N < 2 or N % 2:
        raise ValueError(f"estimation needs an even N >= 2, got {N}")
    return _slack((N + 2) / N**2, _ln_ratio(epsilon, eta, p, log2_one_minus_p))


def mu_verification(N: int, epsilon: float, eta: float, p: float | None = None, *,
                    log2_one_minus_p: float | None = None) -> float:
    """Statistical slack for the balanced verification protocol."""
    if N < 1:
        raise ValueError(f"verification needs N >= 1, got {N}")
    return _slack(2 * (N + 1) / N**2, _ln_ratio(epsilon, eta, p, log2_one_minus_p))


def log2_kappa(epsilon: float, eta: float, p: float | None = None, *,
               log2_one_minus_p: float | None = None) -> float:
    """log2 of ``kappa``; finite even when ``kappa`` itself overflows."""
    return 1.0 + 2.0 * _ln_ratio(epsilon, eta, p, log2_one_minus_p) / LN2


def kappa(epsilon: float, eta: float, p: float | None = None, *,
          log2_one_minus_p: float | None = None) -> float:
    """2 * ((3 + 5/sqrt(1-p)) / (sqrt(epsilon/2) - eta))**2 (may be ``inf``)."""
    lk = log2_kappa(epsilon, eta, p, log2_one_minus_p=log2_one_minus_p)
    try:
        return math.pow(2.0, lk)
    except OverflowError:
        return math.inf


def _balanced_factor(variant: Variant, N: int) -> float:
    return (N + 2) / N**2 if variant == "estimation" else 2 * (N + 1) / N**2


def _balanced_curve(params: BoundParams, variant: Variant):
    N = params.covered(variant)
    factor = _balanced_factor(variant, N)
    s = math.sqrt(params.epsilon / 2.0)
    ln_a = ln_typicality_factor(params.ln_one_minus_p)

    def curve(eta: np.ndarray):
        lr = ln_a - np.log(s - eta)
        mu = np.sqrt(factor * lr)
        entropy = N * (params.q
                       - binary_entropy_array(np.minimum(params.e_x + mu, H_CAP))
                       - binary_entropy_array(np.minimum(params.e_z + mu, H_CAP)))
        log_kappa = 2.0 * (1.0 + 2.0 * lr / LN2)
        log_inv_eta = -4.0 * np.log2(eta)
        value = entropy - log_kappa - log_inv_eta - 2.0
        return value, {"entropy": entropy, "log_kappa": log_kappa,
                       "log_inv_eta": log_inv_eta, "mu_x": mu, "mu_z": mu}

    return curve, N, s


def bound_at_eta(params: BoundParams, eta: float, variant: Variant | None = None) -> float:
    """The bracketed expression of the balanced bound at a single ``eta``."""
    variant = variant or params.default_variant()
    N = params.covered(variant)
    smoothing_gap(params.epsilon, eta)
    mu_fn = mu_estimation if variant == "estimation" else mu_verification
    kw = {"log2_one_minus_p": params.log2_one_minus_p}
    mu = mu_fn(N, params.epsilon, eta, params.p, **kw)
    entropy = N * (params.q
                   - binary_entropy(min(params.e_x + mu, H_CAP))
                   - binary_entropy(min(params.e_z + mu, H_CAP)))
    return (entropy
            - 2.0 * log2_kappa(params.epsilon, eta, params.p, **kw)
            - 4.0 * math.log2(1.0 / eta)
            - 2.0)


def optimize_bound(params: BoundParams, variant: Variant | None = None) -> BoundResult:
    """Supremum over ``eta`` of the balanced bound."""
    variant = variant or params.default_variant()
    curve, N, s = _balanced_curve(params, variant)
    return _supremum(curve, s, N)


# -- general forms -----------------------------------------------------------

def _ln_pass(p_pass: float | None, log2_p_pass: float | None, name: str) -> float:
    if (p_pass is None) == (log2_p_pass is None):
        raise ValueError(f"give exactly one of {name} and log2_{name}")
    if log2_p_pass is not None:
        if not log2_p_pass <= 0.0 or math.isinf(log2_p_pass):
            raise ValueError(f"log2_{name} must be finite and <= 0, got {log2_p_pass!r}")
        return log2_p_pass * LN2
    if not 0.0 < p_pass <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {p_pass!r}")
    return math.log(p_pass)


def _resolve_pass(p_pass_x, p_pass_z, log2_p_pass_x, log2_p_pass_z, p, log2_one_minus_p):
    if p is not None or log2_one_minus_p is not None:
        if any(v is not None for v in (p_pass_x, p_pass_z, log2_p_pass_x, log2_p_pass_z)):
            raise ValueError("joint p and per-basis pass probabilities are exclusive")
        ln_pass = ln_one_minus_p(p, log2_one_minus_p)
        return ln_pass, ln_pass
    return (_ln_pass(p_pass_x, log2_p_pass_x, "p_pass_x"),
            _ln_pass(p_pass_z, log2_p_pass_z, "p_pass_z"))


def _ln_delta_denominator(ln_pass_x: float, ln_pass_z: float) -> float:
    """ln(3 + 1/sqrt(p_pass_z) + 4/sqrt(p_pass_x))."""
    terms = np.array([math.log(3.0), -0.5 * ln_pass_z, math.log(4.0) - 0.5 * ln_pass_x])
    top = terms.max()
    return float(top + math.log(np.exp(terms - top).sum()))


def _general_factors(kind: Variant, n: int, k: int, n_data: int) -> tuple[float, float, int]:
    """Coefficients multiplying ln(1/delta) under mu_x**2 and mu_z**2."""
    if n < 1 or k < 1:
        raise ValueError(f"test counts must be >= 1, got n={n}, k={k}")
    if kind == "estimation":
        total = n + k
        fx = k * (n + 1) / (n * n * total)
        fz = n * (k + 1) / (k * k * total)
        return fx, fz, total
    if n_data < 1:
        raise ValueError(f"verification needs N_data >= 1, got {n_data}")
    fx = (n_data + n) / (n_data * n) * (n + 1) / n
    fz = (n_data + k) / (n_data * k) * (k + 1) / k
    return fx, fz, n_data


def _check_rates(q, e_x, e_z, epsilon):
    for name, v in (("e_x", e_x), ("e_z", e_z)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not math.isfinite(q):
        raise ValueError(f"q must be finite, got {q!r}")


def _general_curve(kind, n, k, n_data, q, e_x, e_z, epsilon, ln_pass_x, ln_pass_z):
    _check_rates(q, e_x, e_z, epsilon)
    fx, fz, covered = _general_factors(kind, n, k, n_data)
    s = math.sqrt(epsilon / 2.0)
    ln_den = _ln_delta_denominator(ln_pass_x, ln_pass_z)

    def curve(eta: np.ndarray):
        ln_inv_delta = ln_den - np.log(s - eta)
        mu_x = np.sqrt(fx * ln_inv_delta)
        mu_z = np.sqrt(fz * ln_inv_delta)
        entropy = covered * (q
                             - binary_entropy_array(np.minimum(e_x + mu_x, H_CAP))
                             - binary_entropy_array(np.minimum(e_z + mu_z, H_CAP)))
        # 2 log2(2 / delta**2)
        log_kappa = 2.0 * (1.0 + 2.0 * ln_inv_delta / LN2)
        log_inv_eta = -4.0 * np.log2(eta)
        value = entropy - log_kappa - log_inv_eta - 2.0
        return value, {"entropy": entropy, "log_kappa": log_kappa,
                       "log_inv_eta": log_inv_eta, "mu_x": mu_x, "mu_z": mu_z}

    return curve, covered, s


def general_bound_at_eta(kind: Variant, n: int, k: int, n_data: int, q: float, e_x: float,
                         e_z: float, epsilon: float, eta: float, p_pass_x: float | None = None,
                         p_pass_z: float | None = None, *, log2_p_pass_x: float | None = None,
                         log2_p_pass_z: float | None = None, p: float | None = None,
                         log2_one_minus_p: float | None = None) -> float:
    """General-form objective at one ``eta``; ``n_data`` is ignored for estimation."""
    smoothing_gap(epsilon, eta)
    ln_px, ln_pz = _resolve_pass(p_pass_x, p_pass_z, log2_p_pass_x, log2_p_pass_z,
                                 p, log2_one_minus_p)
    curve, _, _ = _general_curve(kind, n, k, n_data, q, e_x, e_z, epsilon, ln_px, ln_pz)
    return float(curve(np.array([eta]))[0][0])


def general_estimation_bound(n: int, k: int, q: float, e_x: float, e_z: float, epsilon: float,
                             p_pass_x: float | None = None, p_pass_z: float | None = None, *,
                             log2_p_pass_x: float | None = None,
                             log2_p_pass_z: float | None = None, p: float | None = None,
                             log2_one_minus_p: float | None = None) -> BoundResult:
    """Estimation bound for ``n`` X-tests and ``k`` Z-tests covering all n + k qubits.

    Pass probabilities may be given per basis or jointly through ``p``
    (both set to ``1 - p``).
    """
    ln_px, ln_pz = _resolve_pass(p_pass_x, p_pass_z, log2_p_pass_x, log2_p_pass_z,
                                 p, log2_one_minus_p)
    curve, covered, s = _general_curve("estimation", n, k, 0, q, e_x, e_z, epsilon, ln_px, ln_pz)
    return _supremum(curve, s, covered)


def general_verification_bound(n: int, k: int, n_data: int, q: float, e_x: float, e_z: float,
                               epsilon: float, p_pass_x: float | None = None,
                               p_pass_z: float | None = None, *,
                               log2_p_pass_x: float | None = None,
                               log2_p_pass_z: float | None = None, p: float | None = None,
                               log2_one_minus_p: float | None = None) -> BoundResult:
    """Verification bound on ``n_data`` data qubits from ``n`` X-tests and ``k`` Z-tests."""
    ln_px, ln_pz = _resolve_pass(p_pass_x, p_pass_z, log2_p_pass_x, log2_p_pass_z,
                                 p, log2_one_minus_p)
    curve, covered, s = _general_curve("verification", n, k, n_data, q, e_x, e_z, epsilon,
                                       ln_px, ln_pz)
    return _supremum(curve, s, covered)


def asymptotic_rate(q: float, e_x: float, e_z: float) -> float:
    """Large-N limit of the rate bound: q - h(e_x) - h(e_z)."""
    return q - binary_entropy(e_x) - binary_entropy(e_z)


# -- eta optimizer -----------------------------------------------------------

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f: Callable[[float], float], a: float, b: float, rel_tol: float):
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * 0.5 * (a + b):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def eta_grid(epsilon: float, num: int = GRID_POINTS) -> np.ndarray:
    s = math.sqrt(epsilon / 2.0)
    return np.geomspace(s * GRID_EDGE, s * (1.0 - GRID_EDGE), num)


def _supremum(curve, s: float, covered: int) -> BoundResult:
    grid = np.geomspace(s * GRID_EDGE, s * (1.0 - GRID_EDGE), GRID_POINTS)
    values, _ = curve(grid)
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, GRID_POINTS - 1)]

    def scalar(eta: float) -> float:
        return float(curve(np.array([eta]))[0][0])

    eta_star, best = _golden_max(scalar, lo, hi, ETA_REL_TOL)
    if values[i] > best:
        eta_star = float(grid[i])
    value, parts = curve(np.array([eta_star]))
    value = float(value[0])
    terms = {key: float(parts[key][0]) for key in ("entropy", "log_kappa", "log_inv_eta")}
    terms["constant"] = 2.0
    return BoundResult(
        value=value,
        rate=value / covered,
        eta_star=float(eta_star),
        mu_x=float(parts["mu_x"][0]),
        mu_z=float(parts["mu_z"][0]),
        covered=covered,
        terms=terms,
    )
