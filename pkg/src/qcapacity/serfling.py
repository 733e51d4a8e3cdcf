"""Tail bounds for sampling without replacement.

``serfling_tail`` is the exponential bound used to derive the statistical
slack; ``hypergeometric_tail_oracle`` computes the exact tail it bounds by
summing the hypergeometric mass in rational arithmetic. The oracle is only
meant for small populations, where it serves as a ground truth.
"""
from __future__ import annotations

import math
from fractions import Fraction

MAX_ORACLE_POPULATION = 24


def serfling_tail(n: int, k: int, nu: float) -> float:
    """Upper bound on P[sqrt(n) * (Lambda_x - Lambda_tot) >= nu].

    ``n`` items are sampled without replacement from a population of
    ``n + k``; ``Lambda_x`` is the sample error fraction and ``Lambda_tot``
    the population error fraction.
    """
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu!r}")
    return math.exp(-2.0 * nu * nu / (1.0 - (n - 1) / (n + k)))


def hypergeometric_pmf(n: int, k: int, total_errors: int) -> list[Fraction]:
    """Exact law of the number of errors that land among the ``n`` sampled slots."""
    population = n + k
    norm = math.comb(population, n)
    return [
        Fraction(math.comb(total_errors, j) * math.comb(population - total_errors, n - j), norm)
        for j in range(0, min(n, total_errors) + 1)
    ]


def hypergeometric_tail_oracle(n: int, k: int, total_errors: int, nu: float) -> Fraction:
    """Exact P[sqrt(n) * (Lambda_x - Lambda_tot) >= nu] as a rational number.

    The comparison against ``nu`` is done exactly: with ``d = j/n - e/(n+k)``
    the event is ``d >= 0 and n * d**2 >= nu**2`` (for ``nu > 0``).
    """
    population = n + k
    if population > MAX_ORACLE_POPULATION:
        raise ValueError(f"n + k = {population} exceeds the enumeration limit "
                         f"{MAX_ORACLE_POPULATION}")
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    if not 0 <= total_errors <= population:
        raise ValueError(f"total_errors must lie in [0, {population}], got {total_errors}")
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu!r}")
    nu_sq = Fraction(nu) ** 2
    mean = Fraction(total_errors, population)
    tail = Fraction(0)
    for j, mass in enumerate(hypergeometric_pmf(n, k, total_errors)):
        d = Fraction(j, n) - mean
        if d >= 0 and n * d * d >= nu_sq:
            tail += mass
    return tail
