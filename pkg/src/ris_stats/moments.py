"""Moments of the RIS cascade ``h_r1 = sum_k |h1_k| |h2_k|``.

Two moment laws live here:

* the closed form that drives the series expressions, built from a
  multi-index sum over ``i_1..i_N`` with per-element Pochhammer weights.  The
  sum depends on the multi-index only through ``s = sum i_k``, so it is
  reduced to an ``N``-fold convolution of the per-element weight vector;
* the moments of the phase-aligned sum itself, obtained from the single
  product moments by convolving exponential generating functions.  They are
  exact for integer orders and serve as an independent reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Literal

import mpmath
import numpy as np

from .channel import ChannelParams, effective_u, max_index_sum, validate
from .special import gamma_ratio, pochhammer, pochhammer_exact

GammaReading = Literal["single", "per_element"]
GAMMA_READINGS: tuple[str, ...] = ("single", "per_element")

#: 34 significant digits, close to a double-double.
MP = mpmath.MPContext()
MP.dps = 34


WeightReading = Literal["binomial", "printed"]
WEIGHT_READINGS: tuple[str, ...] = ("binomial", "printed")


def _check_weights(weights: str) -> None:
    if weights not in WEIGHT_READINGS:
        raise ValueError(f"weight reading must be one of {WEIGHT_READINGS}, got {weights!r}")


def _weight_denominator(m1: int, i: int, weights: str) -> int:
    # "binomial": (m1-1-i)! i!, which makes the weights sum to one by the
    # Chu-Vandermonde identity; "printed": (m1-1)! i!.  They coincide for m1 <= 2.
    _check_weights(weights)
    head = math.factorial(m1 - 1 - i) if weights == "binomial" else math.factorial(m1 - 1)
    return head * math.factorial(i)


def element_weights(params: ChannelParams, weights: WeightReading = "binomial") -> np.ndarray:
    """``(m2)_{m1-1-i} (1-m2)_i / (d_i i!)`` for ``i = 0 .. m1-1``.

    ``d_i = (m1-1-i)!`` for ``weights="binomial"`` and ``(m1-1)!`` for
    ``"printed"``.
    """
    m1, m2 = params.m1, params.m2
    return np.array(
        [
            pochhammer(m2, m1 - 1 - i) * pochhammer(1 - m2, i) / _weight_denominator(m1, i, weights)
            for i in range(m1)
        ]
    )


def _element_weights_exact(params: ChannelParams, weights: str) -> list[Fraction]:
    m1, m2 = params.m1, params.m2
    return [
        pochhammer_exact(m2, m1 - 1 - i) * pochhammer_exact(1 - m2, i) / _weight_denominator(m1, i, weights)
        for i in range(m1)
    ]


@dataclass(frozen=True)
class InnerSumTable:
    """Multi-index weights regrouped by ``s = sum_k i_k``.

    ``coefficients[s]`` is the sum over all ``(i_1..i_N)`` with index sum ``s``
    of ``prod_k w[i_k]``.  ``exact`` holds the same numbers as rationals.
    """

    coefficients: np.ndarray
    params: ChannelParams
    exact: tuple[Fraction, ...] = field(repr=False)
    weights: str = "binomial"

    @property
    def u_values(self) -> np.ndarray:
        """Composite Gamma order for each index sum."""
        return np.array([effective_u(self.params, s) for s in range(len(self.coefficients))])


@lru_cache(maxsize=256)
def build_inner_sum_table(params: ChannelParams, weights: WeightReading = "binomial") -> InnerSumTable:
    """Collapse the ``m1**N`` multi-index sum to ``N(m1-1)+1`` coefficients."""
    validate(params)
    w = _element_weights_exact(params, weights)
    coeffs = [Fraction(1)]
    for _ in range(params.n_elements):
        out = [Fraction(0)] * (len(coeffs) + len(w) - 1)
        for i, a in enumerate(coeffs):
            if a:
                for j, b in enumerate(w):
                    out[i + j] += a * b
        coeffs = out
    assert len(coeffs) == max_index_sum(params) + 1
    arr = np.array([float(c) for c in coeffs])
    arr.flags.writeable = False
    return InnerSumTable(coefficients=arr, params=params, exact=tuple(coeffs), weights=weights)


def _check_reading(reading: str) -> None:
    if reading not in GAMMA_READINGS:
        raise ValueError(f"gamma reading must be one of {GAMMA_READINGS}, got {reading!r}")


def weighted_gamma_sum(table: InnerSumTable, a: float, reading: GammaReading = "single") -> float:
    """``sum_s coefficients[s] Γ(a + u_s) / Γ(u_s)``.

    With ``reading="per_element"`` the denominator is ``Γ(u_s)**N``, the
    literal typesetting where the ``1/Γ(u)`` sits inside the product over
    elements.
    """
    _check_reading(reading)
    n = table.params.n_elements if reading == "per_element" else 1
    terms = []
    for c, u in zip(table.coefficients, table.u_values):
        if c:
            terms.append(c * gamma_ratio([a + u], [u] * n))
    return math.fsum(terms)


def cascade_moment(
    params: ChannelParams, nu: float, reading: GammaReading = "single", weights: WeightReading = "binomial"
) -> float:
    """Order-``nu`` moment of ``h_r1`` under the closed-form law.

    ``(Ω1Ω2/m1m2)^{ν/2} Γ(1+ν/2) sum_s C_s Γ(ν/2+u_s)/Γ(u_s)``.
    """
    if nu < 0:
        raise ValueError("moment order must be nonnegative")
    table = build_inner_sum_table(params, weights)
    half = 0.5 * nu
    return params.cascade_scale ** half * math.gamma(1.0 + half) * weighted_gamma_sum(table, half, reading)


def nakagami_moment(m: float, omega: float, nu: float) -> float:
    """``E[X^nu]`` for ``X ~ Nakagami(m, omega)``."""
    return (omega / m) ** (0.5 * nu) * gamma_ratio([m + 0.5 * nu], [m])


def product_moment(params: ChannelParams, nu: float) -> float:
    """``E[(|h1||h2|)^nu]`` for one RIS element."""
    return nakagami_moment(params.m1, params.omega1, nu) * nakagami_moment(params.m2, params.omega2, nu)


CascadeLaw = Literal["paper", "exact"]
CASCADE_LAWS: tuple[str, ...] = ("paper", "exact")


def _paper_moments_mp(params: ChannelParams, n_max: int, reading: str, weights: str) -> list:
    table = build_inner_sum_table(params, weights)
    us = [int(u) for u in table.u_values]
    n_pow = params.n_elements if reading == "per_element" else 1
    c = MP.mpf(params.omega1) * MP.mpf(params.omega2) / (params.m1 * params.m2)
    coeffs = [(MP.mpf(x.numerator) / x.denominator, u, MP.loggamma(u)) for x, u in zip(table.exact, us) if x]
    out = []
    for n in range(n_max + 1):
        h = MP.mpf(n) / 2
        acc = MP.fsum(cs * MP.exp(MP.loggamma(h + u) - n_pow * lgu) for cs, u, lgu in coeffs)
        out.append(c**h * MP.gamma(1 + h) * acc)
    return out


def _exact_moments_mp(params: ChannelParams, n_max: int) -> list:
    # E[S^n]/n! = [t^n] (sum_j E[X^j] t^j / j!)^N for i.i.d. summands X
    m1, m2 = MP.mpf(params.m1), MP.mpf(params.m2)
    scale = (MP.mpf(params.omega1) / m1) * (MP.mpf(params.omega2) / m2)
    norm = MP.gamma(m1) * MP.gamma(m2)
    a = []
    for j in range(n_max + 1):
        h = MP.mpf(j) / 2
        a.append(scale**h * MP.gamma(m1 + h) * MP.gamma(m2 + h) / norm / MP.factorial(j))
    result = [MP.mpf(1)] + [MP.mpf(0)] * n_max
    for _ in range(params.n_elements):
        result = [MP.fsum(result[i] * a[n - i] for i in range(n + 1)) for n in range(n_max + 1)]
    return [result[n] * MP.factorial(n) for n in range(n_max + 1)]


@lru_cache(maxsize=128)
def moment_sequence_mp(
    params: ChannelParams,
    n_max: int,
    law: CascadeLaw = "paper",
    reading: GammaReading = "single",
    weights: WeightReading = "binomial",
) -> tuple:
    """Integer-order moments ``M(0..n_max)`` of ``h_r1`` to 34 digits.

    ``law="paper"`` is the closed-form multi-index law (``reading`` selects
    the Gamma placement, ``weights`` the per-element denominator);
    ``law="exact"`` is the phase-aligned sum itself.
    """
    validate(params)
    _check_reading(reading)
    _check_weights(weights)
    if law == "paper":
        return tuple(_paper_moments_mp(params, n_max, reading, weights))
    if law == "exact":
        return tuple(_exact_moments_mp(params, n_max))
    raise ValueError(f"law must be one of {CASCADE_LAWS}, got {law!r}")


@lru_cache(maxsize=128)
def log_moment_sequence(
    params: ChannelParams,
    n_max: int,
    law: CascadeLaw = "paper",
    reading: GammaReading = "single",
    weights: WeightReading = "binomial",
) -> tuple[np.ndarray, np.ndarray]:
    """``(sign, log|M|)`` arrays for ``n = 0..n_max``; safe past double range."""
    seq = moment_sequence_mp(params, n_max, law, reading, weights)
    sign = np.array([float(MP.sign(m)) for m in seq])
    log_abs = np.array([float(MP.log(abs(m))) if m else -np.inf for m in seq])
    sign.flags.writeable = False
    log_abs.flags.writeable = False
    return sign, log_abs


def exact_cascade_moment(params: ChannelParams, n: int) -> float:
    """Integer-order moment of the phase-aligned sum ``sum_k |h1_k||h2_k|``."""
    return float(moment_sequence_mp(params, n, "exact")[n])
