"""Scalar special functions used by the series terms.

Everything here works on plain Python floats (or exact rationals where the
cancellation structure demands it) and is free of shared mutable state.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Integral
from typing import Iterable


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class PrecisionOverflow(OverflowError):
    """Intermediate magnitude left the double-precision range."""


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def gamma_ratio(numerator_args: Iterable[float], denominator_args: Iterable[float]) -> float:
    """``prod Γ(num) / prod Γ(den)`` computed in the log domain.

    All arguments must be strictly positive; the result is therefore positive.
    """
    log_value = 0.0
    for a in numerator_args:
        log_value += ln_gamma(a)
    for a in denominator_args:
        log_value -= ln_gamma(a)
    try:
        return math.exp(log_value)
    except OverflowError as exc:
        raise PrecisionOverflow(f"gamma ratio exp({log_value:.1f}) overflows") from exc


def _is_integral(a) -> bool:
    if isinstance(a, Integral):
        return True
    return isinstance(a, float) and a.is_integer()


def pochhammer(a: float, k: int) -> float:
    """Rising factorial ``(a)_k = a (a+1) ... (a+k-1)``.

    Signed and exact for integral ``a`` (the product is formed in integer
    arithmetic and rounded once), so ``(1-m)_i`` vanishes exactly once
    ``i > m-1``.
    """
    if k < 0:
        raise DomainError(f"pochhammer requires k >= 0, got {k}")
    if _is_integral(a):
        a = int(a)
        if a <= 0 and -a < k:
            return 0.0
        return float(math.prod(range(a, a + k)))
    result = 1.0
    for j in range(k):
        result *= a + j
    return result


def pochhammer_exact(a: Fraction | int, k: int) -> Fraction:
    """Rising factorial in exact rational arithmetic."""
    a = Fraction(a)
    result = Fraction(1)
    for j in range(k):
        result *= a + j
    return result


@lru_cache(maxsize=4096)
def hyp2f1_at_2_exact(p: int, q: int) -> Fraction:
    """Terminating sum ``2F1(-2p, q+1/2; 2q+1; 2)`` as an exact rational.

    The sum has ``2p + 1`` terms of alternating sign; evaluating it in
    rationals removes the cancellation entirely.
    """
    if p < 0 or q < 0:
        raise DomainError("p and q must be nonnegative integers")
    b = Fraction(2 * q + 1, 2)
    c = 2 * q + 1
    total = Fraction(0)
    term = Fraction(1)
    for j in range(2 * p + 1):
        total += term
        # ratio of consecutive terms: (a+j)(b+j) z / ((c+j)(j+1)), a=-2p, z=2
        term = term * (-2 * p + j) * (b + j) * 2 / ((c + j) * (j + 1))
    return total


def reg_2f1_at_2(p: int, q: int) -> float:
    """Regularized ``2F1(-2p, q+1/2; 2q+1; 2) / Γ(2q+1)``.

    The first parameter is a non-positive integer, so the series terminates
    and no continuation past ``|z| = 1`` is involved.
    """
    value = hyp2f1_at_2_exact(p, q) / math.factorial(2 * q)
    try:
        return float(value)
    except OverflowError as exc:
        raise PrecisionOverflow(f"reg_2f1_at_2({p}, {q}) exceeds double range") from exc


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


class ExtendedAccumulator:
    """Error-free running sum of floats.

    Keeps a short list of non-overlapping partials (Shewchuk's algorithm, the
    one behind :func:`math.fsum`), so the represented sum is exact and the
    rounded ``value`` does not depend on the order in which terms arrive.
    ``compensation`` is the rounded remainder ``exact_sum - value``.
    """

    __slots__ = ("_partials", "terms_added", "abs_sum")

    def __init__(self) -> None:
        self._partials: list[float] = []
        self.terms_added = 0
        self.abs_sum = 0.0

    def add(self, x: float) -> None:
        x = float(x)
        if not math.isfinite(x):
            raise PrecisionOverflow(f"non-finite term {x!r}")
        self.terms_added += 1
        self.abs_sum += abs(x)
        partials = self._partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi, lo = _two_sum(x, y)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    def extend(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.add(x)

    @property
    def value(self) -> float:
        return math.fsum(self._partials)

    @property
    def compensation(self) -> float:
        v = self.value
        return math.fsum(self._partials + [-v])

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return (
            f"ExtendedAccumulator(value={self.value!r}, "
            f"compensation={self.compensation!r}, terms_added={self.terms_added})"
        )
