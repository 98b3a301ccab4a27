"""Block-wise summation of the multi-index power series.

Three series are evaluated here, all built on the cascade moment sequence
``M(n)``:

real part
    ``f(x) = (pi s2)^{-1/2} sum_l (-1)^l / (l! s2^l) sum_n C(2l, n) (-1)^n
    x^{2l-n} M(n)``, i.e. the expansion of ``E[exp(-(x - X)^2 / s2)]``.
envelope
    the angular integral of the polar density with ``cos^{2j}`` moments
    expanded through the terminating ``2F1`` at ``z = 2``.
phase
    the radial integral of the polar density, term by term.

Each series is summed in blocks (one block per ``l``).  Summation stops once
``stall_blocks`` consecutive blocks each fall below ``rel_tol`` of the running
sum.  A cancellation alarm fires as soon as the accumulated absolute mass
exceeds the precision budget relative to ``min(|partial|, bound)``, where
``bound`` is an a-priori upper bound on the bracketed sum; without the bound a
divergent alternating series would never look ill-conditioned.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from .channel import ChannelParams, validate
from .moments import CASCADE_LAWS, GAMMA_READINGS, MP, WEIGHT_READINGS, log_moment_sequence, moment_sequence_mp
from .special import ExtendedAccumulator, hyp2f1_at_2_exact

PRECISION_MODES = ("standard", "extended")
METHODS = ("auto", "series", "quadrature")
ENVELOPE_READINGS = ("derived", "printed")
PHASE_READINGS = ("corrected", "printed")

# usable significant digits of one term in each mode
_DIGITS = {"standard": 14, "extended": MP.dps - 1}


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation, precision and evaluation-path settings."""

    rel_tol: float = 1e-6
    max_ell: int = 200
    max_q: int = 400
    precision_mode: Literal["standard", "extended"] = "extended"
    method: Literal["auto", "series", "quadrature"] = "auto"
    law: Literal["paper", "exact"] = "paper"
    gamma_reading: Literal["single", "per_element"] = "single"
    weight_reading: Literal["binomial", "printed"] = "binomial"
    envelope_reading: Literal["derived", "printed"] = "derived"
    phase_reading: Literal["corrected", "printed"] = "corrected"
    stall_blocks: int = 3

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_ell < 1 or self.max_q < 1:
            raise ValueError("max_ell and max_q must be ≥ 1")
        if self.stall_blocks < 1:
            raise ValueError("stall_blocks must be ≥ 1")
        for name, allowed in (
            ("precision_mode", PRECISION_MODES),
            ("method", METHODS),
            ("law", CASCADE_LAWS),
            ("gamma_reading", GAMMA_READINGS),
            ("weight_reading", WEIGHT_READINGS),
            ("envelope_reading", ENVELOPE_READINGS),
            ("phase_reading", PHASE_READINGS),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @property
    def extended(self) -> bool:
        return self.precision_mode == "extended"

    @property
    def condition_budget(self) -> float:
        requested = -math.log10(self.rel_tol)
        return 10.0 ** (_DIGITS[self.precision_mode] - requested)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SeriesConfig":
        return cls(**data)


class SeriesError(ArithmeticError):
    """A series could not be summed to the requested accuracy."""

    def __init__(self, message: str, *, partial_sum=math.nan, blocks=0, last_block=math.nan, condition=math.nan):
        super().__init__(message)
        self.partial_sum = float(partial_sum)
        self.blocks = blocks
        self.last_block = float(last_block)
        self.condition = float(condition)


class SeriesNonConvergence(SeriesError):
    pass


class CancellationAlarm(SeriesError):
    pass


class SeriesSingularity(SeriesError):
    pass


@dataclass(frozen=True)
class SeriesResult:
    value: float
    blocks: int
    terms_used: int
    tail_estimate: float
    condition: float


def sum_blocks(
    blocks: Iterable[Sequence],
    config: SeriesConfig,
    *,
    bound: float,
    label: str,
    min_blocks: int | None = None,
    stop_tol: float | None = None,
) -> SeriesResult:
    """Accumulate blocks of terms under the stopping and cancellation rules.

    ``blocks`` yields sequences of floats (standard mode) or ``mpf`` values
    (extended mode).  ``bound`` is an upper bound on the magnitude of the true
    sum, used to lower-bound the condition number.  ``stop_tol`` overrides
    ``config.rel_tol`` in the stopping rule only (the cancellation budget is
    unchanged); inner series whose errors are amplified downstream use it.
    """
    stop_tol = config.rel_tol if stop_tol is None else stop_tol
    stall_needed = config.stall_blocks
    min_blocks = stall_needed if min_blocks is None else max(min_blocks, stall_needed)
    budget = config.condition_budget
    extended = config.extended
    if extended:
        total = MP.mpf(0)
        abs_total = MP.mpf(0)
    else:
        acc = ExtendedAccumulator()
    stall = 0
    recent: list[float] = []
    recent_partials: list[float] = []
    n_terms = 0
    n_blocks = 0
    partial = 0.0
    block_mag = math.nan
    for terms in blocks:
        n_blocks += 1
        n_terms += len(terms)
        if extended:
            block = MP.fsum(terms)
            total += block
            abs_total += MP.fsum(abs(t) for t in terms)
            partial = float(total)
            abs_mass = float(abs_total)
        else:
            block = math.fsum(terms)
            acc.extend(terms)
            partial = acc.value
            abs_mass = acc.abs_sum
        block_mag = abs(float(block))
        # a transient dip of the running sum is not ill-conditioning, so the
        # scale is the largest recent partial (capped by the a-priori bound)
        recent_partials.append(abs(partial))
        scale = min(max(recent_partials[-(stall_needed + 1) :]), bound)
        condition = abs_mass / scale if scale > 0 else math.inf
        if condition > budget and n_blocks >= 2:
            raise CancellationAlarm(
                f"{label}: condition {condition:.3g} exceeds budget {budget:.3g} after {n_blocks} blocks",
                partial_sum=partial,
                blocks=n_blocks,
                last_block=block_mag,
                condition=condition,
            )
        recent.append(block_mag)
        stall = stall + 1 if block_mag <= stop_tol * abs(partial) else 0
        if stall >= stall_needed and n_blocks >= min_blocks:
            if partial == 0.0:
                raise CancellationAlarm(
                    f"{label}: sum cancels to zero; relative accuracy undefined",
                    partial_sum=partial,
                    blocks=n_blocks,
                    last_block=block_mag,
                    condition=math.inf,
                )
            tail = max(recent[-stall_needed:]) / abs(partial)
            return SeriesResult(partial, n_blocks, n_terms, tail, condition)
    raise SeriesNonConvergence(
        f"{label}: no convergence within {n_blocks} blocks",
        partial_sum=partial,
        blocks=n_blocks,
        last_block=block_mag,
    )


# -- shared term tables -------------------------------------------------------


class _Tables:
    """Moment sequences and factorial tables for one (params, config)."""

    def __init__(self, params: ChannelParams, config: SeriesConfig):
        validate(params)
        self.params = params
        self.config = config
        self.n_max = 2 * config.max_ell
        key = (params, self.n_max, config.law, config.gamma_reading, config.weight_reading)
        if config.extended:
            self.moments = moment_sequence_mp(*key)
            self.fact = [MP.factorial(n) for n in range(self.n_max + 1)]
            self.s2 = MP.mpf(params.sigma_h_sq)
        else:
            self.sign, self.log_abs = log_moment_sequence(*key)
            self.lfact = np.array([math.lgamma(n + 1) for n in range(self.n_max + 1)])
            self.log_s2 = math.log(params.sigma_h_sq)


@lru_cache(maxsize=64)
def _tables(params: ChannelParams, config: SeriesConfig) -> _Tables:
    return _Tables(params, config)


# -- real part ------------------------------------------------------------------


def _real_blocks(x: float, tab: _Tables) -> Iterator[Sequence]:
    if tab.config.extended:
        xm = MP.mpf(x)
        xpow = [MP.mpf(1)]
        for ell in range(tab.config.max_ell + 1):
            while len(xpow) <= 2 * ell:
                xpow.append(xpow[-1] * xm)
            lead = (-1) ** ell * tab.fact[2 * ell] / (tab.fact[ell] * tab.s2**ell)
            terms = []
            for n in range(2 * ell + 1):
                m = tab.moments[n]
                if m and xpow[2 * ell - n]:
                    t = lead * m * xpow[2 * ell - n] / (tab.fact[n] * tab.fact[2 * ell - n])
                    terms.append(-t if n % 2 else t)
            yield terms
        return
    log_x = math.log(abs(x)) if x else -math.inf
    sx = -1.0 if x < 0 else 1.0
    for ell in range(tab.config.max_ell + 1):
        n = np.arange(2 * ell + 1)
        p = 2 * ell - n
        with np.errstate(invalid="ignore"):
            powx = np.where(p == 0, 0.0, p * log_x)
        log_t = (
            tab.lfact[2 * ell]
            - tab.lfact[ell]
            - ell * tab.log_s2
            - tab.lfact[n]
            - tab.lfact[p]
            + tab.log_abs[n]
            + powx
        )
        sign = (-1.0) ** (ell + n) * tab.sign[n] * np.where(p % 2 == 1, sx, 1.0)
        with np.errstate(over="raise"):
            try:
                terms = sign * np.exp(log_t)
            except FloatingPointError:
                raise CancellationAlarm(f"real series: term overflow at block {ell}", blocks=ell) from None
        yield terms[np.isfinite(log_t)].tolist()


def real_series(x: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> SeriesResult:
    """Real-part density by the double power series in ``x``."""
    tab = _tables(params, config)
    res = sum_blocks(_real_blocks(float(x), tab), config, bound=1.0, label=f"real series at x={x:g}")
    pref = 1.0 / math.sqrt(math.pi * params.sigma_h_sq)
    return SeriesResult(res.value * pref, res.blocks, res.terms_used, res.tail_estimate, res.condition)


# -- envelope -------------------------------------------------------------------


@lru_cache(maxsize=65536)
def _log_f21_reg(j: int, q: int) -> tuple[float, float]:
    """``(sign, log|2F1~(-2j, q+1/2; 2q+1; 2)|)`` from the exact rational."""
    f = hyp2f1_at_2_exact(j, q)
    if f == 0:
        return 0.0, -math.inf
    return math.copysign(1.0, f), math.log(abs(f.numerator)) - math.log(f.denominator) - math.lgamma(2 * q + 1)


@lru_cache(maxsize=65536)
def _mp_f21_reg(j: int, q: int):
    f = hyp2f1_at_2_exact(j, q)
    return MP.mpf(f.numerator) / (f.denominator * MP.factorial(2 * q))


@lru_cache(maxsize=65536)
def _mp_angular_coef(j: int, q: int, derived: bool):
    if derived:
        coef = 2 * MP.mpf(2) ** (2 * q) * MP.gamma(q + MP.mpf(1) / 2) ** 2 / MP.factorial(q)
    else:
        coef = MP.mpf(2) ** q * MP.gamma(q + MP.mpf(1) / 2)
    return coef * _mp_f21_reg(j, q)


def _angular_q_blocks(j: int, r: float, tab: _Tables) -> Iterator[Sequence]:
    """Terms of ``int cos^{2j} exp(-r^2 sin^2 / s2) dtheta`` over ``q``."""
    derived = tab.config.envelope_reading == "derived"
    if tab.config.extended:
        a = MP.mpf(r) ** 2 / tab.s2
        apow = MP.mpf(1)
        for q in range(tab.config.max_q + 1):
            t = apow * _mp_angular_coef(j, q, derived)
            yield [-t if q % 2 else t]
            apow *= a
        return
    log_a = 2.0 * math.log(r) - tab.log_s2 if r > 0 else -math.inf
    for q in range(tab.config.max_q + 1):
        sf, lf = _log_f21_reg(j, q)
        if derived:
            lc = (2 * q + 1) * math.log(2.0) + 2.0 * math.lgamma(q + 0.5) - math.lgamma(q + 1)
        else:
            lc = q * math.log(2.0) + math.lgamma(q + 0.5)
        lt = (q * log_a if q else 0.0) + lc + lf
        if lt > 700:
            raise CancellationAlarm(f"angular series: term overflow at q={q}", blocks=q)
        t = sf * math.exp(lt) if math.isfinite(lt) else 0.0
        yield [-t if q % 2 else t]


def _angular_integral(j: int, r: float, tab: _Tables) -> SeriesResult:
    # cos^{2j} exp(-a sin^2) integrates to at most 2 pi.  The outer sum
    # amplifies errors in these values by its condition number, so they are
    # summed to working precision rather than to rel_tol.
    return sum_blocks(
        _angular_q_blocks(j, r, tab),
        tab.config,
        bound=2.0 * math.pi,
        label=f"angular series j={j} at r={r:g}",
        stop_tol=10.0 ** -_DIGITS[tab.config.precision_mode],
    )


def _envelope_blocks(r: float, tab: _Tables, angular: dict, q_terms: list) -> Iterator[Sequence]:
    ext = tab.config.extended
    for ell in range(tab.config.max_ell + 1):
        terms = []
        for j in range(ell + 1):
            if j not in angular:
                res = _angular_integral(j, r, tab)
                angular[j] = MP.mpf(res.value) if ext else res.value
                q_terms.append(res.terms_used)
            nu = 2 * ell - 2 * j
            if ext:
                m = tab.moments[nu]
                if not m:
                    continue
                t = (
                    tab.fact[2 * ell]
                    / (tab.fact[ell] * tab.fact[2 * j] * tab.fact[nu])
                    * m
                    * MP.mpf(r) ** (2 * j)
                    * angular[j]
                    / tab.s2**ell
                )
                terms.append(-t if ell % 2 else t)
            else:
                if tab.sign[nu] == 0 or angular[j] == 0.0:
                    continue
                lt = (
                    tab.lfact[2 * ell]
                    - tab.lfact[ell]
                    - tab.lfact[2 * j]
                    - tab.lfact[nu]
                    + tab.log_abs[nu]
                    + (2 * j * math.log(r) if j else 0.0)
                    - ell * tab.log_s2
                    + math.log(abs(angular[j]))
                )
                if lt > 700:
                    raise CancellationAlarm(f"envelope series: term overflow at block {ell}", blocks=ell)
                t = (-1.0) ** ell * tab.sign[nu] * math.copysign(1.0, angular[j]) * math.exp(lt)
                terms.append(t)
        yield terms


def envelope_series(r: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> SeriesResult:
    """Envelope density by the triple series over ``l``, ``p`` and ``q``."""
    r = float(r)
    if r < 0:
        raise ValueError("envelope requires r ≥ 0")
    if r == 0:
        return SeriesResult(0.0, 0, 0, 0.0, 1.0)
    tab = _tables(params, config)
    angular: dict = {}
    q_terms: list[int] = []
    res = sum_blocks(
        _envelope_blocks(r, tab, angular, q_terms),
        config,
        bound=2.0 * math.pi,
        label=f"envelope series at r={r:g}",
    )
    if config.envelope_reading == "derived":
        pref = r / (math.pi * params.sigma_h_sq)
    else:
        pref = r / (math.pi * math.sqrt(params.sigma_h_sq))
    return SeriesResult(
        res.value * pref, res.blocks, res.terms_used + sum(q_terms), res.tail_estimate, res.condition
    )


# -- phase ----------------------------------------------------------------------


def _phase_blocks(k: float, sigma_pow: bool, tab: _Tables) -> Iterator[Sequence]:
    s = math.sqrt(tab.params.sigma_h_sq)
    if tab.config.extended:
        km = MP.mpf(k) * (MP.sqrt(tab.s2) if sigma_pow else 1)
        kpow = [MP.mpf(1)]
        gam = [MP.gamma(MP.mpf(p) / 2 + 1) for p in range(2 * tab.config.max_ell + 1)]
        for ell in range(tab.config.max_ell + 1):
            while len(kpow) <= 2 * ell:
                kpow.append(kpow[-1] * km)
            lead = tab.fact[2 * ell] / (tab.fact[ell] * tab.s2**ell)
            terms = []
            for p in range(2 * ell + 1):
                nu = 2 * ell - p
                m = tab.moments[nu]
                if m and kpow[p]:
                    t = lead * m * gam[p] * kpow[p] / (tab.fact[p] * tab.fact[nu])
                    terms.append(-t if (ell + p) % 2 else t)
            yield terms
        return
    keff = k * s if sigma_pow else k
    log_k = math.log(abs(keff)) if keff else -math.inf
    sk = -1.0 if keff < 0 else 1.0
    for ell in range(tab.config.max_ell + 1):
        p = np.arange(2 * ell + 1)
        nu = 2 * ell - p
        with np.errstate(invalid="ignore"):
            powk = np.where(p == 0, 0.0, p * log_k)
        log_t = (
            tab.lfact[2 * ell]
            - tab.lfact[ell]
            - ell * tab.log_s2
            - tab.lfact[p]
            - tab.lfact[nu]
            + tab.log_abs[nu]
            + np.array([math.lgamma(pp / 2 + 1) for pp in p])
            + powk
        )
        if np.any(log_t > 700):
            raise CancellationAlarm(f"phase series: term overflow at block {ell}", blocks=ell)
        sign = (-1.0) ** (ell + p) * tab.sign[nu] * np.where(p % 2 == 1, sk, 1.0)
        keep = np.isfinite(log_t)
        yield (sign * np.exp(log_t))[keep].tolist()


def phase_series(theta: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> SeriesResult:
    """Phase density by the double series in ``cot(theta)``.

    ``phase_reading="printed"`` sums ``(1/2pi) sum ... cot^p`` literally;
    ``"corrected"`` carries the ``sigma^p / sin^2`` factor that the radial
    integral produces and uses ``cos/|sin|`` so the result is even in theta.
    """
    theta = float(theta)
    if not -math.pi < theta <= math.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    sin_t = math.sin(theta)
    if abs(sin_t) < 1e-12:
        raise SeriesSingularity(f"phase series is singular at theta={theta:g}")
    tab = _tables(params, config)
    corrected = config.phase_reading == "corrected"
    k = math.cos(theta) / (abs(sin_t) if corrected else sin_t)
    mean_x = float(moment_sequence_mp(params, 1, config.law, config.gamma_reading, config.weight_reading)[1])
    bound = 1.0 + mean_x / math.sqrt(params.sigma_h_sq / 2.0)
    res = sum_blocks(
        _phase_blocks(k, corrected, tab), config, bound=bound, label=f"phase series at theta={theta:g}"
    )
    pref = 1.0 / (2.0 * math.pi)
    if corrected:
        pref /= sin_t * sin_t
    return SeriesResult(res.value * pref, res.blocks, res.terms_used, res.tail_estimate, res.condition)
