"""Densities of the real part ``h_r = h_r1 + Re(h_d)`` by quadrature.

The series expressions are formal expansions of the convolution

    f_hr(x) = int f_hr1(t) N(x - t; 0, sigma_h^2/2) dt,

so whenever the series cannot be summed the same law is evaluated here
directly.  Two cascade laws are available:

``paper``
    the law whose moments are the closed-form multi-index expression.  It is
    a signed mixture over the index sum ``s`` of ``sqrt(c G_1 G_u)`` with
    ``G_a ~ Gamma(a, 1)``, whose density is a Bessel-K function.
``exact``
    the phase-aligned sum of ``N`` i.i.d. double-Nakagami products, evaluated
    by inverting its characteristic function.

Each law is tabulated once on a fine node grid and interpolated with a cubic
spline; scalar and vector evaluations therefore agree bit-for-bit.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, kve

from .channel import ChannelParams, validate
from .moments import CASCADE_LAWS, GammaReading, WeightReading, build_inner_sum_table, moment_sequence_mp

_GL_X, _GL_W = leggauss(16)
# Gaussian mass beyond 38.5 standard deviations is below 1e-320
_GAUSS_REACH = 38.5


def _composite_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * _GL_X[None, :]
    weights = half * _GL_W[None, :]
    return nodes.ravel(), weights.ravel()


def _graded_edges(upper: float, width: float, first: float) -> np.ndarray:
    """Panel edges on ``[0, upper]``, geometrically refined towards 0."""
    n_uniform = max(1, int(math.ceil(upper / width)))
    uniform = np.linspace(0.0, upper, n_uniform + 1)
    grade_top = uniform[1]
    graded = grade_top * np.logspace(math.log10(first / grade_top), 0.0, 12)
    return np.concatenate([[0.0], graded[:-1], uniform[1:]])


def _log_kve(order, y):
    """``log(K_order(y) e^y)`` that stays finite where ``kve`` overflows."""
    order, y = np.broadcast_arrays(np.abs(order), y)
    with np.errstate(divide="ignore", over="ignore"):
        val = kve(order, y)
        out = np.log(val)
    bad = ~np.isfinite(out) & (order > 0)
    if np.any(bad):
        # K_v(y) ~ Γ(v)/2 (2/y)^v as y -> 0
        o, yy = order[bad], y[bad]
        out[bad] = gammaln(o) - math.log(2.0) + o * np.log(2.0 / yy) + yy
    return out


def paper_cascade_components(
    params: ChannelParams, reading: GammaReading = "single", weights: WeightReading = "binomial"
):
    """Mixture weights and Gamma orders of the closed-form cascade law."""
    table = build_inner_sum_table(params, weights)
    mix = table.coefficients.astype(float)
    us = table.u_values.astype(float)
    if reading == "per_element":
        mix = mix * np.exp(-(params.n_elements - 1) * gammaln(us))
    elif reading != "single":
        raise ValueError(f"unknown gamma reading {reading!r}")
    keep = mix != 0
    return mix[keep], us[keep]


def paper_cascade_pdf(
    t, params: ChannelParams, reading: GammaReading = "single", weights: WeightReading = "binomial"
) -> np.ndarray:
    """Density of ``h_r1`` under the closed-form law.

    Component ``s`` is ``4 t^u c^{-(u+1)/2} K_{u-1}(2t/sqrt(c)) / Γ(u)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = params.cascade_scale
    mix, us = paper_cascade_components(params, reading, weights)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos][:, None]
    y = 2.0 * tp / math.sqrt(c)
    with np.errstate(divide="ignore", under="ignore"):
        log_comp = (
            math.log(4.0)
            + us * np.log(tp)
            - 0.5 * (us + 1.0) * math.log(c)
            - gammaln(us)
            + _log_kve(us - 1.0, y)
            - y
        )
    out[pos] = np.exp(log_comp) @ mix
    return out


def double_nakagami_pdf(x, m1: int, m2: int, omega1: float, omega2: float) -> np.ndarray:
    """Density of ``|h1||h2|`` for independent Nakagami envelopes."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    beta = m1 * m2 / (omega1 * omega2)
    out = np.zeros_like(x)
    pos = x > 0
    z = 2.0 * math.sqrt(beta) * x[pos]
    with np.errstate(divide="ignore", under="ignore"):
        log_f = (
            math.log(4.0)
            + 0.5 * (m1 + m2) * math.log(beta)
            + (m1 + m2 - 1) * np.log(x[pos])
            - gammaln(m1)
            - gammaln(m2)
            + _log_kve(float(m1 - m2), z)
            - z
        )
    out[pos] = np.exp(log_f)
    return out


def product_characteristic_function(t, params: ChannelParams) -> np.ndarray:
    """``E[exp(i t |h1||h2|)]`` by Gauss-Legendre quadrature in ``y = sqrt(x)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = params.cascade_scale
    x_max = math.sqrt(c) * (25.0 + 4.0 * (params.m1 + params.m2))
    y_max = math.sqrt(x_max)
    t_abs = max(float(np.max(np.abs(t))), 1.0)
    width = min(y_max / 16, 8.0 / (2.0 * t_abs * y_max))
    y, w = _composite_nodes(_graded_edges(y_max, width, 1e-6 * y_max))
    x = y * y
    f = double_nakagami_pdf(x, params.m1, params.m2, params.omega1, params.omega2) * 2.0 * y * w
    out = np.empty(t.shape, dtype=complex)
    for start in range(0, t.size, 256):
        tt = t[start : start + 256, None]
        out[start : start + 256] = np.exp(1j * tt * x[None, :]) @ f
    return out


def _law_moments(params: ChannelParams, law: str, reading: str, weights: str) -> tuple[float, float, float]:
    m = moment_sequence_mp(params, 2, law, reading, weights)
    m0, m1, m2 = (float(v) for v in m)
    mean = m1 / m0
    var = max(m2 / m0 - mean * mean, 0.0)
    return m0, mean, var


class RealPartDensity:
    """Tabulated ``f_hr`` for one parameter set and cascade law."""

    def __init__(
        self,
        params: ChannelParams,
        law: str = "paper",
        reading: GammaReading = "single",
        weights: WeightReading = "binomial",
    ):
        validate(params)
        if law not in CASCADE_LAWS:
            raise ValueError(f"law must be one of {CASCADE_LAWS}, got {law!r}")
        self.params = params
        self.law = law
        self.reading = reading
        self.weights = weights
        self.sigma_r = math.sqrt(params.sigma_h_sq / 2.0)
        self.total_mass, self.cascade_mean, self.cascade_var = _law_moments(params, law, reading, weights)
        sd = math.sqrt(self.cascade_var)
        self.lo = -12.0 * self.sigma_r
        self.hi = self.cascade_mean + 25.0 * sd + 12.0 * self.sigma_r
        spacing = min(self.sigma_r / 20.0, (self.hi - self.lo) / 4000.0)
        n_nodes = int(min(20000, math.ceil((self.hi - self.lo) / spacing))) + 1
        self.nodes = np.linspace(self.lo, self.hi, n_nodes)
        if law == "paper":
            values = self._convolve_paper(self.nodes)
        else:
            values = self._invert_exact(self.nodes)
        self.node_values = values
        self._spline = CubicSpline(self.nodes, values, bc_type="natural", extrapolate=False)

    @property
    def mean(self) -> float:
        return self.cascade_mean

    @property
    def variance(self) -> float:
        return self.cascade_var + self.sigma_r**2

    def _convolve_paper(self, x: np.ndarray) -> np.ndarray:
        t_hi = self.hi + _GAUSS_REACH * self.sigma_r
        edges = _graded_edges(t_hi, 0.5 * self.sigma_r, 1e-9 * max(t_hi, 1.0))
        t, w = _composite_nodes(edges)
        gw = paper_cascade_pdf(t, self.params, self.reading, self.weights) * w
        keep = gw != 0
        t, gw = t[keep], gw[keep]
        norm = 1.0 / (math.sqrt(2.0 * math.pi) * self.sigma_r)
        out = np.empty_like(x)
        for start in range(0, x.size, 512):
            xx = x[start : start + 512, None]
            z = (xx - t[None, :]) / self.sigma_r
            out[start : start + 512] = np.exp(-0.5 * z * z) @ gw
        return out * norm

    def _invert_exact(self, x: np.ndarray) -> np.ndarray:
        sig2 = self.params.sigma_h_sq
        t_max = 2.0 * math.sqrt(39.2 / sig2)
        x_abs = max(abs(self.lo), abs(self.hi))
        width = min(0.25, 16.0 / x_abs)
        t, w = _composite_nodes(np.linspace(0.0, t_max, int(math.ceil(t_max / width)) + 1))
        psi = product_characteristic_function(t, self.params) ** self.params.n_elements
        psi *= np.exp(-0.25 * sig2 * t * t) * w
        out = np.empty_like(x)
        for start in range(0, x.size, 512):
            xx = x[start : start + 512, None]
            out[start : start + 512] = np.real(np.exp(-1j * xx * t[None, :]) @ psi)
        return out / math.pi

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        out = self._spline(x)
        out = np.where(np.isnan(out), 0.0, out)
        return float(out) if scalar else out

    def direct(self, x) -> np.ndarray:
        """Evaluate at arbitrary points without the spline (slow; for checks)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.law == "paper":
            return self._convolve_paper(x)
        return self._invert_exact(x)


@lru_cache(maxsize=64)
def real_part_density(
    params: ChannelParams, law: str = "paper", reading: GammaReading = "single", weights: WeightReading = "binomial"
) -> RealPartDensity:
    return RealPartDensity(params, law, reading, weights)
