"""Agreement metrics between analytic densities and Monte Carlo estimates.

* :func:`sup_norm_report` — studentised sup-norm ``D* = max_i |a_i - e_i| / SE_i``
  between bin-averaged analytic densities and a histogram.
* :func:`ks_statistic` — Kolmogorov-Smirnov distance of an ECDF from an
  analytic CDF.
* :func:`normalization_audit` — quadrature integrals of every univariate
  density.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.stats import ks_1samp

from . import __version__
from .channel import ChannelParams
from .marginals import envelope_table, phase_table
from .montecarlo import EmpiricalDensity, SampleBatch
from .pdfs import PdfCurve, curve, pdf_imag
from .laws import real_part_density
from .series import SeriesConfig

DEFAULT_THRESHOLD = 5.0
#: below this many samples a histogram cannot resolve anything but gross errors
LOW_POWER_COUNT = 100_000
NORMALIZATION_TOL = 1e-4
IMAG_NORMALIZATION_TOL = 1e-10
FAILURE_FLAG_TOL = 1e-3
PHASE_EPS = 1e-9


class GridMismatchError(ValueError):
    """The analytic curve does not cover the histogram bins."""


@dataclass
class ValidationReport:
    metric: str
    projection: str
    statistic: float
    threshold: float
    passed: bool
    per_bin_diff: list = field(default_factory=list)
    per_bin_se: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value (``1.63/sqrt(n)`` at 1%)."""
    coef = {0.01: 1.63, 0.05: 1.36, 0.1: 1.22}[alpha]
    return coef / math.sqrt(n)


def bin_masses_from_curve(c: PdfCurve, edges: np.ndarray) -> np.ndarray:
    """Analytic probability per bin from the spline antiderivative of a curve.

    Parts of bins outside the curve grid contribute zero; bin centres outside
    the grid are a mismatch.
    """
    if c.two_dimensional:
        raise GridMismatchError("sup-norm comparison needs a univariate curve")
    grid = c.grid
    centers = 0.5 * (edges[1:] + edges[:-1])
    if centers.min() < grid[0] or centers.max() > grid[-1]:
        raise GridMismatchError(
            f"curve grid [{grid[0]:.4g}, {grid[-1]:.4g}] does not cover bin centres "
            f"[{centers.min():.4g}, {centers.max():.4g}]"
        )
    cum = CubicSpline(grid, c.values).antiderivative()
    clipped = np.clip(edges, grid[0], grid[-1])
    return np.diff(cum(clipped))


def sup_norm_report(
    c: PdfCurve | None,
    empirical: EmpiricalDensity,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    bin_masses: np.ndarray | None = None,
) -> ValidationReport:
    """Studentised sup-norm between analytic bin averages and a histogram.

    The analytic side is the bin average of the density (exact bin mass over
    width), either from ``c`` or supplied as ``bin_masses``.  The per-bin
    standard error is the binomial ``sqrt(p(1-p)/n)/w`` with ``p`` the larger
    of the analytic and empirical bin probabilities (floored at ``1/n``), so an
    empty bin where the model predicts mass is not divided by zero.
    """
    edges = empirical.bin_edges
    if bin_masses is None:
        if c is None:
            raise ValueError("need a curve or bin masses")
        bin_masses = bin_masses_from_curve(c, edges)
    bin_masses = np.asarray(bin_masses, dtype=float)
    if bin_masses.shape != empirical.densities.shape:
        raise GridMismatchError("bin masses do not match the histogram bins")
    w = empirical.widths
    n = empirical.count
    analytic = bin_masses / w
    diff = np.abs(analytic - empirical.densities)
    p = np.maximum(np.maximum(bin_masses, empirical.densities * w), 1.0 / n)
    se = np.sqrt(p * (1.0 - np.minimum(p, 1.0)) / n) / w
    stat = float(np.max(diff / se))
    warnings = []
    if n < LOW_POWER_COUNT:
        warnings.append(
            f"only {n} samples: standard-error envelopes are too wide for a meaningful failure"
        )
    prov = dict(empirical.provenance)
    if c is not None:
        prov["curve"] = c.provenance()
    return ValidationReport(
        metric="studentized_sup_norm",
        projection=empirical.projection,
        statistic=stat,
        threshold=threshold,
        passed=stat <= threshold,
        per_bin_diff=diff.tolist(),
        per_bin_se=se.tolist(),
        warnings=warnings,
        provenance=prov,
    )


def ks_statistic(analytic_cdf: Callable, batch: SampleBatch, projection: str) -> float:
    """``sup_x |F_n(x) - F(x)|`` over the projected samples."""
    x = batch.project(projection)
    return float(ks_1samp(x, analytic_cdf, method="asymp").statistic)


def analytic_cdf(which: str, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> Callable:
    """CDF of the quadrature path of one univariate density."""
    if which == "real":
        dens = real_part_density(params, config.law, config.gamma_reading, config.weight_reading)
        cum = dens._spline.antiderivative()
        return lambda x: cum(np.clip(np.asarray(x, dtype=float), dens.lo, dens.hi))
    if which == "imag":
        from scipy.special import ndtr

        s = math.sqrt(params.sigma_h_sq / 2.0)
        return lambda y: ndtr(np.asarray(y, dtype=float) / s)
    if which in ("magnitude", "envelope"):
        return envelope_table(params, config.law, config.gamma_reading, config.weight_reading).cdf
    if which == "phase":
        tab = phase_table(params, config.law, config.gamma_reading, config.weight_reading)
        return lambda t: tab.cdf(t) - tab.cdf(-math.pi)
    raise ValueError(f"no CDF for {which!r}")


def analytic_bin_masses(which: str, edges: np.ndarray, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> np.ndarray:
    """Exact analytic bin probabilities from the quadrature-path CDF."""
    return np.diff(analytic_cdf(which, params, config)(edges))


def _integrate(fn: Callable, lo: float, hi: float, breakpoints=()) -> float:
    val, _ = quad(fn, lo, hi, points=[p for p in breakpoints if lo < p < hi] or None, epsabs=1e-12, epsrel=1e-10, limit=500)
    return val


def normalization_audit(params: ChannelParams, config: SeriesConfig = SeriesConfig(), *, points: int = 801) -> dict:
    """Integrals of the univariate densities and their deviations from one.

    ``pdf_real``, ``pdf_envelope`` and ``pdf_phase`` are evaluated through
    :func:`curve` (so whichever path ``config`` selects is audited) on a
    uniform grid spanning the support and integrated with a cubic spline;
    ``pdf_imag`` is integrated by adaptive quadrature.
    """
    dens = real_part_density(params, config.law, config.gamma_reading, config.weight_reading)
    env = envelope_table(params, config.law, config.gamma_reading, config.weight_reading)
    s_i = math.sqrt(params.sigma_h_sq / 2.0)
    spans = {
        "real": (dens.lo, dens.hi),
        "envelope": (0.0, env.r_max),
        # the phase is defined on (-pi, pi]; the open end loses ~1e-9 of mass
        "phase": (-math.pi + PHASE_EPS, math.pi),
    }
    out = {}
    for which, (lo, hi) in spans.items():
        grid = np.linspace(lo, hi, points)
        c = curve(which, grid, params, config)
        # the grid tends to straddle the peak symmetrically; spline integral
        integral = float(CubicSpline(grid, c.values).integrate(lo, hi))
        out[which] = _audit_entry(integral, NORMALIZATION_TOL, paths=sorted(set(c.paths)))
    imag = _integrate(lambda y: float(pdf_imag(y, params)), -40 * s_i, 40 * s_i, (0.0,))
    out["imag"] = _audit_entry(imag, IMAG_NORMALIZATION_TOL)
    return {
        "params": params.to_dict(),
        "config": config.to_dict(),
        "version": __version__,
        "integrals": out,
        "passed": all(v["passed"] for v in out.values()),
    }


def _audit_entry(integral: float, tol: float, **extra) -> dict:
    dev = abs(integral - 1.0)
    return {
        "integral": integral,
        "deviation": dev,
        "tolerance": tol,
        "passed": dev <= tol,
        "flagged": dev > FAILURE_FLAG_TOL,
        **extra,
    }


def gamma_reading_audit(params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> dict:
    """Normalisation of the real-part law under each Gamma placement."""
    from dataclasses import replace

    out = {}
    for reading in ("single", "per_element"):
        cfg = replace(config, gamma_reading=reading)
        dens = real_part_density(params, cfg.law, reading, cfg.weight_reading)
        mass = _integrate(lambda x: float(dens(x)), dens.lo, dens.hi, (dens.mean,))
        out[reading] = _audit_entry(mass, NORMALIZATION_TOL)
    return out
