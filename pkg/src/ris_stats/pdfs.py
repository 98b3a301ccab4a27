"""Public densities of the composite channel ``h = h_r + j h_i``.

Every density can be evaluated either by its power series or by direct
quadrature of the same cascade law; ``SeriesConfig.method`` picks the path:

``series``      the series only; failures propagate as :class:`SeriesError`.
``quadrature``  the tabulated convolution (and numeric marginalisation).
``auto``        the series where it converges and is well conditioned,
                otherwise quadrature; the path taken is recorded per point.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.integrate import quad

from . import __version__
from .channel import ChannelParams, validate
from .laws import RealPartDensity, real_part_density
from .series import (
    SeriesConfig,
    SeriesError,
    SeriesResult,
    SeriesSingularity,
    envelope_series,
    phase_series,
    real_series,
)

Which = Literal["real", "imag", "joint", "polar", "envelope", "phase"]
WHICH: tuple[str, ...] = ("real", "imag", "joint", "polar", "envelope", "phase")

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-10, limit=400)


@dataclass(frozen=True)
class PointResult:
    """One density value and how it was obtained."""

    value: float
    path: str
    terms_used: int = 0
    tail_estimate: float = math.nan
    note: str = ""


def _density(params: ChannelParams, config: SeriesConfig) -> RealPartDensity:
    return real_part_density(params, config.law, config.gamma_reading, config.weight_reading)


def _run(series_fn: Callable[[], SeriesResult], fallback: Callable[[], float], config: SeriesConfig) -> PointResult:
    if config.method == "quadrature":
        return PointResult(fallback(), "quadrature")
    try:
        res = series_fn()
    except SeriesError as exc:
        if config.method == "series":
            raise
        return PointResult(fallback(), "quadrature", note=f"{type(exc).__name__}: {exc}")
    return PointResult(res.value, "series", res.terms_used, res.tail_estimate)


# -- imaginary part -----------------------------------------------------------


def pdf_imag(y, params: ChannelParams):
    """Density of ``Im(h)``: zero-mean Gaussian with variance ``sigma_h^2/2``."""
    validate(params)
    s2 = params.sigma_h_sq
    y = np.asarray(y, dtype=float)
    out = np.exp(-y * y / s2) / math.sqrt(math.pi * s2)
    return float(out) if out.ndim == 0 else out


# -- real part ------------------------------------------------------------------


def pdf_real_point(x: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> PointResult:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("abscissa must be finite")
    return _run(lambda: real_series(x, params, config), lambda: _density(params, config)(x), config)


def pdf_real(x, params: ChannelParams, config: SeriesConfig = SeriesConfig()):
    """Density of ``Re(h)``."""
    return _vectorise(lambda v: pdf_real_point(v, params, config).value, x)


# -- joint and polar -----------------------------------------------------------


def pdf_joint(x, y, params: ChannelParams, config: SeriesConfig = SeriesConfig()):
    """Joint density of ``(Re h, Im h)``; the two parts are independent."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    fr = np.vectorize(lambda v: pdf_real_point(v, params, config).value, otypes=[float])(x)
    out = fr * pdf_imag(y, params)
    return float(out) if out.ndim == 0 else out


def pdf_polar(r, theta, params: ChannelParams, config: SeriesConfig = SeriesConfig()):
    """Joint density of ``(|h|, arg h)``: ``r f_joint(r cos t, r sin t)``."""
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    if np.any(r < 0):
        raise ValueError("envelope coordinate must be ≥ 0")
    out = r * pdf_joint(r * np.cos(theta), r * np.sin(theta), params, config)
    return float(out) if np.ndim(out) == 0 else out


# -- envelope -----------------------------------------------------------------


def pdf_envelope_numeric(r: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> float:
    """Envelope density by integrating the polar density over the angle."""
    r = float(r)
    if r < 0:
        raise ValueError("envelope requires r ≥ 0")
    if r == 0:
        return 0.0
    dens = _density(params, config)

    def integrand(t):
        return dens(r * math.cos(t)) * float(pdf_imag(r * math.sin(t), params))

    # even in theta; both axis directions are potential peaks
    val, _ = quad(integrand, 0.0, math.pi, **_QUAD_OPTS)
    return 2.0 * r * val


def pdf_envelope_point(r: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> PointResult:
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError("envelope requires a finite r ≥ 0")
    return _run(lambda: envelope_series(r, params, config), lambda: pdf_envelope_numeric(r, params, config), config)


def pdf_envelope(r, params: ChannelParams, config: SeriesConfig = SeriesConfig()):
    """Density of ``|h|``."""
    return _vectorise(lambda v: pdf_envelope_point(v, params, config).value, r)


# -- phase ------------------------------------------------------------------------


def pdf_phase_numeric(theta: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> float:
    """Phase density by integrating the polar density over the radius."""
    theta = float(theta)
    dens = _density(params, config)
    c, s = math.cos(theta), math.sin(theta)
    sigma_r = dens.sigma_r
    reach = [38.5 * sigma_r / abs(s)] if abs(s) > 1e-300 else []
    if c > 0:
        reach.append(dens.hi / c)
    elif c < 0:
        reach.append(-dens.lo / -c)
    r_max = min(reach)

    def integrand(r):
        return r * dens(r * c) * float(pdf_imag(r * s, params))

    points = []
    if c > 0 and 0 < dens.mean / c < r_max:
        points.append(dens.mean / c)
    val, _ = quad(integrand, 0.0, r_max, points=points or None, **_QUAD_OPTS)
    return val


def pdf_phase_point(theta: float, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> PointResult:
    theta = float(theta)
    if not -math.pi < theta <= math.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    if config.method == "quadrature":
        return PointResult(pdf_phase_numeric(theta, params, config), "quadrature")
    try:
        res = phase_series(theta, params, config)
    except SeriesSingularity as exc:
        if config.method == "series":
            raise
        return PointResult(pdf_phase_numeric(theta, params, config), "quadrature", note=str(exc))
    except SeriesError as exc:
        if config.method == "series":
            raise
        return PointResult(pdf_phase_numeric(theta, params, config), "quadrature", note=f"{type(exc).__name__}: {exc}")
    if config.method == "series":
        return PointResult(res.value, "series", res.terms_used, res.tail_estimate)
    numeric = pdf_phase_numeric(theta, params, config)
    if abs(res.value - numeric) > max(config.rel_tol * abs(numeric), 1e-10):
        return PointResult(
            numeric,
            "quadrature",
            res.terms_used,
            res.tail_estimate,
            note=f"series value {res.value:.10g} disagrees with marginalisation",
        )
    return PointResult(res.value, "series", res.terms_used, res.tail_estimate)


def pdf_phase(theta, params: ChannelParams, config: SeriesConfig = SeriesConfig()):
    """Density of ``arg h`` on ``(-pi, pi]``."""
    return _vectorise(lambda v: pdf_phase_point(v, params, config).value, theta)


def _vectorise(fn, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


# -- curves ---------------------------------------------------------------------


class CurveError(RuntimeError):
    """A curve contains a clearly negative value, i.e. a truncation failure."""


@dataclass
class PdfCurve:
    """A density sampled on a grid, with per-point diagnostics and provenance."""

    which: str
    grid: np.ndarray
    values: np.ndarray
    params: ChannelParams
    config: SeriesConfig
    terms_used: np.ndarray
    tail_estimate: np.ndarray
    paths: list[str]
    raw_values: np.ndarray
    notes: list[str] = field(default_factory=list)
    version: str = __version__

    @property
    def failed(self) -> bool:
        return "failed" in self.paths

    @property
    def two_dimensional(self) -> bool:
        return self.grid.ndim == 2

    def provenance(self) -> dict:
        return {
            "version": self.version,
            "which": self.which,
            "params": self.params.to_dict(),
            "config": self.config.to_dict(),
        }

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        for key, val in self.provenance().items():
            buf.write(f"# {key}: {json.dumps(val)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        if self.two_dimensional:
            writer.writerow(["abscissa", "abscissa2", "value", "terms_used", "tail_estimate"])
            for (a, b), v, n, t in zip(self.grid, self.values, self.terms_used, self.tail_estimate):
                writer.writerow([repr(float(a)), repr(float(b)), repr(float(v)), int(n), repr(float(t))])
        else:
            writer.writerow(["abscissa", "value", "terms_used", "tail_estimate"])
            for a, v, n, t in zip(self.grid, self.values, self.terms_used, self.tail_estimate):
                writer.writerow([repr(float(a)), repr(float(v)), int(n), repr(float(t))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def to_json(self) -> str:
        return json.dumps(
            {
                **self.provenance(),
                "grid": self.grid.tolist(),
                "values": self.values.tolist(),
                "raw_values": self.raw_values.tolist(),
                "terms_used": self.terms_used.tolist(),
                "tail_estimate": [None if math.isnan(t) else t for t in self.tail_estimate.tolist()],
                "paths": self.paths,
                "notes": self.notes,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PdfCurve":
        d = json.loads(text)
        return cls(
            which=d["which"],
            grid=np.asarray(d["grid"], dtype=float),
            values=np.asarray(d["values"], dtype=float),
            params=ChannelParams.from_dict(d["params"]),
            config=SeriesConfig.from_dict(d["config"]),
            terms_used=np.asarray(d["terms_used"], dtype=int),
            tail_estimate=np.array([math.nan if t is None else t for t in d["tail_estimate"]], dtype=float),
            paths=list(d["paths"]),
            raw_values=np.asarray(d["raw_values"], dtype=float),
            notes=list(d["notes"]),
            version=d["version"],
        )


def _point(which: str, a: float, b: float | None, params: ChannelParams, config: SeriesConfig) -> PointResult:
    if which == "real":
        return pdf_real_point(a, params, config)
    if which == "imag":
        return PointResult(float(pdf_imag(a, params)), "closed_form")
    if which == "envelope":
        return pdf_envelope_point(a, params, config)
    if which == "phase":
        return pdf_phase_point(a, params, config)
    if which == "joint":
        p = pdf_real_point(a, params, config)
        return PointResult(p.value * float(pdf_imag(b, params)), p.path, p.terms_used, p.tail_estimate, p.note)
    if which == "polar":
        if a < 0:
            raise ValueError("envelope coordinate must be ≥ 0")
        p = pdf_real_point(a * math.cos(b), params, config)
        val = a * p.value * float(pdf_imag(a * math.sin(b), params))
        return PointResult(val, p.path, p.terms_used, p.tail_estimate, p.note)
    raise ValueError(f"which must be one of {WHICH}, got {which!r}")


def _safe_point(which: str, g, two_d: bool, params: ChannelParams, config: SeriesConfig) -> PointResult:
    try:
        if two_d:
            return _point(which, float(g[0]), float(g[1]), params, config)
        return _point(which, float(g), None, params, config)
    except SeriesError as exc:
        return PointResult(math.nan, "failed", exc.blocks, math.nan, f"{type(exc).__name__}: {exc}")


def curve(which: str, grid, params: ChannelParams, config: SeriesConfig = SeriesConfig()) -> PdfCurve:
    """Evaluate one density on ``grid`` with per-point diagnostics.

    One-dimensional grids must be strictly increasing; ``joint`` and ``polar``
    take an ``(n, 2)`` array of coordinate pairs.  A point whose series fails
    (possible only with ``method="series"``) is recorded with value NaN and
    path ``"failed"``; the error text is kept in ``notes``.  Small negative values left
    by truncation are clamped to zero (the raw values are kept); a value below
    ``-rel_tol`` times the curve maximum raises :class:`CurveError`.
    """
    validate(params)
    if which not in WHICH:
        raise ValueError(f"which must be one of {WHICH}, got {which!r}")
    grid = np.asarray(grid, dtype=float)
    two_d = which in ("joint", "polar")
    if grid.size == 0:
        grid = grid.reshape((0, 2) if two_d else (0,))
    if two_d:
        if grid.ndim != 2 or grid.shape[1] != 2:
            raise ValueError(f"{which} grid must have shape (n, 2)")
    else:
        if grid.ndim != 1:
            raise ValueError("grid must be a 1-D array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid must be finite")
    points = [_safe_point(which, g, two_d, params, config) for g in grid]
    raw = np.array([p.value for p in points], dtype=float)
    finite = raw[np.isfinite(raw)]
    peak = float(np.max(finite)) if finite.size else 0.0
    floor = -config.rel_tol * max(peak, 0.0)
    if np.any(finite < floor) and peak > 0:
        idx = int(np.nanargmin(raw))
        raise CurveError(f"{which} density {raw[idx]:.3g} at grid point {idx} is negative beyond tolerance")
    return PdfCurve(
        which=which,
        grid=grid,
        values=np.where(np.isnan(raw), np.nan, np.maximum(raw, 0.0)),
        params=params,
        config=config,
        terms_used=np.array([p.terms_used for p in points], dtype=int).reshape(-1),
        tail_estimate=np.array([p.tail_estimate for p in points], dtype=float),
        paths=[p.path for p in points],
        raw_values=raw,
        notes=[p.note for p in points],
    )
