"""Tabulated envelope/phase densities and quadrature CDFs."""
import math

import numpy as np
import pytest
from scipy.special import ndtr

from ris_stats.channel import ChannelParams
from ris_stats.laws import real_part_density
from ris_stats.marginals import cdf_from_pdf, envelope_table, phase_table, real_cdf
from ris_stats.pdfs import pdf_envelope_numeric, pdf_phase_numeric

UNIT = ChannelParams(5, 1, 1)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.0, 3.5, 6.0])
def test_envelope_table_matches_adaptive_quadrature(r):
    assert envelope_table(UNIT)(r) == pytest.approx(pdf_envelope_numeric(r, UNIT), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.4, -1.0, 2.5, math.pi])
def test_phase_table_matches_adaptive_quadrature(theta):
    assert phase_table(UNIT)(theta) == pytest.approx(pdf_phase_numeric(theta, UNIT), rel=1e-6, abs=1e-12)


def test_table_cdfs_are_monotone_and_normalised():
    env = envelope_table(UNIT)
    r = np.linspace(0, env.r_max, 400)
    c = env.cdf(r)
    assert c[0] == 0.0
    assert np.all(np.diff(c) >= -1e-12)
    assert c[-1] == pytest.approx(1.0, abs=1e-6)
    ph = phase_table(UNIT)
    t = np.linspace(-math.pi, math.pi, 401)
    c = ph.cdf(t) - ph.cdf(-math.pi)
    assert np.all(np.diff(c) >= -1e-12)
    assert c[-1] == pytest.approx(1.0, abs=1e-6)
    assert c[200] == pytest.approx(0.5, abs=1e-6)  # even density


def test_table_vanishes_outside_range():
    assert envelope_table(UNIT)(-1.0) == 0.0
    assert envelope_table(UNIT)(1e3) == 0.0


def test_real_cdf_normalised():
    dens = real_part_density(UNIT)
    f = real_cdf(dens)
    assert f(dens.lo - 1) == pytest.approx(0.0, abs=1e-12)
    assert f(dens.hi + 1) == pytest.approx(1.0, abs=1e-6)


def test_cdf_from_pdf_reproduces_gaussian_cdf():
    pdf = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    f = cdf_from_pdf(pdf, -9.0, 9.0)
    x = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(f(x), ndtr(x), atol=1e-8)
    assert np.all(np.diff(f(np.linspace(-9, 9, 2001))) >= 0)
