"""Agreement metrics and audits."""
import json
import math

import numpy as np
import pytest
from scipy.interpolate import interp1d
from scipy.special import ndtr

from ris_stats.channel import ChannelParams
from ris_stats.laws import real_part_density
from ris_stats.montecarlo import SampleBatch, density_from_counts, histogram, sample_composite
from ris_stats.pdfs import curve
from ris_stats.series import SeriesConfig
from ris_stats.validation import (
    GridMismatchError,
    analytic_bin_masses,
    analytic_cdf,
    bin_masses_from_curve,
    gamma_reading_audit,
    ks_critical,
    ks_statistic,
    normalization_audit,
    sup_norm_report,
)

UNIT = ChannelParams(5, 1, 1)


def _inverse_cdf_samples(params, n, seed, shift=0.0):
    """Draw from the analytic real-part law itself by inverting its CDF."""
    dens = real_part_density(params)
    grid = np.linspace(dens.lo, dens.hi, 20001)
    cdf = analytic_cdf("real", params)(grid)
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    inv = interp1d(cdf[keep], grid[keep], kind="cubic")
    u = np.random.default_rng(seed).uniform(cdf[keep][0], cdf[keep][-1], n)
    x = inv(u) + shift
    return SampleBatch(x, np.zeros(n), params, seed, 1)


@pytest.fixture(scope="module")
def self_batch():
    return _inverse_cdf_samples(UNIT, 1_000_000, 3)


@pytest.fixture(scope="module")
def real_curve():
    dens = real_part_density(UNIT)
    return curve("real", np.linspace(dens.lo, dens.hi, 801), UNIT, SeriesConfig(method="quadrature"))


def test_self_sampling_passes(self_batch, real_curve):
    rep = sup_norm_report(real_curve, histogram(self_batch, "real"))
    assert rep.passed, rep.statistic
    assert rep.statistic <= 5.0
    assert rep.metric == "studentized_sup_norm"
    assert not rep.warnings


def test_shifted_samples_fail(real_curve):
    shifted = _inverse_cdf_samples(UNIT, 1_000_000, 4, shift=0.5)
    edges = np.linspace(real_curve.grid[0], real_curve.grid[-1], 121)
    counts, _ = np.histogram(shifted.re, edges)
    rep = sup_norm_report(real_curve, density_from_counts(counts, edges, "real"))
    assert not rep.passed
    assert rep.statistic > 50


def test_report_fields_and_json(self_batch, real_curve):
    emp = histogram(self_batch, "real")
    rep = sup_norm_report(real_curve, emp)
    assert len(rep.per_bin_diff) == len(rep.per_bin_se) == emp.densities.size
    data = json.loads(rep.to_json())
    assert data["threshold"] == 5.0
    assert data["provenance"]["seed"] == 3
    assert data["provenance"]["curve"]["params"] == UNIT.to_dict()


def test_bin_masses_from_curve_match_cdf(real_curve):
    edges = np.linspace(-0.5, 8.0, 30)
    np.testing.assert_allclose(
        bin_masses_from_curve(real_curve, edges), analytic_bin_masses("real", edges, UNIT), atol=1e-8
    )


def test_curve_must_cover_bins():
    c = curve("real", np.linspace(0.0, 1.0, 11), UNIT)
    emp = density_from_counts(np.ones(10, dtype=int), np.linspace(-5.0, 5.0, 11))
    with pytest.raises(GridMismatchError):
        sup_norm_report(c, emp)


def test_two_dimensional_curve_rejected():
    c = curve("polar", np.array([[1.0, 0.0], [2.0, 0.0]]), UNIT)
    emp = density_from_counts(np.ones(10, dtype=int), np.linspace(0.0, 1.0, 11))
    with pytest.raises(GridMismatchError):
        sup_norm_report(c, emp)


def test_low_count_warns(real_curve):
    small = _inverse_cdf_samples(UNIT, 1000, 5)
    rep = sup_norm_report(real_curve, histogram(small, "real"))
    assert rep.warnings and "too wide" in rep.warnings[0]


# -- KS ---------------------------------------------------------------------------


def test_ks_critical_value():
    assert ks_critical(10_000) == pytest.approx(0.0163)


def test_ks_self_sampling_below_critical(self_batch):
    d = ks_statistic(analytic_cdf("real", UNIT), self_batch, "real")
    assert d < ks_critical(self_batch.count)


def test_ks_uniform_vs_gaussian_is_large():
    n = 10_000
    u = np.random.default_rng(0).uniform(0, 1, n)
    b = SampleBatch(u, np.zeros(n), UNIT, 0, 1)
    # at x = 0 the Gaussian CDF is 1/2 while the uniform ECDF is 0
    assert ks_statistic(ndtr, b, "real") > 0.3


def test_ks_imag_projection_of_sampler():
    b = sample_composite(UNIT, 200_000, seed=1, workers=2)
    assert ks_statistic(analytic_cdf("imag", UNIT), b, "imag") < ks_critical(b.count)


def test_analytic_cdf_rejects_unknown_projection():
    with pytest.raises(ValueError):
        analytic_cdf("joint", UNIT)


# -- audits -------------------------------------------------------------------------


def test_normalization_audit_reference_point():
    rep = normalization_audit(UNIT)
    ints = rep["integrals"]
    assert ints["imag"]["deviation"] <= 1e-10
    for which in ("real", "envelope", "phase"):
        assert ints[which]["deviation"] <= 1e-4, (which, ints[which])
        assert not ints[which]["flagged"]
    assert rep["passed"]
    assert rep["params"] == UNIT.to_dict()


def test_gamma_reading_audit_picks_single_gamma():
    rep = gamma_reading_audit(ChannelParams(5, 2, 3))
    assert rep["single"]["passed"]
    assert not rep["per_element"]["passed"]
    assert rep["per_element"]["flagged"]
