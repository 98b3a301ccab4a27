"""Monte Carlo sampler and empirical estimators."""
import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gammaln, ndtr
from scipy.stats import ks_1samp

from ris_stats.channel import ChannelParams, InvalidParameterError
from ris_stats.marginals import envelope_table
from ris_stats.montecarlo import (
    RAW_MAGIC,
    RNG_NAME,
    ResourceError,
    SampleBatch,
    default_workers,
    density_from_counts,
    ecdf,
    histogram,
    histogram_from_raw,
    read_raw,
    sample_composite,
    sample_nakagami_envelope,
    stream_composite,
)

UNIT = ChannelParams(5, 1, 1)


def _within_se(samples, expected, k=4.0):
    se = np.std(samples) / math.sqrt(samples.size)
    return abs(np.mean(samples) - expected) <= k * se


# -- Nakagami sampler -------------------------------------------------------------


def test_rayleigh_squares_are_exponential():
    x = sample_nakagami_envelope(1, 1.7, 1_000_000, np.random.default_rng(1))
    assert _within_se(x**2, 1.7)


def test_nakagami_second_moment_is_omega():
    x = sample_nakagami_envelope(3, 2.0, 1_000_000, np.random.default_rng(2))
    assert _within_se(x**2, 2.0)


@pytest.mark.parametrize("nu", [1, 3])
@pytest.mark.parametrize("m, omega", [(1, 1.0), (2, 0.5), (3, 2.0)])
def test_nakagami_moments(m, omega, nu):
    x = sample_nakagami_envelope(m, omega, 1_000_000, np.random.default_rng(10 * m + nu))
    expected = (omega / m) ** (nu / 2) * math.exp(gammaln(m + nu / 2) - gammaln(m))
    # independent oracle: integrate the Nakagami density directly
    pdf = lambda r: 2 * m**m / (math.gamma(m) * omega**m) * r ** (2 * m - 1) * math.exp(-m * r * r / omega)
    assert quad(lambda r: r**nu * pdf(r), 0, 30)[0] == pytest.approx(expected, rel=1e-9)
    assert _within_se(x**nu, expected)


@pytest.mark.parametrize("m, scale", [(1, 1.0), (2, 0.5), (3, 2.0), (5, 0.2)])
def test_gamma_sampler_mean_and_variance(m, scale):
    g = np.random.default_rng(m).gamma(m, scale, size=1_000_000)
    assert _within_se(g, m * scale)
    centred = (g - m * scale) ** 2
    assert _within_se(centred, m * scale**2)


@pytest.mark.parametrize("m, omega", [(0, 1.0), (1.5, 1.0), (1, 0.0)])
def test_nakagami_sampler_rejects_bad_parameters(m, omega):
    with pytest.raises(ValueError):
        sample_nakagami_envelope(m, omega, 10, np.random.default_rng(0))


# -- composite sampler ---------------------------------------------------------------


@pytest.fixture(scope="module")
def batch():
    return sample_composite(UNIT, 1_000_000, seed=7, workers=4)


def test_imag_variance(batch):
    assert _within_se(batch.im**2, UNIT.sigma_h_sq / 2)
    assert _within_se(batch.im, 0.0)


def test_real_mean_is_sum_of_product_means(batch):
    mean_a = math.sqrt(1 / 1) * math.gamma(1.5) / math.gamma(1)
    assert _within_se(batch.re, UNIT.n_elements * mean_a * mean_a)


def test_zero_elements_forbidden():
    with pytest.raises(InvalidParameterError):
        sample_composite(ChannelParams(0, 1, 1), 10, seed=1)


def test_batch_shape_and_accessors(batch):
    assert batch.count == len(batch) == 1_000_000
    first = batch[0]
    assert (first.re, first.im) == (batch.re[0], batch.im[0])
    assert next(iter(batch.samples)) == first
    with pytest.raises(ValueError):
        batch.re[0] = 0.0


def test_deterministic_for_fixed_workers():
    a = sample_composite(UNIT, 50_000, seed=3, workers=3)
    b = sample_composite(UNIT, 50_000, seed=3, workers=3, threads=1)
    assert a.re.tobytes() == b.re.tobytes() and a.im.tobytes() == b.im.tobytes()


def test_different_seeds_differ():
    a = sample_composite(UNIT, 1000, seed=3, workers=1)
    b = sample_composite(UNIT, 1000, seed=4, workers=1)
    assert not np.array_equal(a.re, b.re)


def test_worker_count_gives_statistically_equivalent_batches():
    single = sample_composite(UNIT, 1_000_000, seed=11, workers=1)
    multi = sample_composite(UNIT, 1_000_000, seed=11, workers=8)
    assert not np.array_equal(single.re, multi.re)
    edges = np.linspace(-1.0, 9.0, 41)
    h1, _ = np.histogram(single.re, edges)
    h8, _ = np.histogram(multi.re, edges)
    n = single.count
    p1, p8 = h1 / n, h8 / n
    se = np.sqrt((p1 * (1 - p1) + p8 * (1 - p8)) / n)
    mask = se > 0
    assert np.all(np.abs(p1 - p8)[mask] <= 4 * se[mask])


def test_environment_sets_default_workers(monkeypatch):
    monkeypatch.setenv("RIS_STATS_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("RIS_STATS_THREADS", "0")
    with pytest.raises(ValueError):
        default_workers()


def test_memory_budget_enforced():
    with pytest.raises(ResourceError):
        sample_composite(UNIT, 1000, seed=1, memory_budget=1000)


def test_summary_json(batch):
    data = json.loads(batch.to_json())
    assert data["seed"] == 7 and data["count"] == 1_000_000 and data["rng"] == RNG_NAME
    assert data["params"] == UNIT.to_dict()
    assert set(data["projection_moments"]) == {"real", "imag", "magnitude", "phase"}


# -- raw stream --------------------------------------------------------------------


def test_raw_round_trip(tmp_path):
    b = sample_composite(UNIT, 10_000, seed=5, workers=2)
    path = tmp_path / "s.bin"
    b.write_raw(path)
    raw = path.read_bytes()
    assert raw[:8] == RAW_MAGIC
    re, im = read_raw(path)
    np.testing.assert_array_equal(re, b.re)
    np.testing.assert_array_equal(im, b.im)
    # little-endian (re, im) pairs after a 16-byte header
    first = np.frombuffer(raw[16:32], dtype="<f8")
    assert tuple(first) == (b.re[0], b.im[0])


def test_streaming_matches_in_memory(tmp_path):
    b = sample_composite(UNIT, 20_000, seed=9, workers=2)
    b.write_raw(tmp_path / "a.bin")
    stream_composite(UNIT, 20_000, 9, tmp_path / "b.bin", workers=2)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_histogram_from_raw_is_normalised(tmp_path):
    stream_composite(UNIT, 100_000, 2, tmp_path / "s.bin", workers=2)
    h = histogram_from_raw(tmp_path / "s.bin", "magnitude")
    assert h.mass == pytest.approx(1.0, abs=1e-12)
    assert h.count == 100_000


def test_read_raw_rejects_foreign_files(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOTRIGHT" + bytes(8))
    with pytest.raises(ValueError):
        read_raw(tmp_path / "x.bin")


# -- histograms --------------------------------------------------------------------


@pytest.mark.parametrize("projection", ["real", "imag", "magnitude", "phase"])
def test_histogram_mass_is_one(batch, projection):
    h = histogram(batch, projection)
    assert abs(h.mass - 1.0) <= 1e-12
    assert h.densities.size == h.bin_edges.size - 1 == h.std_errors.size
    assert np.all(h.densities >= 0) and np.all(h.std_errors >= 0)


def test_phase_projection_in_principal_range(batch):
    x = batch.project("phase")
    assert x.min() > -math.pi and x.max() <= math.pi


def test_histogram_bins():
    b = sample_composite(UNIT, 1000, seed=1, workers=1)
    assert histogram(b, "real", bins=25).densities.size == 25
    with pytest.raises(ValueError):
        histogram(b, "real", bins=5)


def test_histogram_rejects_degenerate_range():
    b = SampleBatch(np.ones(10), np.zeros(10), UNIT, 0, 1)
    with pytest.raises(ValueError):
        histogram(b, "real")


def test_empirical_density_csv(batch):
    h = histogram(batch, "real", bins=20)
    body = [l for l in h.to_csv().splitlines() if not l.startswith("#")]
    assert body[0] == "bin_left,bin_right,density,std_error"
    assert len(body) == 21


def test_density_from_counts_standard_error():
    h = density_from_counts(np.array([25, 75]), np.array([0.0, 0.5, 1.0]))
    np.testing.assert_allclose(h.densities, [0.5, 1.5])
    np.testing.assert_allclose(h.std_errors, [math.sqrt(0.25 * 0.75 / 100) / 0.5] * 2)


def test_magnitude_mean_matches_phase_aligned_envelope_law(batch):
    # the sampler follows the phase-aligned model, so its envelope law is the oracle
    tab = envelope_table(UNIT, "exact")
    mean, _ = quad(lambda r: r * float(tab(r)), 0, tab.r_max, limit=400)
    assert _within_se(batch.project("magnitude"), mean)


def test_magnitude_mean_differs_from_closed_form_moment_law(batch):
    tab = envelope_table(UNIT, "paper")
    mean, _ = quad(lambda r: r * float(tab(r)), 0, tab.r_max, limit=400)
    assert not _within_se(batch.project("magnitude"), mean)


# -- ECDF ---------------------------------------------------------------------------


def test_ecdf_limits(batch):
    f = ecdf(batch, "real")
    assert f(batch.re.max()) == 1.0
    assert f(batch.re.min() - 1.0) == 0.0


def test_ecdf_is_right_continuous():
    b = SampleBatch(np.array([0.0, 1.0, 1.0, 2.0]), np.zeros(4), UNIT, 0, 1)
    f = ecdf(b, "real")
    assert f(1.0) == 0.75 and f(0.999) == 0.25


def test_ecdf_of_gaussian_projection_within_ks_bound(batch):
    s = math.sqrt(UNIT.sigma_h_sq / 2)
    f = ecdf(batch, "imag")
    x = f.x
    d = max(np.max(np.arange(1, x.size + 1) / x.size - ndtr(x / s)), np.max(ndtr(x / s) - np.arange(x.size) / x.size))
    assert d < 1.63 / math.sqrt(x.size)
    assert ks_1samp(batch.im, lambda y: ndtr(y / s)).statistic == pytest.approx(d, rel=1e-9)
