import math

import numpy as np
import pytest
from scipy import integrate

from condvol import estimators as est
from condvol.errors import InsufficientBinsError
from condvol.statespace import MetricConvention, zs_total_volume
from condvol.streams import SeededStream
from condvol.xstate import x_cond_volume_hs


def test_volume_estimate_is_deterministic_across_threads(stream):
    a = est.estimate_conditioned_volume(0.1, 2, 300_000, stream=stream, chunk_size=1 << 16, threads=1)
    b = est.estimate_conditioned_volume(0.1, 2, 300_000, stream=stream, chunk_size=1 << 16, threads=3)
    assert a == b and a.dims == 12


def test_x_volume_matches_closed_form(stream):
    e = est.estimate_x_volume(0.4, 400_000, stream=stream)
    assert abs(e.value - x_cond_volume_hs(0.4)) < 4 * e.std_error


def test_x_volume_at_pure_marginal_is_zero(stream):
    assert est.estimate_x_volume(1.0, 10_000, stream=stream).value == 0.0


def test_x_psep_samplers(stream):
    for sampler in ("cube", "transformed"):
        e = est.estimate_x_psep(0.5, 300_000, stream=stream, sampler=sampler)
        assert abs(e.value - 0.4) < 4 * e.std_error
    exact = est.estimate_x_psep(1.0, 10, stream=stream)
    assert exact.exact and exact.value == 1.0


def test_psep_exact_endpoint_and_labels(stream):
    e = est.estimate_psep(1.0, 3, 100, stream=stream)
    assert e.exact and e.value == 1.0 and e.n_samples == 0 and not e.low_count
    assert est.estimate_psep(0.2, 3, 1000, stream=stream).label == est.SEPARABLE
    assert est.estimate_psep(0.2, 4, 1000, stream=stream).label == est.PPT


def test_low_count_flag(stream):
    e = est.estimate_psep(0.2, 4, 2000, stream=stream)
    assert e.n_hits < 10 and e.low_count


def test_probability_convention_independence(stream):
    # probabilities are ratios of counts, so the metric only rescales volumes
    a = est.estimate_conditioned_volume(0.0, 2, 200_000, MetricConvention.PAPER_UNIFORM, stream)
    b = est.estimate_conditioned_volume(0.0, 2, 200_000, MetricConvention.TRACE_EXACT, stream)
    assert a.n_accepted == b.n_accepted
    assert a.value / a.std_error == pytest.approx(b.value / b.std_error)


def test_std_error_scaling():
    ratios = []
    for seed in range(10):
        s = SeededStream(seed)
        e1 = est.estimate_psep(0.3, 2, 20_000, stream=s)
        e2 = est.estimate_psep(0.3, 2, 40_000, stream=s.spawn(99))
        ratios.append(e1.std_error / e2.std_error)
    assert np.mean(ratios) == pytest.approx(math.sqrt(2), rel=0.1)


def test_flatness_test():
    flat = [est.ProbabilityEstimate.from_counts(400 + d, 1000, 0.1 * i, "separable")
            for i, d in enumerate([3, -5, 10, -8, 0])]
    chi2, dof, p = est.flatness_test(flat)
    assert dof == 4 and p > 0.5
    steep = [est.ProbabilityEstimate.from_counts(300 + 50 * i, 1000, 0.1 * i, "separable") for i in range(5)]
    assert est.flatness_test(steep)[2] < 1e-6
    with pytest.raises(ValueError):
        est.flatness_test(steep[:1])


def test_integrate_constant_grid():
    grid = [(r, est.ProbabilityEstimate(0.4, 0.01, 100, 40, r, "separable")) for r in np.linspace(0, 0.99, 21)]
    grid.append((1.0, est.ProbabilityEstimate(1.0, 0.0, 0, 0, 1.0, "separable", exact=True)))
    val, err = est.integrate_psep(grid)
    assert val == pytest.approx(0.4)
    assert 0 < err < 0.01


def test_integrate_linear_grid_is_trapezoid():
    rs = np.linspace(0, 0.5, 6)
    grid = [(r, est.ProbabilityEstimate(r, 0.0, 10, 1, r, "x")) for r in rs]
    val, _ = est.integrate_psep(grid)
    assert val == pytest.approx(0.125 + 0.5 * 0.5)


def test_integrate_rejects_bad_grids():
    e = est.ProbabilityEstimate(0.4, 0.01, 100, 40, 0.0, "separable")
    with pytest.raises(ValueError):
        est.integrate_psep([])
    with pytest.raises(ValueError):
        est.integrate_psep([(0.5, e), (0.0, e)])


def test_conjectured_v0_two_qubits():
    assert est.conjectured_v0(2) == pytest.approx(3.16241e-5, abs=5e-11)
    assert est.conjectured_v0(2) == pytest.approx(zs_total_volume(2, 2) * 45045 / (2**9 * math.pi), rel=1e-12)
    assert est.conjectured_volume(1.0, 3) == 0.0


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_conjecture_integrates_to_total_volume(m):
    p = est.envelope_exponent(m)
    radial, _ = integrate.quad(lambda r: 4 * math.pi * r * r * (1 - r * r) ** p, 0, 1)
    lhs = math.log(radial) + est.log_conjectured_v0(m) - 1.5 * math.log(2 * m)
    from condvol.statespace import log_zs_total_volume

    assert lhs == pytest.approx(log_zs_total_volume(2, m), rel=1e-10)


def test_conjectured_volume_conventions():
    pu = est.conjectured_volume(0.0, 2, MetricConvention.PAPER_UNIFORM)
    te = est.conjectured_volume(0.0, 2, MetricConvention.TRACE_EXACT)
    assert pu / te == pytest.approx((math.sqrt(2) / 4 / 0.5) ** 12)
    assert np.allclose(est.conjectured_volume(np.array([0.0, 0.5]), 2), te * np.array([1, 0.75**6]))


def test_radius_cdf_matches_quadrature():
    p = 6
    norm, _ = integrate.quad(lambda r: r * r * (1 - r * r) ** p, 0, 1)
    part, _ = integrate.quad(lambda r: r * r * (1 - r * r) ** p, 0, 0.4)
    assert est.radius_cdf(0.4, p) == pytest.approx(part / norm)


def _synthetic_hist(p, n=10**7, bins=100, m=2):
    edges = np.linspace(0, 1, bins + 1)
    expected = n * np.diff(est.radius_cdf(edges, p))
    return est.RadiusHistogram(edges, np.round(expected).astype(np.int64), expected, m, float(p))


@pytest.mark.parametrize("p", [6, 16, 30])
def test_fit_recovers_exponent_from_exact_counts(p):
    slope, err = est.fit_envelope_exponent(_synthetic_hist(p))
    assert abs(slope - p) < 2 * err + 0.02 * p


def test_fit_needs_bins():
    h = _synthetic_hist(30, n=200)
    with pytest.raises(InsufficientBinsError):
        est.fit_envelope_exponent(h)


def test_radius_histogram_small_run(stream):
    h = est.radius_histogram(2, 100_000, 50, stream)
    assert h.n_samples == 100_000 and h.exponent == 6
    assert est.envelope_chi2(h)[2] > 1e-4
    slope, err = est.fit_envelope_exponent(h)
    assert abs(slope - 6) < 4 * err


def test_product_measure_flags_sparse_bins(stream):
    binned = est.estimate_psep_product_measure(50_000, 20, stream)
    assert len(binned) == 20
    assert sum(e.n_samples for _, e in binned) == 50_000
    for rc, e in binned:
        assert e.reliable == (e.n_samples >= 100)
    assert not binned[-1][1].reliable
