"""End-to-end acceptance checks at full sample sizes.

Each test prints one PASS/FAIL line; the lines are collected again in the
terminal summary.  Runtime is several minutes on one core.
"""

import math

import numpy as np
import pytest
from scipy import stats

from condvol import estimators as est
from condvol import samplers
from condvol.statespace import (
    MetricConvention,
    partial_transpose_R,
    qubit_state,
    to_flat_coefficients,
    zs_total_volume,
)
from condvol.streams import SeededStream
from condvol.xstate import (
    x_cond_volume_hs,
    x_is_positive,
    x_is_ppt,
    x_positivity_margin,
    x_ppt_margin,
    x_psep,
    x_to_density,
    x_total_volume_hs,
)

pytestmark = pytest.mark.slow

SEED = 1729


def test_x_conditioned_volume(report):
    rows, ok = [], True
    for i, r in enumerate([0.0, 0.25, 0.5, 0.75]):
        e = est.estimate_x_volume(r, 10**7, MetricConvention.PAPER_UNIFORM, SeededStream(SEED, 100 + i))
        exact = math.pi**2 / 2304 * (1 - r * r) ** 3
        assert exact == pytest.approx(x_cond_volume_hs(r))
        z = (e.value - exact) / e.std_error
        ok &= abs(z) < 3
        rows.append(f"r={r} z={z:+.2f} rel={e.std_error / exact:.2%}")
    report(1, "X-state conditioned volume", ok, "; ".join(rows))


def test_x_total_volume(report):
    e = est.estimate_x_total_volume(10**7, MetricConvention.PAPER_UNIFORM, SeededStream(SEED, 200))
    exact = math.pi**2 / 5040
    assert exact == pytest.approx(x_total_volume_hs())
    z = (e.value - exact) / e.std_error
    report(2, "X-state total volume", abs(z) < 3, f"{e.value:.6e} vs {exact:.6e}, z={z:+.2f}")


def test_x_separability(report):
    rows, ok = [], True
    for i, r in enumerate([0.0, 0.5, 0.9, 0.99]):
        sampler = "cube" if r < 0.95 else "transformed"
        e = est.estimate_x_psep(r, 10**7, SeededStream(SEED, 300 + i), sampler=sampler)
        z = (e.value - 0.4) / e.std_error
        ok &= abs(z) < 3
        rows.append(f"r={r} p={e.value:.4f} z={z:+.2f} (n={e.n_samples}, {sampler})")
    one = est.estimate_x_psep(1.0, 10**7, SeededStream(SEED, 399))
    ok &= one.exact and one.value == 1.0 and x_psep(1.0) == 1.0
    rows.append("r=1 exact 1")
    report(3, "X-state PPT fraction 2/5", ok, "; ".join(rows))


def test_x_oracle_equivalence(report):
    rng = SeededStream(SEED, 400).generator()
    bad = checked = 0
    for _ in range(10):
        pts = rng.uniform(-1, 1, (10**5, 7))
        rho = x_to_density(pts)
        lam = np.linalg.eigvalsh(rho)[:, 0]
        lam_pt = np.linalg.eigvalsh(partial_transpose_R(rho, 2, 2))[:, 0]
        for fast, ref, margin in ((x_is_positive(pts), lam >= 0, x_positivity_margin(pts)),
                                  (x_is_ppt(pts), lam_pt >= 0, x_ppt_margin(pts))):
            keep = np.abs(margin) > 1e-9
            bad += int(np.count_nonzero(fast[keep] != ref[keep]))
            checked += int(keep.sum())
    report(4, "X closed-form tests vs eigenvalues", bad == 0, f"{bad} disagreements in {checked} checks")


def test_two_qubit_volume_at_origin(report):
    target = 3.16241e-5
    e = est.estimate_conditioned_volume(0.0, 2, 10**8, MetricConvention.TRACE_EXACT, SeededStream(SEED, 500))
    rel = e.value / target - 1
    report(5, "two-qubit slice volume at r=0", abs(rel) < 0.05,
           f"{e.value:.5e} +- {e.std_error:.2e} ({rel:+.2%}, {e.n_accepted} accepted of 1e8)")


def test_envelope_exponents(report):
    rows, ok = [], True
    for m in (2, 3, 4):
        h = est.radius_histogram(m, 10**6, 100, SeededStream(SEED, 600 + m))
        slope, err = est.fit_envelope_exponent(h)
        target = 2 * (m * m - 1)
        ok &= abs(slope - target) < 3 * err
        rows.append(f"m={m} fit {slope:.3f} +- {err:.3f} (target {target})")
    report(6, "volume envelope exponents", ok, "; ".join(rows))


def test_two_qubit_psep_flat(report):
    grid = []
    for i, r in enumerate(np.linspace(0.0, 0.99, 21)):
        grid.append((float(r), est.estimate_psep(float(r), 2, 10**5, SeededStream(SEED, 700 + i))))
    chi2, dof, pval = est.flatness_test([e for _, e in grid])
    grid.append((1.0, est.estimate_psep(1.0, 2, 10**5)))
    val, err = est.integrate_psep(grid)
    ok = pval > 0.01 and 0.229 <= val <= 0.256
    report(7, "2x2 p_sep flatness and integral", ok,
           f"chi2={chi2:.1f}/{dof} p={pval:.3f}; P_sep={val:.5f} +- {err:.5f} (8/33={8 / 33:.5f})")


def test_higher_m_probabilities(report):
    rs = [0.0, 0.33, 0.66, 0.99]
    m3 = [est.estimate_psep(r, 3, 10**6, SeededStream(SEED, 800 + i)) for i, r in enumerate(rs)]
    m4 = [est.estimate_psep(r, 4, 25 * 10**5, SeededStream(SEED, 810 + i)) for i, r in enumerate(rs)]
    p3, p4 = est.flatness_test(m3)[2], est.flatness_test(m4)[2]
    ok3 = all(abs(e.value - 0.0270) <= 0.002 for e in m3) and p3 > 0.01
    ok4 = all(abs(e.value - 0.0013) <= 0.0005 for e in m4) and p4 > 0.01
    detail = ("m=3 " + ", ".join(f"{e.value:.4f}" for e in m3) + f" (flat p={p3:.2f}); "
              "m=4 " + ", ".join(f"{e.value:.5f}" for e in m4) + f" (flat p={p4:.2f}, {m4[0].label})")
    report(8, "higher-m p_sep / p_PPT", ok3 and ok4, detail)


def test_sampler_cross_validation(report):
    n = 10**5
    base = samplers.uniform_slice_samples(0.0, n, SeededStream(SEED, 900))
    rows, ok = [], True
    for i, r in enumerate([0.0, 0.5, 0.9]):
        rej = to_flat_coefficients(samplers.transport_slice(base, 0.0, r, 2), 2, 2)
        fib = to_flat_coefficients(
            samplers.sample_conditioned_density(qubit_state([0, 0, r]), 2, SeededStream(SEED, 910 + i), n), 2, 2)
        for name, k in (("b3", 5), ("c33", 14)):
            p = stats.ks_2samp(rej[:, k], fib[:, k]).pvalue
            ok &= p > 0.01
            rows.append(f"r={r} {name} p={p:.3f}")
    report(9, "fiber vs rejection KS", ok, "; ".join(rows))


def test_product_measure_contrast(report):
    binned = est.estimate_psep_product_measure(10**7, 20, SeededStream(SEED, 1000))
    reliable = [e for _, e in binned if e.reliable]
    chi2, dof, pval = est.flatness_test(reliable)
    high = [(rc, e) for rc, e in binned if rc > 0.9]
    flagged = all(e.low_count or not e.reliable for _, e in high)
    rel_err = [e.std_error / e.value if e.value > 0 else math.inf for _, e in high]
    peak = min(e.std_error / e.value for e in reliable if e.value > 0)
    g1 = est.total_hits(binned)
    g2 = est.total_hits(est.estimate_psep_product_measure(10**6, 20, SeededStream(SEED, 1001)))
    p1, p2 = g1[0] / g1[1], g2[0] / g2[1]
    se = math.sqrt(p1 * (1 - p1) / g1[1] + p2 * (1 - p2) / g2[1])
    ok = pval < 0.01 and flagged and abs(p1 - p2) < 3 * se
    report(10, "product-measure contrast", ok,
           f"flatness p={pval:.1e} (chi2={chi2:.0f}/{dof}); r>0.9 bins flagged={flagged} "
           f"(n={[e.n_samples for _, e in high]}, hits={[e.n_hits for _, e in high]}, "
           f"rel.err={[round(x, 3) for x in rel_err]} vs best {peak:.4f}); global {p1:.4f} vs {p2:.4f}")


def test_formula_layer(report):
    a = zs_total_volume(2, 2) * 45045 / (2**9 * math.pi)
    b = est.conjectured_v0(2)
    ok = abs(a / b - 1) < 1e-9 and float(f"{a:.5e}") == 3.16241e-5 == float(f"{b:.5e}")
    report(11, "formula layer", ok, f"ZS route {a:.10e}, Gamma route {b:.10e}")
