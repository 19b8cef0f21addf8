"""Monte-Carlo estimates of conditioned volumes and separability probabilities.

Work is split into chunks (see :mod:`condvol.streams`); every reduction is
an integer count, so an estimate is a deterministic function of
``(seed, stream_id, chunk_size, n_samples)`` whatever the thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from condvol import samplers
from condvol.errors import InsufficientBinsError
from condvol.statespace import (
    POSITIVITY_TOL,
    MetricConvention,
    bloch_vector,
    euclid_to_hs_factor,
    log_zs_total_volume,
    partial_trace_R,
    partial_transpose_R,
    psd_mask,
    qubit_state,
)
from condvol.streams import DEFAULT_CHUNK, SeededStream, run_chunked
from condvol.xstate import X_SLICE_KINDS, x_is_positive, x_is_ppt

SEPARABLE = "separable"
PPT = "positive-partial-transpose"
LOW_COUNT = 10


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    n_samples: int
    n_accepted: int
    convention: MetricConvention
    dims: int
    r: float

    @classmethod
    def from_counts(cls, n_accepted, n_samples, box_volume, factor, convention, dims, r):
        p = n_accepted / n_samples if n_samples else 0.0
        scale = box_volume * factor
        err = scale * math.sqrt(p * (1.0 - p) / n_samples) if n_samples else 0.0
        return cls(p * scale, err, int(n_samples), int(n_accepted), convention, int(dims), float(r))


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    std_error: float
    n_samples: int
    n_hits: int
    r: float
    label: str
    exact: bool = False
    reliable: bool = True

    @classmethod
    def from_counts(cls, n_hits, n_samples, r, label, **kw):
        if n_samples == 0:
            return cls(float("nan"), float("nan"), 0, 0, float(r), label, reliable=False, **kw)
        p = n_hits / n_samples
        return cls(p, math.sqrt(p * (1.0 - p) / n_samples), int(n_samples), int(n_hits), float(r), label, **kw)

    @property
    def low_count(self) -> bool:
        return not self.exact and self.n_hits < LOW_COUNT


@dataclass(frozen=True)
class RadiusHistogram:
    """Bloch-radius histogram with the expected counts of ``r^2 (1-r^2)^exponent``."""

    bin_edges: np.ndarray
    counts: np.ndarray
    envelope: np.ndarray
    m: int
    exponent: float = field(default=float("nan"))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


def label_for(m: int) -> str:
    return SEPARABLE if m <= 3 else PPT


def _check_r(r):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")


def _sum_counts(results):
    return tuple(int(sum(col)) for col in zip(*results)) if results else ()


# conditioned volumes -------------------------------------------------------

def slice_kinds(m: int) -> list[str]:
    return ["b"] * (m * m - 1) + ["c"] * (3 * (m * m - 1))


def estimate_conditioned_volume(r: float, m: int, n_samples: int, convention=MetricConvention.TRACE_EXACT,
                                stream: SeededStream | None = None, tol: float = POSITIVITY_TOL,
                                chunk_size: int = DEFAULT_CHUNK, threads: int | None = None) -> VolumeEstimate:
    """Cube-rejection estimate of the Hilbert-Schmidt volume of the slice ``a = (0, 0, r)``."""
    _check_r(r)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    convention = MetricConvention.parse(convention)
    stream = stream or SeededStream(0)
    kinds = slice_kinds(m)

    def work(size, sub):
        return (samplers.count_conditioned_accepts(r, m, size, sub, tol),)

    (hits,) = _sum_counts(run_chunked(work, n_samples, stream, chunk_size, threads))
    factor = euclid_to_hs_factor(2, m, kinds, convention)
    return VolumeEstimate.from_counts(hits, n_samples, 2.0 ** len(kinds), factor, convention, len(kinds), r)


def estimate_x_volume(r: float, n_samples: int, convention=MetricConvention.PAPER_UNIFORM,
                      stream: SeededStream | None = None, chunk_size: int = DEFAULT_CHUNK,
                      threads: int | None = None) -> VolumeEstimate:
    """Six-dimensional cube rejection for the conditioned X slice."""
    _check_r(r)
    convention = MetricConvention.parse(convention)
    stream = stream or SeededStream(0)

    def work(size, sub):
        acc, _ = samplers.rejection_sample_x(r, sub, size)
        return (int(np.count_nonzero(acc)),)

    (hits,) = _sum_counts(run_chunked(work, n_samples, stream, chunk_size, threads))
    factor = euclid_to_hs_factor(2, 2, X_SLICE_KINDS, convention)
    return VolumeEstimate.from_counts(hits, n_samples, 64.0, factor, convention, 6, r)


def estimate_x_total_volume(n_samples: int, convention=MetricConvention.PAPER_UNIFORM,
                            stream: SeededStream | None = None, chunk_size: int = DEFAULT_CHUNK,
                            threads: int | None = None) -> VolumeEstimate:
    """Seven-dimensional rejection with ``a3 ~ U[0, 1]``: estimates ``int_0^1 V_X(r) dr``.

    The radius enters as a bare integration variable; only the six slice
    coordinates carry metric weights.
    """
    convention = MetricConvention.parse(convention)
    stream = stream or SeededStream(0)

    def work(size, sub):
        rng = sub.generator()
        xc = rng.random((size, 7))
        xc[:, 1:] *= 2.0
        xc[:, 1:] -= 1.0
        return (int(np.count_nonzero(x_is_positive(xc))),)

    (hits,) = _sum_counts(run_chunked(work, n_samples, stream, chunk_size, threads))
    factor = euclid_to_hs_factor(2, 2, X_SLICE_KINDS, convention)
    return VolumeEstimate.from_counts(hits, n_samples, 64.0, factor, convention, 7, float("nan"))


def estimate_x_psep(r: float, n_samples: int, stream: SeededStream | None = None, sampler: str = "cube",
                    chunk_size: int = DEFAULT_CHUNK, threads: int | None = None) -> ProbabilityEstimate:
    """PPT fraction among accepted X-state proposals.

    ``sampler`` is ``"cube"`` (a3 fixed, six coordinates in ``[-1,1]``) or
    ``"transformed"`` (rejection in the disc-product frame).  ``n_samples``
    counts proposals; the estimate's ``n_samples`` is the accepted count.
    """
    _check_r(r)
    if r == 1.0:
        return ProbabilityEstimate(1.0, 0.0, 0, 0, 1.0, SEPARABLE, exact=True)
    draw = {"cube": samplers.rejection_sample_x, "transformed": samplers.rejection_sample_x_transformed}[sampler]
    stream = stream or SeededStream(0)

    def work(size, sub):
        acc, xc = draw(r, sub, size)
        return int(np.count_nonzero(acc)), int(np.count_nonzero(x_is_ppt(xc[acc])))

    n_acc, n_ppt = _sum_counts(run_chunked(work, n_samples, stream, chunk_size, threads))
    return ProbabilityEstimate.from_counts(n_ppt, n_acc, r, SEPARABLE)


# separability on the fiber -------------------------------------------------

def ppt_mask(rho, m: int, tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Positivity of the environment partial transpose for a stack of ``2m x 2m`` states."""
    return psd_mask(partial_transpose_R(rho, 2, m), tol)


def estimate_psep(r: float, m: int, n_samples: int, stream: SeededStream | None = None,
                  tol: float = POSITIVITY_TOL, chunk_size: int = 1 << 15,
                  threads: int | None = None) -> ProbabilityEstimate:
    """PPT probability on the conditioned space with reduced Bloch vector ``(0, 0, r)``.

    For ``m <= 3`` this is the separability probability.  At ``r = 1`` every
    compatible state is a product, so the exact value 1 is returned without
    sampling.
    """
    _check_r(r)
    label = label_for(m)
    if r == 1.0:
        return ProbabilityEstimate(1.0, 0.0, 0, 0, 1.0, label, exact=True)
    eta = qubit_state([0.0, 0.0, r])
    stream = stream or SeededStream(0)

    def work(size, sub):
        rho = samplers.sample_conditioned_density(eta, m, sub, size)
        return (int(np.count_nonzero(ppt_mask(rho, m, tol))),)

    (hits,) = _sum_counts(run_chunked(work, n_samples, stream, chunk_size, threads))
    return ProbabilityEstimate.from_counts(hits, n_samples, r, label)


def flatness_test(estimates) -> tuple[float, int, float]:
    """Chi-square test that all sampled proportions share one value.

    Uses the pooled proportion for every variance.  Exact (unsampled)
    estimates are skipped.  Returns ``(chi2, dof, p_value)``.
    """
    est = [e for e in estimates if not e.exact and e.n_samples > 0]
    if len(est) < 2:
        raise ValueError("need at least two sampled estimates")
    n = np.array([e.n_samples for e in est], dtype=float)
    k = np.array([e.n_hits for e in est], dtype=float)
    pool = k.sum() / n.sum()
    if pool in (0.0, 1.0):
        return 0.0, len(est) - 1, 1.0
    chi2 = float(np.sum((k - n * pool) ** 2 / (n * pool * (1.0 - pool))))
    dof = len(est) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def integrate_psep(grid) -> tuple[float, float]:
    """Trapezoidal ``int_0^1 p(r) dr`` from ``[(r, ProbabilityEstimate), ...]``.

    The value at the last sampled radius is held constant up to ``r = 1``;
    the exact endpoint ``p(1) = 1`` has measure zero and is ignored.
    Errors are propagated in quadrature.
    """
    pts = [(float(r), e) for r, e in grid if not e.exact]
    if not pts:
        raise ValueError("empty grid")
    rs = np.array([r for r, _ in pts])
    if np.any(np.diff(rs) <= 0):
        raise ValueError("grid must be strictly increasing in r")
    if rs[0] != 0.0 or rs[-1] >= 1.0:
        raise ValueError("grid must start at r = 0 and stay below r = 1")
    p = np.array([e.value for _, e in pts])
    s = np.array([e.std_error for _, e in pts])
    w = np.zeros(len(rs))
    if len(rs) > 1:
        h = np.diff(rs)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
    w[-1] += 1.0 - rs[-1]
    return float(w @ p), float(np.sqrt(np.sum((w * s) ** 2)))


# radial profile ------------------------------------------------------------

def envelope_exponent(m: int) -> int:
    return 2 * (m * m - 1)


def radius_cdf(r, exponent: float):
    """CDF of the radius for density proportional to ``r^2 (1 - r^2)^exponent`` on ``[0, 1]``."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return special.betainc(1.5, exponent + 1.0, r * r)


def sample_bloch_radii(m: int, size: int, stream) -> np.ndarray:
    """Bloch radii of ``Tr_R rho`` for Hilbert-Schmidt uniform ``2m x 2m`` states."""
    rho = samplers.sample_hs_density(2 * m, stream, size)
    return np.linalg.norm(bloch_vector(partial_trace_R(rho, 2, m)), axis=-1)


def radius_histogram(m: int, n_samples: int, n_bins: int = 100, stream: SeededStream | None = None,
                     chunk_size: int = 1 << 15, threads: int | None = None) -> RadiusHistogram:
    if n_bins < 10:
        raise ValueError("n_bins must be >= 10")
    stream = stream or SeededStream(0)
    edges = np.linspace(0.0, 1.0, n_bins + 1)

    def work(size, sub):
        r = sample_bloch_radii(m, size, sub)
        return np.histogram(np.clip(r, 0.0, 1.0), bins=edges)[0]

    counts = np.sum(run_chunked(work, n_samples, stream, chunk_size, threads), axis=0).astype(np.int64)
    p = envelope_exponent(m)
    envelope = n_samples * np.diff(radius_cdf(edges, p))
    return RadiusHistogram(edges, counts, envelope, m, float(p))


def fit_envelope_exponent(hist: RadiusHistogram, r_max: float = 0.9, min_count: int = 10) -> tuple[float, float]:
    """Weighted least-squares slope of ``log(count / 4 pi r_c^2)`` against ``log(1 - r_c^2)``.

    Bins entirely below ``r_max`` with at least ``min_count`` entries are
    used; weights are the counts (Poisson variance of the log count).
    """
    lo, hi = hist.bin_edges[:-1], hist.bin_edges[1:]
    rc = 0.5 * (lo + hi)
    use = (hi <= r_max + 1e-12) & (hist.counts >= max(min_count, 1)) & (rc > 0)
    if np.count_nonzero(use) < 10:
        raise InsufficientBinsError(f"only {np.count_nonzero(use)} usable bins below r = {r_max}")
    c = hist.counts[use].astype(float)
    y = np.log(c / (4.0 * math.pi * rc[use] ** 2))
    x = np.log1p(-rc[use] ** 2)
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (c[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (c * y))
    cov = np.linalg.inv(A)
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def envelope_chi2(hist: RadiusHistogram, min_expected: float = 5.0) -> tuple[float, int, float]:
    """Pearson test of the counts against the envelope; sparse bins are pooled."""
    E, O = hist.envelope, hist.counts.astype(float)
    keep = E >= min_expected
    e = np.append(E[keep], E[~keep].sum())
    o = np.append(O[keep], O[~keep].sum())
    if e[-1] < min_expected:
        e[-2] += e[-1]
        o[-2] += o[-1]
        e, o = e[:-1], o[:-1]
    chi2 = float(np.sum((o - e) ** 2 / e))
    dof = len(e) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def log_conjectured_v0(m: int) -> float:
    """Log of the slice volume at ``r = 0`` (trace-exact units) implied by the radial profile.

    Matching ``int_Bloch V(|a|) d^3a`` (with the trace-exact weight
    ``(2m)^(-1/2)`` per a-coordinate) to the total Hilbert-Schmidt volume
    gives

        V(0) = (2m)^2 (2pi)^(m(2m-1)) pi^(-3/2) prod_{k<=2m} Gamma(k)
               Gamma(2m^2 + 1/2) / (Gamma(4m^2) Gamma(2m^2 - 1)).
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    terms = [
        2.0 * math.log(2 * m),
        m * (2 * m - 1) * math.log(2 * math.pi),
        -1.5 * math.log(math.pi),
        math.fsum(math.lgamma(k) for k in range(1, 2 * m + 1)),
        math.lgamma(2 * m * m + 0.5),
        -math.lgamma(4 * m * m),
        -math.lgamma(2 * m * m - 1),
    ]
    return math.fsum(terms)


def conjectured_v0(m: int) -> float:
    val = log_conjectured_v0(m)
    if val < -745.0:
        raise OverflowError(f"V(0) = exp({val:.1f}) underflows; use log_conjectured_v0")
    return math.exp(val)


def conjectured_volume(r, m: int, convention=MetricConvention.TRACE_EXACT):
    """``V(0) (1 - r^2)^(2(m^2 - 1))`` in the requested metric convention."""
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("r must lie in [0, 1]")
    convention = MetricConvention.parse(convention)
    kinds = slice_kinds(m)
    log_scale = log_conjectured_v0(m)
    if convention is not MetricConvention.TRACE_EXACT:
        log_scale += math.log(euclid_to_hs_factor(2, m, kinds, convention)) - math.log(
            euclid_to_hs_factor(2, m, kinds, MetricConvention.TRACE_EXACT))
    out = math.exp(log_scale) * (1.0 - r * r) ** envelope_exponent(m)
    return float(out) if out.ndim == 0 else out


def total_volume_from_profile(m: int) -> float:
    """``int_Bloch V(|a|) d^3 a`` in trace-exact units; equals the total HS volume."""
    p = envelope_exponent(m)
    a_weight = (2.0 * m) ** -1.5
    radial = math.sqrt(math.pi) * math.gamma(p + 1) / (4.0 * math.gamma(p + 2.5))
    return a_weight * 4.0 * math.pi * radial * conjectured_v0(m)


# product measure -----------------------------------------------------------

def estimate_psep_product_measure(n_samples: int, n_bins: int = 20, stream: SeededStream | None = None,
                                  min_bin_samples: int = 100, tol: float = POSITIVITY_TOL,
                                  chunk_size: int = 1 << 15, threads: int | None = None):
    """PPT fraction of two-qubit states under the simplex x Haar measure, binned by Bloch radius.

    Returns ``[(r_center, ProbabilityEstimate), ...]``; bins with fewer than
    ``min_bin_samples`` states are marked ``reliable=False``.
    """
    stream = stream or SeededStream(0)
    edges = np.linspace(0.0, 1.0, n_bins + 1)

    def work(size, sub):
        rho = samplers.sample_product_measure(4, sub, size)
        r = np.linalg.norm(bloch_vector(partial_trace_R(rho, 2, 2)), axis=-1)
        idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, n_bins - 1)
        hit = ppt_mask(rho, 2, tol)
        return np.bincount(idx, minlength=n_bins), np.bincount(idx[hit], minlength=n_bins)

    parts = run_chunked(work, n_samples, stream, chunk_size, threads)
    totals = np.sum([p[0] for p in parts], axis=0)
    hits = np.sum([p[1] for p in parts], axis=0)
    out = []
    for i in range(n_bins):
        rc = float(0.5 * (edges[i] + edges[i + 1]))
        est = ProbabilityEstimate.from_counts(int(hits[i]), int(totals[i]), rc, SEPARABLE)
        if totals[i] < min_bin_samples:
            est = ProbabilityEstimate(est.value, est.std_error, est.n_samples, est.n_hits, rc, SEPARABLE,
                                      reliable=False)
        out.append((rc, est))
    return out


def total_hits(binned) -> tuple[int, int]:
    return sum(e.n_hits for _, e in binned), sum(e.n_samples for _, e in binned)


__all__ = [
    "PPT",
    "SEPARABLE",
    "ProbabilityEstimate",
    "RadiusHistogram",
    "VolumeEstimate",
    "conjectured_v0",
    "conjectured_volume",
    "envelope_chi2",
    "estimate_conditioned_volume",
    "estimate_psep",
    "estimate_psep_product_measure",
    "estimate_x_psep",
    "estimate_x_total_volume",
    "estimate_x_volume",
    "fit_envelope_exponent",
    "flatness_test",
    "integrate_psep",
    "log_conjectured_v0",
    "log_zs_total_volume",
    "radius_histogram",
]
