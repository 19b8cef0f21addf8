"""Linear algebra of bipartite states in the generalized Gell-Mann picture.

A state of an ``n x m`` system is written

    rho = (1 + a_i A_i x 1 + b_j 1 x B_j + c_kl A_k x B_l) / (n m)

with traceless Hermitian generators normalised to ``Tr(A_k A_l) = 2 delta_kl``.
Composite indices are system-major: ``|i>_S |j>_R`` sits at ``i*m + j``.

Generator order (fixed, also written into every run manifest): all
symmetric pairs ``E_jk + E_kj`` with ``j < k`` in lexicographic order, then
the antisymmetric pairs ``-i E_jk + i E_kj`` in the same order, then the
``n - 1`` diagonal matrices.  For ``n = 2`` this is ``(sigma_x, sigma_y,
sigma_z)``.  Flat coefficient vectors are ``(a, b, c.ravel())`` with ``c``
row-major over ``(k, l)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from condvol import _kernels
from condvol.errors import DimensionError, InvalidStateError

POSITIVITY_TOL = 1e-10
HERMITIAN_TOL = 1e-10

GENERATOR_ORDER = (
    "symmetric E_jk+E_kj (j<k, lexicographic), antisymmetric -iE_jk+iE_kj "
    "(j<k, lexicographic), diagonal sqrt(2/(l(l+1)))diag(1..1,-l,0..0) (l=1..n-1); "
    "flat vector (a, b, c row-major); composite index i*m+j"
)


class MetricConvention(enum.Enum):
    """How flat coefficient volumes are converted to Hilbert-Schmidt volumes.

    ``PAPER_UNIFORM`` weights every coordinate by ``sqrt(2)/(nm)``.
    ``TRACE_EXACT`` weights a coordinate by ``sqrt(Tr G^2)/(nm)`` where ``G``
    is its generator tensor, which is the exact Hilbert-Schmidt length.
    """

    PAPER_UNIFORM = "paper-uniform"
    TRACE_EXACT = "trace-exact"

    @classmethod
    def parse(cls, value) -> "MetricConvention":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown metric convention {value!r}")


@dataclass(frozen=True)
class GeneratorBasis:
    n: int
    matrices: np.ndarray

    def __len__(self) -> int:
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)


@lru_cache(maxsize=None)
def _su_matrices(n: int) -> np.ndarray:
    mats = []
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = g[k, j] = 1.0
        mats.append(g)
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = -1j
        g[k, j] = 1j
        mats.append(g)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        mats.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * d).astype(complex))
    out = np.array(mats)
    out.setflags(write=False)
    return out


def su_generators(n: int) -> GeneratorBasis:
    """Generalized Gell-Mann generators of SU(n), ``Tr(A_k A_l) = 2 delta_kl``."""
    if int(n) != n or n < 2:
        raise DimensionError(f"generator dimension must be an integer >= 2, got {n}")
    return GeneratorBasis(int(n), _su_matrices(int(n)))


@lru_cache(maxsize=None)
def composite_generators(n: int, m: int) -> tuple[tuple[str, ...], np.ndarray]:
    """Kinds and tensors ``(A_i x 1, 1 x B_j, A_k x B_l)`` in flat coefficient order."""
    A = su_generators(n).matrices
    B = su_generators(m).matrices
    In, Im = np.eye(n), np.eye(m)
    kinds = ["a"] * len(A) + ["b"] * len(B) + ["c"] * (len(A) * len(B))
    tensors = (
        [np.kron(g, Im) for g in A]
        + [np.kron(In, g) for g in B]
        + [np.kron(ga, gb) for ga in A for gb in B]
    )
    out = np.array(tensors)
    out.setflags(write=False)
    return tuple(kinds), out


def _coefficient_scales(n: int, m: int) -> np.ndarray:
    kinds, _ = composite_generators(n, m)
    scale = {"a": n / 2.0, "b": m / 2.0, "c": n * m / 4.0}
    return np.array([scale[k] for k in kinds])


@dataclass(frozen=True)
class CoefficientVector:
    """Real coordinates ``(a, b, c)`` of a bipartite state."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def n(self) -> int:
        return math.isqrt(len(self.a) + 1)

    @property
    def m(self) -> int:
        return math.isqrt(len(self.b) + 1)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, np.ravel(self.c)])

    @classmethod
    def from_flat(cls, vec, n: int, m: int) -> "CoefficientVector":
        vec = np.asarray(vec, dtype=float)
        na, nb = n * n - 1, m * m - 1
        if vec.shape != (na + nb + na * nb,):
            raise DimensionError(f"expected {na + nb + na * nb} coefficients for {n}x{m}, got {vec.shape}")
        return cls(vec[:na].copy(), vec[na:na + nb].copy(), vec[na + nb:].reshape(na, nb).copy())


def _check_square(rho, N: int) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape[-2:] != (N, N):
        raise DimensionError(f"expected trailing shape {(N, N)}, got {rho.shape}")
    return rho


def from_flat_coefficients(vecs, n: int, m: int) -> np.ndarray:
    """Batched :func:`from_coefficients` on flat vectors of shape ``(..., n^2 m^2 - 1)``."""
    _, G = composite_generators(n, m)
    vecs = np.asarray(vecs, dtype=float)
    if vecs.shape[-1] != len(G):
        raise DimensionError(f"expected {len(G)} coefficients for {n}x{m}, got {vecs.shape[-1]}")
    N = n * m
    return (np.eye(N) + np.tensordot(vecs, G, axes=(-1, 0))) / N


def from_coefficients(mu: CoefficientVector, n: int, m: int) -> np.ndarray:
    """Hermitian unit-trace matrix with coordinates ``mu``.  Positivity is not enforced."""
    if len(mu.a) != n * n - 1 or len(mu.b) != m * m - 1 or np.shape(mu.c) != (n * n - 1, m * m - 1):
        raise DimensionError(f"coefficient lengths do not match a {n}x{m} system")
    return from_flat_coefficients(mu.flat(), n, m)


def to_flat_coefficients(rho, n: int, m: int) -> np.ndarray:
    """Batched inverse of :func:`from_flat_coefficients` (no validation)."""
    _, G = composite_generators(n, m)
    rho = _check_square(rho, n * m)
    traces = np.einsum("...ij,kji->...k", rho, G).real
    return traces * _coefficient_scales(n, m)


def to_coefficients(rho, n: int, m: int) -> CoefficientVector:
    rho = _check_square(rho, n * m)
    if rho.ndim != 2:
        raise DimensionError("to_coefficients takes a single matrix; use to_flat_coefficients for batches")
    if not is_hermitian(rho):
        raise InvalidStateError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-12:
        raise InvalidStateError(f"trace is {np.trace(rho).real!r}, not 1")
    return CoefficientVector.from_flat(to_flat_coefficients(rho, n, m), n, m)


def is_hermitian(H, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    return bool(np.max(np.abs(H - np.swapaxes(H, -1, -2).conj()), initial=0.0) <= tol)


def partial_trace_R(rho, n: int, m: int) -> np.ndarray:
    """Trace out the environment; works on stacks ``(..., nm, nm)``."""
    rho = _check_square(rho, n * m)
    t = rho.reshape(rho.shape[:-2] + (n, m, n, m))
    return np.einsum("...ijkj->...ik", t)


def partial_trace_S(rho, n: int, m: int) -> np.ndarray:
    """Trace out the system; works on stacks ``(..., nm, nm)``."""
    rho = _check_square(rho, n * m)
    t = rho.reshape(rho.shape[:-2] + (n, m, n, m))
    return np.einsum("...ijil->...jl", t)


def partial_transpose_R(rho, n: int, m: int) -> np.ndarray:
    """Transpose the environment factor: ``rho[(i,j),(k,l)] -> rho[(i,l),(k,j)]``."""
    rho = _check_square(rho, n * m)
    lead = rho.shape[:-2]
    t = rho.reshape(lead + (n, m, n, m))
    k = len(lead)
    axes = tuple(range(k)) + (k, k + 3, k + 2, k + 1)
    return np.ascontiguousarray(t.transpose(axes)).reshape(rho.shape)


def is_positive_semidefinite(H, tol: float = POSITIVITY_TOL) -> bool:
    """True iff the smallest eigenvalue of Hermitian ``H`` is ``>= -tol``."""
    H = np.asarray(H)
    if not is_hermitian(H):
        raise InvalidStateError("positivity test needs a Hermitian matrix")
    return bool(np.linalg.eigvalsh(H)[0] >= -tol)


def psd_mask(mats, tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Vectorised positivity of a stack ``(s, N, N)`` by early-exit Cholesky.

    Agrees with :func:`is_positive_semidefinite` except for matrices whose
    smallest eigenvalue lies within rounding of ``-tol``.
    """
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    if mats.ndim == 2:
        mats = mats[None]
    return _kernels.psd_mask(mats, float(tol))


def is_density_matrix(rho, tol: float = POSITIVITY_TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not is_hermitian(rho, 1e-12) or abs(np.trace(rho) - 1.0) > 1e-12:
        return False
    return bool(np.linalg.eigvalsh(rho)[0] >= -tol)


PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def qubit_state(bloch) -> np.ndarray:
    """``(1 + a . sigma) / 2``."""
    bloch = np.asarray(bloch, dtype=float)
    return 0.5 * (np.eye(2) + np.tensordot(bloch, PAULI, axes=(-1, 0)))


def bloch_vector(eta) -> np.ndarray:
    eta = _check_square(eta, 2)
    return np.einsum("...ij,kji->...k", eta, PAULI).real


def bloch_radius(eta, tol: float = POSITIVITY_TOL) -> float:
    """Radius of a qubit state in the Bloch ball."""
    eta = _check_square(eta, 2)
    if eta.ndim != 2:
        raise DimensionError("bloch_radius takes a single 2x2 state; use bloch_vector for stacks")
    if not is_density_matrix(eta, tol):
        raise InvalidStateError("not a valid qubit state")
    return float(np.linalg.norm(bloch_vector(eta)))


def hs_distance(rho1, rho2) -> float:
    """``sqrt(Tr[(rho1 - rho2)^2])``."""
    rho1, rho2 = np.asarray(rho1), np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise DimensionError(f"shape mismatch {rho1.shape} vs {rho2.shape}")
    d = rho1 - rho2
    return float(np.sqrt(max(np.trace(d @ d).real, 0.0)))


def coordinate_weight(n: int, m: int, kind: str, convention) -> float:
    """Hilbert-Schmidt length of a unit step along one flat coordinate."""
    convention = MetricConvention.parse(convention)
    if kind not in ("a", "b", "c"):
        raise ValueError(f"unknown coordinate kind {kind!r}")
    N = n * m
    if convention is MetricConvention.PAPER_UNIFORM:
        return math.sqrt(2.0) / N
    trace_sq = {"a": 2.0 * m, "b": 2.0 * n, "c": 4.0}[kind]
    return math.sqrt(trace_sq) / N


def euclid_to_hs_factor(n: int, m: int, coords: Iterable[str], convention) -> float:
    """Product of per-coordinate weights, converting a flat volume to HS units."""
    coords = list(coords)
    if not coords:
        raise ValueError("need at least one coordinate")
    return math.prod(coordinate_weight(n, m, k, convention) for k in coords)


def log_zs_total_volume(n: int, m: int) -> float:
    """Natural log of the Hilbert-Schmidt volume of all ``nm x nm`` states."""
    if n < 2 or m < 2:
        raise DimensionError("factor dimensions must be >= 2")
    N = n * m
    # lgamma(k) for integer k is log((k-1)!); exact factorials below 171
    log_prod = math.fsum(
        math.log(math.factorial(k - 1)) if k <= 171 else math.lgamma(k) for k in range(1, N + 1)
    )
    return math.fsum([0.5 * math.log(N), 0.5 * N * (N - 1) * math.log(2 * math.pi), log_prod, -math.lgamma(N * N)])


def zs_total_volume(n: int, m: int) -> float:
    val = log_zs_total_volume(n, m)
    if val < -745.0 or val > 709.0:
        raise OverflowError(f"volume exp({val:.1f}) is outside float range; use log_zs_total_volume")
    return math.exp(val)
