"""Closed forms for two-qubit X-states conditioned on a reduced Bloch vector along z.

An X-state has non-zero entries only on the diagonal and anti-diagonal in
the computational basis.  With the reduced Bloch vector fixed to
``(0, 0, a3)`` it reads

    rho_X = (1 + a3 s3x1 + b3 1xs3 + c11 s1xs1 + c12 s1xs2 + c21 s2xs1
             + c22 s2xs2 + c33 s3xs3) / 4.

All functions accept a single :class:`XCoordinates` or any array whose last
axis holds ``(a3, b3, c11, c12, c21, c22, c33)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from condvol.errors import InvalidStateError, SingularTransformError
from condvol.statespace import PAULI, MetricConvention, euclid_to_hs_factor

X_FIELDS = ("a3", "b3", "c11", "c12", "c21", "c22", "c33")
X_SLICE_KINDS = ("b", "c", "c", "c", "c", "c")


class XCoordinates(NamedTuple):
    a3: float
    b3: float
    c11: float
    c12: float
    c21: float
    c22: float
    c33: float


class XTransformedCoordinates(NamedTuple):
    """Linear coordinates in which the X body is a product of two discs over ``(z, Z)``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    jacobian: np.ndarray


def _split(xc):
    arr = np.asarray(xc, dtype=float)
    if arr.shape[-1] != 7:
        raise ValueError(f"X coordinates need 7 components, got shape {arr.shape}")
    return np.moveaxis(arr, -1, 0)


_I2 = np.eye(2)
_X_TENSORS = np.array([
    np.kron(PAULI[2], _I2),
    np.kron(_I2, PAULI[2]),
    np.kron(PAULI[0], PAULI[0]),
    np.kron(PAULI[0], PAULI[1]),
    np.kron(PAULI[1], PAULI[0]),
    np.kron(PAULI[1], PAULI[1]),
    np.kron(PAULI[2], PAULI[2]),
])


def x_to_density(xc) -> np.ndarray:
    arr = np.asarray(xc, dtype=float)
    _split(arr)
    return (np.eye(4) + np.tensordot(arr, _X_TENSORS, axes=(-1, 0))) / 4.0


_X_MASK = np.array([[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]], dtype=bool)


def x_from_density(rho, atol: float = 1e-12) -> XCoordinates:
    """Read X coordinates off a 4x4 matrix.

    Raises :class:`InvalidStateError` if ``rho`` is not of X form in the
    computational basis, since in any other frame the seven numbers have no
    meaning.
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise InvalidStateError("X-states are 4x4")
    if np.max(np.abs(rho[~_X_MASK]), initial=0.0) > atol:
        raise InvalidStateError("matrix is not of X form in the computational basis")
    vals = np.einsum("ij,kji->k", rho, _X_TENSORS).real
    return XCoordinates(*map(float, vals))


def _positivity_margins(a3, b3, c11, c12, c21, c22, c33):
    m1 = (1.0 + c33) - np.sqrt((a3 + b3) ** 2 + (c11 - c22) ** 2 + (c12 + c21) ** 2)
    m2 = (1.0 - c33) - np.sqrt((a3 - b3) ** 2 + (c11 + c22) ** 2 + (c12 - c21) ** 2)
    return np.minimum(m1, m2)


def x_positivity_margin(xc):
    """Signed distance to the boundary of the positive cone; ``4 * lambda_min``."""
    return _positivity_margins(*_split(xc))


def x_ppt_margin(xc):
    a3, b3, c11, c12, c21, c22, c33 = _split(xc)
    return _positivity_margins(a3, b3, c11, -c12, c21, -c22, c33)


def x_is_positive(xc):
    """Closed-region positivity test; boundary points count as positive."""
    out = x_positivity_margin(xc) >= 0.0
    return bool(out) if np.ndim(out) == 0 else out


def x_is_ppt(xc):
    """Positivity of the partial transpose, which flips the signs of c12 and c22."""
    out = x_ppt_margin(xc) >= 0.0
    return bool(out) if np.ndim(out) == 0 else out


def x_transform(xc) -> XTransformedCoordinates:
    a3, b3, c11, c12, c21, c22, c33 = _split(xc)
    if np.any(np.abs(a3) >= 1.0):
        raise SingularTransformError("transform is singular for |a3| = 1")
    s = np.sqrt(1.0 - a3 * a3)
    return XTransformedCoordinates(
        x=(c11 + c22) / s,
        y=(c12 - c21) / s,
        z=(b3 + c33) / (1.0 + a3),
        X=(c12 + c21) / s,
        Y=(c11 - c22) / s,
        Z=(b3 - c33) / (1.0 - a3),
        jacobian=0.125 * (1.0 - a3 * a3) ** 3,
    )


def x_inverse_transform(t: XTransformedCoordinates | tuple, a3) -> np.ndarray:
    """Map ``(x, y, z, X, Y, Z)`` back to X coordinates at fixed ``a3``."""
    x, y, z, X, Y, Z = (np.asarray(v, dtype=float) for v in tuple(t)[:6])
    a3 = np.broadcast_to(np.asarray(a3, dtype=float), np.broadcast(x, z).shape)
    if np.any(np.abs(a3) >= 1.0):
        raise SingularTransformError("transform is singular for |a3| = 1")
    s = np.sqrt(1.0 - a3 * a3)
    p, q = (1.0 + a3) * z, (1.0 - a3) * Z
    return np.stack([
        a3,
        0.5 * (p + q),
        0.5 * s * (x + Y),
        0.5 * s * (X + y),
        0.5 * s * (X - y),
        0.5 * s * (x - Y),
        0.5 * (p - q),
    ], axis=-1)


def disk_radii_sq(z, Z):
    """Squared disc radii ``((1+Z)(1-z), (1-Z)(1+z))`` of the ``x-y`` and ``X-Y`` planes."""
    z, Z = np.asarray(z, dtype=float), np.asarray(Z, dtype=float)
    return (1.0 + Z) * (1.0 - z), (1.0 - Z) * (1.0 + z)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any((r < 0.0) | (r > 1.0)) or np.any(np.isnan(r)):
        raise ValueError("Bloch radius must lie in [0, 1]")
    return r


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def x_cond_volume_euclid(r):
    r = _check_r(r)
    return _scalar(2.0 / 9.0 * math.pi**2 * (1.0 - r * r) ** 3)


def x_slice_factor(convention) -> float:
    return euclid_to_hs_factor(2, 2, X_SLICE_KINDS, convention)


def x_cond_volume_hs(r, convention=MetricConvention.PAPER_UNIFORM):
    """``pi^2/2304 (1-r^2)^3`` (paper-uniform) or ``pi^2/288 (1-r^2)^3`` (trace-exact)."""
    return _scalar(x_cond_volume_euclid(r) * x_slice_factor(convention))


def x_total_volume_hs(convention=MetricConvention.PAPER_UNIFORM) -> float:
    # int_0^1 (1 - r^2)^3 dr = 16/35
    return 2.0 / 9.0 * math.pi**2 * 16.0 / 35.0 * x_slice_factor(convention)


def x_sep_volume_euclid(r):
    r = _check_r(r)
    return _scalar(4.0 / 45.0 * math.pi**2 * (1.0 - r * r) ** 3)


def x_ent_volume_euclid(r):
    r = _check_r(r)
    return _scalar(2.0 / 15.0 * math.pi**2 * (1.0 - r * r) ** 3)


def x_psep(r):
    """Separable fraction of the conditioned X slice: 2/5 below r = 1, exactly 1 at r = 1."""
    r = _check_r(r)
    return _scalar(np.where(r < 1.0, 0.4, 1.0))
