"""Compiled positivity tests.

Both kernels decide ``H + tol*I > 0`` by an attempted Cholesky factorisation
that stops at the first non-positive pivot, which is equivalent to
``lambda_min(H) > -tol``.  Only the lower triangle of ``H`` is read.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def psd_mask(mats, tol):
    s = mats.shape[0]
    n = mats.shape[1]
    out = np.zeros(s, dtype=np.bool_)
    L = np.zeros((n, n), dtype=np.complex128)
    for t in range(s):
        ok = True
        for j in range(n):
            d = mats[t, j, j].real + tol
            for k in range(j):
                d -= L[j, k].real * L[j, k].real + L[j, k].imag * L[j, k].imag
            if d <= 0.0:
                ok = False
                break
            ljj = np.sqrt(d)
            L[j, j] = ljj
            for i in range(j + 1, n):
                acc = mats[t, i, j]
                for k in range(j):
                    acc -= L[i, k] * np.conj(L[j, k])
                L[i, j] = acc / ljj
        out[t] = ok
    return out


@njit(cache=True, nogil=True)
def affine_psd_mask(coeffs, base, colptr, rows, terms, values, tol):
    """Positivity of ``base + sum_k coeffs[t, k] * G_k`` for every row ``t``.

    The generators are given column-compressed over the lower triangle:
    entries ``colptr[j]:colptr[j+1]`` of ``rows/terms/values`` add
    ``coeffs[t, terms[q]] * values[q]`` to ``H[rows[q], j]``.  Columns are
    assembled lazily, so an early pivot failure skips the remaining work.
    """
    s = coeffs.shape[0]
    n = base.shape[0]
    out = np.zeros(s, dtype=np.bool_)
    L = np.zeros((n, n), dtype=np.complex128)
    col = np.empty(n, dtype=np.complex128)
    for t in range(s):
        ok = True
        for j in range(n):
            for i in range(j, n):
                col[i] = base[i, j]
            for q in range(colptr[j], colptr[j + 1]):
                col[rows[q]] += coeffs[t, terms[q]] * values[q]
            d = col[j].real + tol
            for k in range(j):
                d -= L[j, k].real * L[j, k].real + L[j, k].imag * L[j, k].imag
            if d <= 0.0:
                ok = False
                break
            ljj = np.sqrt(d)
            L[j, j] = ljj
            for i in range(j + 1, n):
                acc = col[i]
                for k in range(j):
                    acc -= L[i, k] * np.conj(L[j, k])
                L[i, j] = acc / ljj
        out[t] = ok
    return out


@njit(cache=True, nogil=True)
def assemble_block_coords(u, v, off):
    """Two-qubit slice coordinates ``(b, c1., c2., c3.)`` from ``u = b + c3.``, ``v = b - c3.``."""
    k = u.shape[0]
    out = np.empty((k, 12))
    for t in range(k):
        for j in range(3):
            out[t, j] = 0.5 * (u[t, j] + v[t, j])
            out[t, 9 + j] = 0.5 * (u[t, j] - v[t, j])
        for j in range(6):
            out[t, 3 + j] = 2.0 * off[t, j] - 1.0
    return out


def compress_lower(gens):
    """Column-compressed lower-triangle view of a stack of ``(K, N, N)`` matrices."""
    gens = np.asarray(gens, dtype=np.complex128)
    n = gens.shape[1]
    cols, rows, terms, values = [], [], [], []
    for k, g in enumerate(gens):
        ii, jj = np.nonzero(np.tril(g))
        for i, j in zip(ii, jj):
            cols.append(j)
            rows.append(i)
            terms.append(k)
            values.append(g[i, j])
    order = np.lexsort((rows, cols))
    cols = np.asarray(cols, dtype=np.int64)[order]
    colptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(colptr, cols + 1, 1)
    return (
        np.cumsum(colptr),
        np.asarray(rows, dtype=np.int64)[order],
        np.asarray(terms, dtype=np.int64)[order],
        np.asarray(values, dtype=np.complex128)[order],
    )
