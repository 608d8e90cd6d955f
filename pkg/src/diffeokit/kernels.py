"""Array kernels with a numba path and a pure-numpy fallback.

Each public function dispatches on :data:`diffeokit._accel.USE_NUMBA`.  Both
implementations stay importable (``*_numba`` / ``*_numpy``) so tests and the
benchmark can compare them directly.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# exp(-1/t) is below 1e-304 for t < 1/700; treating it as 0 there keeps the
# jet formulas (which multiply by 1/t**4) free of inf*0.
BUMP_FLOOR = 1.0 / 700.0

# entries above this bound may overflow int64 in the next row combination
SNF_ENTRY_LIMIT = 1 << 30


# -- flat bump and cut-off ---------------------------------------------------

@njit
def _flat_bump_loop(t, out):
    for k in range(t.shape[0]):
        s = t[k]
        if s > BUMP_FLOOR:
            out[k] = np.exp(-1.0 / s)
        else:
            out[k] = 0.0
    return out


def flat_bump_numba(t):
    t = np.ascontiguousarray(t, dtype=np.float64)
    flat = t.reshape(-1)
    return _flat_bump_loop(flat, np.empty_like(flat)).reshape(t.shape)


def flat_bump_numpy(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    mask = t > BUMP_FLOOR
    out[mask] = np.exp(-1.0 / t[mask])
    return out


@njit
def _cutoff_loop(t, eps, out):
    hi = 1.0 - eps
    for k in range(t.shape[0]):
        a = t[k] - eps
        b = hi - t[k]
        ga = np.exp(-1.0 / a) if a > BUMP_FLOOR else 0.0
        gb = np.exp(-1.0 / b) if b > BUMP_FLOOR else 0.0
        out[k] = ga / (ga + gb)
    return out


def cutoff_numba(t, eps):
    t = np.ascontiguousarray(t, dtype=np.float64)
    flat = t.reshape(-1)
    return _cutoff_loop(flat, float(eps), np.empty_like(flat)).reshape(t.shape)


def cutoff_numpy(t, eps):
    t = np.asarray(t, dtype=np.float64)
    ga = flat_bump_numpy(t - eps)
    gb = flat_bump_numpy((1.0 - eps) - t)
    return ga / (ga + gb)


# -- circle section ----------------------------------------------------------

@njit
def _section_loop(theta, eps, cell, coords):
    hi = 1.0 - eps
    for k in range(theta.shape[0]):
        th = (theta[k] + 0.5) % 2.0 - 0.5
        if th <= 0.5:
            cell[k] = 0
            u = th
        else:
            cell[k] = 1
            u = th - 1.0
        a = abs(u)
        s = 2.0 * a
        ga = np.exp(-1.0 / (s - eps)) if s - eps > BUMP_FLOOR else 0.0
        gb = np.exp(-1.0 / (hi - s)) if hi - s > BUMP_FLOOR else 0.0
        p = ga / (ga + gb)
        r = p * (1.0 - a) + (1.0 - p) * 0.5
        coords[k, 0] = (1.0 - u - r) / 2.0
        coords[k, 1] = r
        coords[k, 2] = (1.0 + u - r) / 2.0
    return cell, coords


def section_numba(theta, eps):
    theta = np.ascontiguousarray(theta, dtype=np.float64).reshape(-1)
    cell = np.empty(theta.shape[0], dtype=np.int64)
    coords = np.empty((theta.shape[0], 3))
    return _section_loop(theta, float(eps), cell, coords)


def section_numpy(theta, eps):
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    th = (theta + 0.5) % 2.0 - 0.5
    cell = (th > 0.5).astype(np.int64)
    u = np.where(cell == 0, th, th - 1.0)
    a = np.abs(u)
    p = cutoff_numpy(2.0 * a, eps)
    r = p * (1.0 - a) + (1.0 - p) * 0.5
    coords = np.stack([(1.0 - u - r) / 2.0, r, (1.0 + u - r) / 2.0], axis=1)
    return cell, coords


# -- Smith normal form -------------------------------------------------------

@njit
def _smith_loop(a):
    m, n = a.shape
    t = 0
    while t < m and t < n:
        # pivot: smallest nonzero |entry| in the trailing block
        best = 0
        bi = -1
        bj = -1
        for i in range(t, m):
            for j in range(t, n):
                v = abs(a[i, j])
                if v != 0 and (best == 0 or v < best):
                    best = v
                    bi = i
                    bj = j
        if bi < 0:
            break
        if bi != t:
            for j in range(n):
                tmp = a[t, j]
                a[t, j] = a[bi, j]
                a[bi, j] = tmp
        if bj != t:
            for i in range(m):
                tmp = a[i, t]
                a[i, t] = a[i, bj]
                a[i, bj] = tmp
        done = False
        while not done:
            done = True
            p = a[t, t]
            for i in range(t + 1, m):
                if a[i, t] != 0:
                    q = a[i, t] // p
                    for j in range(t, n):
                        if abs(a[t, j]) > SNF_ENTRY_LIMIT or abs(q) > SNF_ENTRY_LIMIT:
                            raise OverflowError("Smith normal form entry overflow")
                        a[i, j] -= q * a[t, j]
            for j in range(t + 1, n):
                if a[t, j] != 0:
                    q = a[t, j] // p
                    for i in range(t, m):
                        if abs(a[i, t]) > SNF_ENTRY_LIMIT or abs(q) > SNF_ENTRY_LIMIT:
                            raise OverflowError("Smith normal form entry overflow")
                        a[i, j] -= q * a[i, t]
            # a leftover remainder is smaller than the pivot: move it in
            ri = -1
            rj = -1
            for i in range(t + 1, m):
                if a[i, t] != 0:
                    ri = i
                    rj = t
                    break
            if ri < 0:
                for j in range(t + 1, n):
                    if a[t, j] != 0:
                        ri = t
                        rj = j
                        break
            if ri >= 0:
                done = False
                if ri != t:
                    for j in range(n):
                        tmp = a[t, j]
                        a[t, j] = a[ri, j]
                        a[ri, j] = tmp
                if rj != t:
                    for i in range(m):
                        tmp = a[i, t]
                        a[i, t] = a[i, rj]
                        a[i, rj] = tmp
                continue
            # divisibility: fold an offending row into the pivot row
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if a[i, j] % p != 0:
                        for jj in range(t, n):
                            a[t, jj] += a[i, jj]
                        done = False
                        break
                if not done:
                    break
        t += 1
    k = min(m, n)
    diag = np.zeros(k, dtype=np.int64)
    for i in range(k):
        diag[i] = abs(a[i, i])
    return diag


_smith_python = _smith_loop.py_func if hasattr(_smith_loop, "py_func") else _smith_loop


def smith_diagonal_numba(matrix):
    return _smith_loop(np.array(matrix, dtype=np.int64, copy=True))


def smith_diagonal_numpy(matrix):
    return _smith_python(np.array(matrix, dtype=np.int64, copy=True))


# -- dispatch ----------------------------------------------------------------

if USE_NUMBA:
    flat_bump = flat_bump_numba
    cutoff = cutoff_numba
    circle_section = section_numba
    smith_diagonal = smith_diagonal_numba
else:
    flat_bump = flat_bump_numpy
    cutoff = cutoff_numpy
    circle_section = section_numpy
    smith_diagonal = smith_diagonal_numpy

