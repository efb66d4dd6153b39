"""Hot numeric kernels.

Every kernel has a pure-numpy implementation (``*_numpy``) and, when numba is
importable and not disabled through ``SASAKIAN_MCP_DISABLE_NUMBA``, an
``@njit`` twin (``*_numba``).  The public names dispatch to one of them once,
at import time.  Both paths compute the same floating point operations up to
reassociation, so results agree to a few ulps rather than bit-exactly.

The comparison functions are evaluated as entire functions of the single
variable ``x = k * (1 - t)**2``::

    F1(x) = (2 - 2 cos D - D sin D) / D**4,   D = sqrt(x)       (x > 0)
    F2(x) = sin(D) / D

with the hyperbolic continuation for ``x < 0``.  A Taylor series is used for
``|x| < SERIES_RADIUS``, where the closed forms cancel catastrophically.
"""

from math import factorial

import numpy as np

from ._accel import USE_NUMBA, numba

SERIES_RADIUS = 1.0
_NTERMS = 14

# F1(x) = sum_j (2j - 2) / (2j)! * (-x)**(j - 2),  j >= 2
F1_COEFFS = np.array([(2 * j - 2) / factorial(2 * j) for j in range(2, 2 + _NTERMS)])
# F2(x) = sum_m (-x)**m / (2m + 1)!
F2_COEFFS = np.array([1.0 / factorial(2 * m + 1) for m in range(_NTERMS)])


def _horner_neg(coeffs, x):
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * (-x) + c
    return acc


def f1_numpy(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < SERIES_RADIUS
    out[small] = _horner_neg(F1_COEFFS, x[small])
    pos = ~small & (x > 0)
    d = np.sqrt(x[pos])
    out[pos] = (2.0 - 2.0 * np.cos(d) - d * np.sin(d)) / (x[pos] * x[pos])
    neg = ~small & (x < 0)
    d = np.sqrt(-x[neg])
    out[neg] = (2.0 - 2.0 * np.cosh(d) + d * np.sinh(d)) / (x[neg] * x[neg])
    return out


def f2_numpy(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < SERIES_RADIUS
    out[small] = _horner_neg(F2_COEFFS, x[small])
    pos = ~small & (x > 0)
    d = np.sqrt(x[pos])
    out[pos] = np.sin(d) / d
    neg = ~small & (x < 0)
    d = np.sqrt(-x[neg])
    out[neg] = np.sinh(d) / d
    return out


def density_numpy(k1d2, k2d2, t, n_dim):
    """(1-t)^(N+2) F1(k1 d^2 (1-t)^2)/F1(k1 d^2) [F2(..)/F2(..)]^(N-3), broadcast."""
    k1d2, k2d2, t = np.broadcast_arrays(
        np.asarray(k1d2, float), np.asarray(k2d2, float), np.asarray(t, float)
    )
    s = (1.0 - t) ** 2
    ratio1 = f1_numpy(k1d2 * s) / f1_numpy(k1d2)
    ratio2 = f2_numpy(k2d2 * s) / f2_numpy(k2d2)
    return (1.0 - t) ** (n_dim + 2) * ratio1 * ratio2 ** (n_dim - 3)


# --- Heisenberg exponential map from the origin ---------------------------------
#
# Covector layout (p_x1..p_xn, p_y1..p_yn, p_z).  At the origin the horizontal
# components are w_i = p_xi + i p_yi and the Reeb momentum is u = p_z.  After
# unit time: x_i + i y_i = w_i g(u), z = q(u) sum |w_i|^2 / 2 with
# g(u) = (e^{iu} - 1)/(iu) and q(u) = (u - sin u)/u^2.

_SMALL_U = 0.1


def _g_q_numpy(u):
    u = np.asarray(u, dtype=float)
    u2 = u * u
    small = np.abs(u) < _SMALL_U
    safe = np.where(small, 1.0, u)
    g_re = np.where(small, 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 ** 3 / 5040.0,
                    np.sin(safe) / safe)
    g_im = np.where(small, u / 2.0 - u * u2 / 24.0 + u * u2 * u2 / 720.0 - u * u2 ** 3 / 40320.0,
                    (1.0 - np.cos(safe)) / safe)
    q = np.where(small, u / 6.0 - u * u2 / 120.0 + u * u2 * u2 / 5040.0 - u * u2 ** 3 / 362880.0,
                 (safe - np.sin(safe)) / (safe * safe))
    return g_re, g_im, q


def heisenberg_endpoints_numpy(cov):
    """Unit-time geodesic endpoints from the origin, one row per covector."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = (cov.shape[1] - 1) // 2
    a = cov[:, :n]
    b = cov[:, n:2 * n]
    u = cov[:, 2 * n]
    g_re, g_im, q = _g_q_numpy(u)
    out = np.empty_like(cov)
    out[:, :n] = a * g_re[:, None] - b * g_im[:, None]
    out[:, n:2 * n] = a * g_im[:, None] + b * g_re[:, None]
    out[:, 2 * n] = 0.5 * q * np.sum(a * a + b * b, axis=1)
    return out


def heisenberg_jacobians_numpy(cov, steps):
    """|det d exp| at each covector by central differences with per-coordinate steps."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    m = cov.shape[1]
    jac = np.empty((cov.shape[0], m, m))
    for k in range(m):
        dp = np.zeros(m)
        dp[k] = steps[k]
        plus = heisenberg_endpoints_numpy(cov + dp)
        minus = heisenberg_endpoints_numpy(cov - dp)
        jac[:, :, k] = (plus - minus) / (2.0 * steps[k])
    return np.abs(np.linalg.det(jac))


if USE_NUMBA:
    _jit = numba.njit(cache=True)
    _pjit = numba.njit(cache=True, parallel=True)

    @_jit
    def _f1_scalar(x):
        if abs(x) < SERIES_RADIUS:
            acc = 0.0
            for i in range(F1_COEFFS.size - 1, -1, -1):
                acc = acc * (-x) + F1_COEFFS[i]
            return acc
        if x > 0:
            d = np.sqrt(x)
            return (2.0 - 2.0 * np.cos(d) - d * np.sin(d)) / (x * x)
        d = np.sqrt(-x)
        return (2.0 - 2.0 * np.cosh(d) + d * np.sinh(d)) / (x * x)

    @_jit
    def _f2_scalar(x):
        if abs(x) < SERIES_RADIUS:
            acc = 0.0
            for i in range(F2_COEFFS.size - 1, -1, -1):
                acc = acc * (-x) + F2_COEFFS[i]
            return acc
        if x > 0:
            d = np.sqrt(x)
            return np.sin(d) / d
        d = np.sqrt(-x)
        return np.sinh(d) / d

    @_jit
    def _f1_flat(x):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = _f1_scalar(x[i])
        return out

    @_jit
    def _f2_flat(x):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = _f2_scalar(x[i])
        return out

    @_pjit
    def _density_flat(k1d2, k2d2, t, n_dim):
        out = np.empty_like(t)
        for i in numba.prange(t.size):
            s = 1.0 - t[i]
            r1 = _f1_scalar(k1d2[i] * s * s) / _f1_scalar(k1d2[i])
            r2 = _f2_scalar(k2d2[i] * s * s) / _f2_scalar(k2d2[i])
            out[i] = s ** (n_dim + 2) * r1 * r2 ** (n_dim - 3)
        return out

    @_jit
    def _endpoint_into(p, n, out):
        u = p[2 * n]
        u2 = u * u
        if abs(u) < _SMALL_U:
            g_re = 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 ** 3 / 5040.0
            g_im = u / 2.0 - u * u2 / 24.0 + u * u2 * u2 / 720.0 - u * u2 ** 3 / 40320.0
            q = u / 6.0 - u * u2 / 120.0 + u * u2 * u2 / 5040.0 - u * u2 ** 3 / 362880.0
        else:
            g_re = np.sin(u) / u
            g_im = (1.0 - np.cos(u)) / u
            q = (u - np.sin(u)) / u2
        r2 = 0.0
        for i in range(n):
            a = p[i]
            b = p[n + i]
            out[i] = a * g_re - b * g_im
            out[n + i] = a * g_im + b * g_re
            r2 += a * a + b * b
        out[2 * n] = 0.5 * q * r2

    @_pjit
    def heisenberg_endpoints_numba(cov):
        rows, m = cov.shape
        n = (m - 1) // 2
        out = np.empty_like(cov)
        for s in numba.prange(rows):
            _endpoint_into(cov[s], n, out[s])
        return out

    @_pjit
    def _jacobians_numba(cov, steps):
        rows, m = cov.shape
        n = (m - 1) // 2
        out = np.empty(rows)
        for s in numba.prange(rows):
            jac = np.empty((m, m))
            work = cov[s].copy()
            plus = np.empty(m)
            minus = np.empty(m)
            for k in range(m):
                base = work[k]
                work[k] = base + steps[k]
                _endpoint_into(work, n, plus)
                work[k] = base - steps[k]
                _endpoint_into(work, n, minus)
                work[k] = base
                for r in range(m):
                    jac[r, k] = (plus[r] - minus[r]) / (2.0 * steps[k])
            out[s] = abs(np.linalg.det(jac))
        return out

    def f1_numba(x):
        x = np.asarray(x, dtype=float)
        return _f1_flat(np.ascontiguousarray(x).ravel()).reshape(x.shape)

    def f2_numba(x):
        x = np.asarray(x, dtype=float)
        return _f2_flat(np.ascontiguousarray(x).ravel()).reshape(x.shape)

    def density_numba(k1d2, k2d2, t, n_dim):
        k1d2, k2d2, t = np.broadcast_arrays(
            np.asarray(k1d2, float), np.asarray(k2d2, float), np.asarray(t, float)
        )
        flat = [np.ascontiguousarray(a).ravel() for a in (k1d2, k2d2, t)]
        return _density_flat(*flat, int(n_dim)).reshape(t.shape)

    def heisenberg_jacobians_numba(cov, steps):
        cov = np.ascontiguousarray(np.atleast_2d(np.asarray(cov, dtype=float)))
        return _jacobians_numba(cov, np.ascontiguousarray(steps, dtype=float))

    f1 = f1_numba
    f2 = f2_numba
    density = density_numba
    heisenberg_endpoints = heisenberg_endpoints_numba
    heisenberg_jacobians = heisenberg_jacobians_numba
else:
    f1 = f1_numpy
    f2 = f2_numpy
    density = density_numpy
    heisenberg_endpoints = heisenberg_endpoints_numpy
    heisenberg_jacobians = heisenberg_jacobians_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
