"""Closed-form comparison functions, density factors, trace bounds and the
explicit comparison solution of the constant-coefficient Riccati equation.

All matrices use the block ordering (a, b, c_1 .. c_{2n-2}, last) of size
2n + 1.  Scalar functions accept array input for ``t`` and return an array
in that case, a float otherwise.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    BeyondFirstZeroWarning,
    DomainError,
    PoleError,
    SingularDenominatorError,
)

POLE_BAND = 1e-12
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ComparisonParams:
    """Curvature constants (k1, k2) and the odd topological dimension N."""

    k1: float
    k2: float
    n_dim: int

    def __post_init__(self):
        _check_finite(self.k1, "k1")
        _check_finite(self.k2, "k2")
        if int(self.n_dim) != self.n_dim or self.n_dim < 3 or self.n_dim % 2 == 0:
            raise DomainError(f"n_dim must be an odd integer >= 3, got {self.n_dim}")


@dataclass(frozen=True)
class ComparisonMatrixSpec:
    """Constants of the comparison matrix K = diag(0, k1, k2 I_{2n-2}, 0)."""

    k1: float
    k2: float
    half_dim: int

    def __post_init__(self):
        _check_finite(self.k1, "k1")
        _check_finite(self.k2, "k2")
        if int(self.half_dim) != self.half_dim or self.half_dim < 1:
            raise DomainError(f"half_dim must be an integer >= 1, got {self.half_dim}")

    @property
    def size(self):
        return 2 * self.half_dim + 1


def _check_finite(value, name):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must be finite, got {value}")


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return arr


def _out(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def d_param(k, t):
    """sqrt(|k|) (1 - t)."""
    _check_finite(k, "k")
    tt = _as_times(t)
    return _out(math.sqrt(abs(k)) * (1.0 - tt), t)


def m1(k, t):
    """First comparison function; its positive branch first vanishes at D = 2 pi.

    Past that zero the formula value is returned together with a
    :class:`BeyondFirstZeroWarning`.
    """
    _check_finite(k, "k")
    tt = _as_times(t)
    if k > 0 and np.any(math.sqrt(k) * (1.0 - tt) > TWO_PI):
        warnings.warn("m1 evaluated beyond its first zero D = 2 pi", BeyondFirstZeroWarning,
                      stacklevel=2)
    return _out(kernels.f1(k * (1.0 - tt) ** 2), t)


def m2(k, t):
    """Second comparison function sin(D)/D, sinh(D)/D for k < 0, 1 for k = 0."""
    _check_finite(k, "k")
    tt = _as_times(t)
    return _out(kernels.f2(k * (1.0 - tt) ** 2), t)


def numerator1(k, d):
    """2 - 2cos D - D sin D (hyperbolic analogue for k < 0) at D = d."""
    if k > 0:
        return 2.0 - 2.0 * np.cos(d) - d * np.sin(d)
    if k < 0:
        return 2.0 - 2.0 * np.cosh(d) + d * np.sinh(d)
    return np.zeros_like(np.asarray(d, dtype=float))


def numerator2(k, d):
    if k > 0:
        return np.sin(d)
    if k < 0:
        return np.sinh(d)
    return np.zeros_like(np.asarray(d, dtype=float))


def density_factor(params, dist_sq, t):
    """Model density ratio of the generalized measure contraction property.

    (1-t)^(N+2) m1(k1 d^2, t) m2(k2 d^2, t)^(N-3) / (m1(k1 d^2, 0) m2(k2 d^2, 0)^(N-3))
    """
    if not np.isfinite(dist_sq) or dist_sq < 0:
        raise DomainError(f"dist_sq must be finite and >= 0, got {dist_sq}")
    tt = _as_times(t)
    kd1 = params.k1 * dist_sq
    kd2 = params.k2 * dist_sq
    use_m2 = params.n_dim > 3
    if kd1 > 0:
        d0 = math.sqrt(kd1)
        if abs(d0 - TWO_PI) < POLE_BAND * TWO_PI or kernels.f1(np.array(kd1)) == 0.0:
            raise SingularDenominatorError(
                f"m1 vanishes at t = 0 (D = {d0!r}); geodesic reaches a conjugate point")
        if d0 > TWO_PI:
            warnings.warn("density denominator evaluated beyond the first zero of m1",
                          BeyondFirstZeroWarning, stacklevel=2)
    if use_m2 and kd2 > 0:
        d0 = math.sqrt(kd2)
        if abs(d0 - math.pi) < POLE_BAND * math.pi or kernels.f2(np.array(kd2)) == 0.0:
            raise SingularDenominatorError(
                f"m2 vanishes at t = 0 (D = {d0!r}); geodesic reaches a conjugate point")
        if d0 > math.pi:
            warnings.warn("density denominator evaluated beyond the first zero of m2",
                          BeyondFirstZeroWarning, stacklevel=2)
    val = kernels.density(kd1, kd2, tt, int(params.n_dim))
    # exact values at the endpoints
    val = np.where(tt == 0.0, 1.0, val)
    val = np.where(tt == 1.0, 0.0, val)
    return _out(val, t)


def _pole_guard(d, pole, what):
    """Return +1 past the pole, 0 at an exact pole, -1 below; raise inside the band."""
    if d == pole:
        return 0
    if abs(d - pole) < POLE_BAND * pole:
        raise PoleError(f"{what}: D = {d!r} within {POLE_BAND:g} relative of pole {pole!r}")
    if d > pole:
        return 1
    return -1


def _bound_time(t):
    if not np.isfinite(t) or t < 0.0 or t > 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")
    return float(t)


# derivative coefficients of the series of F1 and F2, in powers of (-x)
_F1_SERIES = kernels.F1_COEFFS
_F2_SERIES = kernels.F2_COEFFS


def _log_derivative_term(coeffs, x):
    """x F'(x) / F(x) from the series F(x) = sum c_j (-x)^j."""
    f = 0.0
    xf = 0.0
    for j in range(coeffs.size - 1, -1, -1):
        f = f * (-x) + coeffs[j]
        xf = xf * (-x) + j * coeffs[j]
    return xf / f


def trace_bound_b(k1, t):
    """Upper bound for the (a, b)-block trace of the Riccati solution.

    sqrt(k1)(sin D - D cos D)/(2 - 2cos D - D sin D) with D = sqrt(k1)(1-t),
    4/(1-t) when k1 = 0 and the hyperbolic analogue for k1 < 0.
    """
    _check_finite(k1, "k1")
    t = _bound_time(t)
    s = 1.0 - t
    if k1 > 0:
        side = _pole_guard(math.sqrt(k1) * s, TWO_PI, "trace_bound_b")
        if side == 0:
            return -math.inf
        if side > 0:
            raise DomainError("trace_bound_b requires D(k1, t) < 2 pi")
    if s == 0.0:
        return math.inf
    x = k1 * s * s
    if abs(x) < kernels.SERIES_RADIUS:
        return (4.0 + 2.0 * _log_derivative_term(_F1_SERIES, x)) / s
    d = math.sqrt(abs(x))
    r = math.sqrt(abs(k1))
    if k1 > 0:
        return r * (math.sin(d) - d * math.cos(d)) / (2.0 - 2.0 * math.cos(d) - d * math.sin(d))
    return r * (d * math.cosh(d) - math.sinh(d)) / (2.0 - 2.0 * math.cosh(d) + d * math.sinh(d))


def trace_bound_c(k2, t, block_size):
    """Upper bound m sqrt(k2) cot D for the trace of the c-block (coth for k2 < 0)."""
    _check_finite(k2, "k2")
    t = _bound_time(t)
    if int(block_size) != block_size or block_size < 0:
        raise DomainError(f"block_size must be a non-negative integer, got {block_size}")
    if block_size == 0:
        return 0.0
    s = 1.0 - t
    if k2 > 0:
        side = _pole_guard(math.sqrt(k2) * s, math.pi, "trace_bound_c")
        if side == 0:
            return -math.inf
        if side > 0:
            raise DomainError("trace_bound_c requires D(k2, t) < pi")
    if s == 0.0:
        return math.inf
    x = k2 * s * s
    if abs(x) < kernels.SERIES_RADIUS:
        return block_size * (1.0 + 2.0 * _log_derivative_term(_F2_SERIES, x)) / s
    d = math.sqrt(abs(x))
    r = math.sqrt(abs(k2))
    if k2 > 0:
        return block_size * r / math.tan(d)
    return block_size * r / math.tanh(d)


def trace_bound_last(t):
    """1/(1-t), the bound for the last diagonal entry."""
    t = _bound_time(t)
    s = 1.0 - t
    if s == 0.0:
        return math.inf
    if s < POLE_BAND:
        raise PoleError(f"trace_bound_last: t = {t!r} within {POLE_BAND:g} of the pole at 1")
    return 1.0 / s


def comparison_matrix(spec):
    """K = diag(0, k1, k2 I_{2n-2}, 0)."""
    diag = np.zeros(spec.size)
    diag[1] = spec.k1
    diag[2:-1] = spec.k2
    return np.diag(diag)


# Taylor coefficients in y of tan(sqrt y)/sqrt y and sec(sqrt y); both are
# entire in y up to the first pole y = pi^2/4, and valid for y < 0 as well.
_TAN_SERIES = (1.0, 1.0 / 3.0, 2.0 / 15.0, 17.0 / 315.0, 62.0 / 2835.0, 1382.0 / 155925.0,
               21844.0 / 6081075.0)
_SEC_SERIES = (1.0, 1.0 / 2.0, 5.0 / 24.0, 61.0 / 720.0, 277.0 / 8064.0, 50521.0 / 3628800.0,
               540553.0 / 95800320.0)
_LAMBDA_SERIES_RADIUS = 1e-2
HALF_PI = 0.5 * math.pi


def _poly(coeffs, y):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * y + c
    return acc


def _tan_terms(y):
    """(T, P, Q) with T = tan(s)/s, P = (T-1)/y, Q = (sec s - 1)/y, s = sqrt(y)."""
    if abs(y) < _LAMBDA_SERIES_RADIUS:
        return _poly(_TAN_SERIES, y), _poly(_TAN_SERIES[1:], y), _poly(_SEC_SERIES[1:], y)
    s = math.sqrt(abs(y))
    if y > 0:
        tv = math.tan(s) / s
        sec = 1.0 / math.cos(s)
    else:
        tv = math.tanh(s) / s
        sec = 1.0 / math.cosh(s)
    return tv, (tv - 1.0) / y, (sec - 1.0) / y


def lambda_pole(k):
    """First time at which tan(sqrt(k) t) blows up, inf when k <= 0."""
    if k > 0:
        return HALF_PI / math.sqrt(k)
    return math.inf


def lambda_closed_form(spec, t):
    """Explicit solution of the constant-coefficient comparison equation.

    Lambda' = Lambda K Lambda - C1 Lambda - Lambda C1^T + C2,  Lambda(0) = 0.
    """
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"t must be finite and >= 0, got {t}")
    for k, name in ((spec.k1, "k1"), (spec.k2, "k2")):
        if k > 0 and (name == "k1" or spec.half_dim > 1):
            side = _pole_guard(math.sqrt(k) * t, HALF_PI, f"lambda_closed_form ({name})")
            if side >= 0:
                if side == 0:
                    raise PoleError(f"lambda_closed_form: t = {t!r} is a pole for {name}")
                raise DomainError(f"lambda_closed_form: t = {t!r} is past the pole for {name}")
    lam = np.zeros((spec.size, spec.size))
    tb, pb, qb = _tan_terms(spec.k1 * t * t)
    lam[0, 0] = t ** 3 * pb
    lam[0, 1] = lam[1, 0] = -t * t * qb
    lam[1, 1] = t * tb
    if spec.half_dim > 1:
        tc = _tan_terms(spec.k2 * t * t)[0]
        idx = np.arange(2, spec.size - 1)
        lam[idx, idx] = t * tc
    lam[-1, -1] = t
    return lam


def lambda_residual(spec, t, h=None):
    """Max-abs residual of the comparison equation, derivative by Richardson-extrapolated
    central differences."""
    from .riccati import build_structure_matrices

    sm = build_structure_matrices(spec.half_dim)
    kmat = comparison_matrix(spec)
    if h is None:
        # derivatives grow like 1/(distance to pole)^k: scale the step by it
        poles = [lambda_pole(spec.k1)] + ([lambda_pole(spec.k2)] if spec.half_dim > 1 else [])
        gap = min(poles) - t
        h = 1e-3 * min(max(t, 1e-3), gap, 1.0)
    h = min(h, t) if t > 0 else h

    def central(step):
        if t - step < 0:
            # one-sided near 0: use the forward stencil
            f0 = lambda_closed_form(spec, t)
            f1 = lambda_closed_form(spec, t + step)
            f2 = lambda_closed_form(spec, t + 2 * step)
            return (-3 * f0 + 4 * f1 - f2) / (2 * step)
        return (lambda_closed_form(spec, t + step) - lambda_closed_form(spec, t - step)) / (2 * step)

    deriv = (4.0 * central(h / 2) - central(h)) / 3.0
    lam = lambda_closed_form(spec, t)
    res = deriv - lam @ kmat @ lam + sm.c1 @ lam + lam @ sm.c1.T - sm.c2
    return float(np.max(np.abs(res)))
