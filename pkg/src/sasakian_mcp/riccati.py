"""Matrix Riccati machinery along a single geodesic.

With the structure matrices C1, C2 and a symmetric curvature matrix R(t), the
volume distortion of the contraction map is det B(t) where S = B^{-1} A solves

    S' = S C2 S - C1^T S - S C1 + R,      S(t)^{-1} -> 0 as t -> 1.

The terminal condition is singular, so the solver works in reversed time
tau = 1 - t with U(tau) = S(1 - tau)^{-1}, U(0) = 0, which satisfies

    U' = U R U - C1 U - U C1^T + C2.

Rather than integrating this quadratic equation, U is carried as the ratio
U = A~^{-1} B~ of the linear pair

    A~' = A~ C1 - B~ R(1 - tau),   B~' = A~ C2 - B~ C1^T,   A~(0) = I, B~(0) = 0,

which is regular through any finite point and gives both S(t) = B~^{-1} A~ and
det B(t) = det B~(1 - t) / det B~(1) directly.  A zero of det B~ inside (0, 1]
is a conjugate point.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from . import comparison as cmp
from .errors import (
    BlowUpError,
    DomainError,
    IntegrationError,
    NonSymmetricProfileError,
    PreconditionError,
)

RTOL = 1e-13
ATOL = 1e-30
SYM_TOL = 1e-12
T_MAX = 1.0 - 1e-6


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StructureMatrices:
    c1: np.ndarray
    c2: np.ndarray
    half_dim: int

    @property
    def size(self):
        return 2 * self.half_dim + 1


def build_structure_matrices(n):
    """C1 with a single 1 in position (a, b); C2 = diag(0, 1, ..., 1)."""
    if int(n) != n or n < 1:
        raise DomainError(f"half dimension must be an integer >= 1, got {n}")
    m = 2 * int(n) + 1
    c1 = np.zeros((m, m))
    c1[0, 1] = 1.0
    c2 = np.eye(m)
    c2[0, 0] = 0.0
    return StructureMatrices(_readonly(c1), _readonly(c2), int(n))


@dataclass(frozen=True)
class CurvatureMatrix:
    """Blocks of R: scalar r_bb, coupling row r_cb (length 2n-2), symmetric r_cc."""

    r_bb: float
    r_cb: np.ndarray
    r_cc: np.ndarray
    half_dim: int

    def __post_init__(self):
        n = self.half_dim
        if int(n) != n or n < 1:
            raise DomainError(f"half_dim must be an integer >= 1, got {n}")
        q = 2 * n - 2
        r_cb = np.asarray(self.r_cb, dtype=float).reshape(-1)
        r_cc = np.asarray(self.r_cc, dtype=float).reshape(q, q) if q else np.zeros((0, 0))
        if r_cb.size != q:
            raise DomainError(f"r_cb must have length {q}, got {r_cb.size}")
        vals = np.concatenate([[self.r_bb], r_cb, r_cc.ravel()])
        if not np.all(np.isfinite(vals)):
            raise DomainError("curvature blocks must be finite")
        scale = 1.0 + (np.max(np.abs(r_cc)) if q else 0.0)
        if q and np.max(np.abs(r_cc - r_cc.T)) > SYM_TOL * scale:
            raise NonSymmetricProfileError("r_cc is not symmetric")
        object.__setattr__(self, "r_bb", float(self.r_bb))
        object.__setattr__(self, "r_cb", _readonly(r_cb))
        object.__setattr__(self, "r_cc", _readonly(r_cc))

    @classmethod
    def from_matrix(cls, mat, half_dim=None):
        """Split a full (2n+1) matrix, checking the zero border and symmetry."""
        mat = np.asarray(mat, dtype=float)
        m = mat.shape[0]
        if mat.shape != (m, m) or m % 2 == 0 or m < 3:
            raise DomainError(f"curvature matrix must be square of odd size >= 3, got {mat.shape}")
        n = (m - 1) // 2 if half_dim is None else half_dim
        if np.max(np.abs(mat - mat.T)) > SYM_TOL * (1.0 + np.max(np.abs(mat))):
            raise NonSymmetricProfileError("curvature matrix is not symmetric")
        border = np.concatenate([mat[0], mat[:, 0], mat[-1], mat[:, -1]])
        if np.any(border != 0.0):
            raise DomainError("curvature matrix must have zero first and last rows/columns")
        return cls(mat[1, 1], mat[2:-1, 1], mat[2:-1, 2:-1], n)

    def assemble(self):
        m = 2 * self.half_dim + 1
        r = np.zeros((m, m))
        r[1, 1] = self.r_bb
        r[2:-1, 1] = self.r_cb
        r[1, 2:-1] = self.r_cb
        r[2:-1, 2:-1] = 0.5 * (self.r_cc + self.r_cc.T)
        return r

    def to_dict(self):
        return {"r_bb": self.r_bb, "r_cb": self.r_cb.tolist(), "r_cc": self.r_cc.tolist(),
                "half_dim": self.half_dim}

    @classmethod
    def from_dict(cls, d):
        n = int(d["half_dim"])
        q = 2 * n - 2
        return cls(d["r_bb"], np.asarray(d.get("r_cb", [0.0] * q), float),
                   np.asarray(d.get("r_cc", np.zeros((q, q))), float).reshape(q, q), n)


class CurvatureProfile:
    """Time-dependent curvature t -> CurvatureMatrix on [0, 1]."""

    def __init__(self, func, half_dim, constant=False):
        self.func = func
        self.half_dim = int(half_dim)
        self.constant = bool(constant)
        self._cached = None

    @classmethod
    def constant_from(cls, curv):
        """Constant profile from a CurvatureMatrix or a full matrix."""
        if not isinstance(curv, CurvatureMatrix):
            curv = CurvatureMatrix.from_matrix(curv)
        prof = cls(lambda t: curv, curv.half_dim, constant=True)
        prof._cached = curv.assemble()
        return prof

    @classmethod
    def flat(cls, n):
        q = 2 * n - 2
        return cls.constant_from(CurvatureMatrix(0.0, np.zeros(q), np.zeros((q, q)), n))

    @classmethod
    def comparison(cls, k1, k2, n):
        """The comparison curvature K = diag(0, k1, k2 I, 0) as a constant profile."""
        q = 2 * n - 2
        return cls.constant_from(CurvatureMatrix(k1, np.zeros(q), k2 * np.eye(q), n))

    def blocks(self, t):
        curv = self.func(t)
        if not isinstance(curv, CurvatureMatrix):
            curv = CurvatureMatrix.from_matrix(curv, self.half_dim)
        if curv.half_dim != self.half_dim:
            raise DomainError("profile returned a matrix of the wrong size")
        return curv

    def matrix(self, t):
        if self.constant:
            if self._cached is None:
                self._cached = self.blocks(0.0).assemble()
            return self._cached
        return self.blocks(t).assemble()


def _check_grid(grid):
    g = np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0:
        raise DomainError("grid must be non-empty")
    if not np.all(np.isfinite(g)) or g[0] < 0.0 or g[-1] > T_MAX:
        raise DomainError(f"grid must lie in [0, {T_MAX}]")
    if np.any(np.diff(g) <= 0.0):
        raise DomainError("grid must be strictly increasing")
    return g


def _generator(sm, r):
    """M with d/dtau [A~ B~] = [A~ B~] M."""
    return np.block([[sm.c1, sm.c2], [-r, -sm.c1.T]])


@dataclass(frozen=True)
class RiccatiSolution:
    """S(t), tr(C2 S(t)) and normalized det B(t) on a grid, with dense access."""

    grid: np.ndarray
    s_values: np.ndarray
    trace_c2s: np.ndarray
    det_b: np.ndarray
    half_dim: int
    _pair_at: object = field(repr=False, compare=False, default=None)
    _det_end: float = field(repr=False, compare=False, default=1.0)

    def _split(self, tau):
        m = 2 * self.half_dim + 1
        y = self._pair_at(tau)
        return y[:, :m], y[:, m:]

    def u_at(self, tau):
        """U(tau) = S(1 - tau)^{-1} in reversed time."""
        a, b = self._split(tau)
        u = np.linalg.solve(a, b)
        return 0.5 * (u + u.T)

    def s_at(self, t):
        a, b = self._split(1.0 - t)
        s = np.linalg.solve(b, a)
        return 0.5 * (s + s.T)

    def trace_at(self, t):
        s = self.s_at(t)
        return float(np.trace(s) - s[0, 0])

    def det_b_at(self, t):
        _, b = self._split(1.0 - t)
        return float(np.linalg.det(b) / self._det_end)


def _pair_values_rk(profile, sm, rtol, atol):
    m = sm.size
    const = profile.constant
    gen_const = _generator(sm, profile.matrix(0.0)) if const else None

    def rhs(tau, y):
        gen = gen_const if const else _generator(sm, profile.matrix(1.0 - tau))
        return (y.reshape(m, 2 * m) @ gen).ravel()

    y0 = np.hstack([np.eye(m), np.zeros((m, m))]).ravel()
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise IntegrationError(f"reversed frame integration failed: {sol.message}")
    dense = sol.sol

    def pair_at(tau):
        return dense(tau).reshape(m, 2 * m)

    return pair_at, sol.t


def _pair_values_expm(profile, sm):
    if not profile.constant:
        raise DomainError("the exponential propagator requires a constant profile")
    gen = _generator(sm, profile.matrix(0.0))
    m = sm.size

    def pair_at(tau):
        return scipy.linalg.expm(tau * gen)[:m]

    return pair_at, np.linspace(0.0, 1.0, 257)


def _pair_batch(pair_at, taus, method, profile, sm):
    if method == "expm":
        gen = _generator(sm, profile.matrix(0.0))
        m = sm.size
        taus = np.asarray(taus, dtype=float)
        return scipy.linalg.expm(taus[:, None, None] * gen[None])[:, :m]
    return np.array([pair_at(tau) for tau in taus])


def _locate_det_zero(det_fn, lo, hi):
    return brentq(det_fn, lo, hi, xtol=1e-14, rtol=1e-12, maxiter=200)


def solve_riccati_terminal(profile, n=None, grid=None, method="rk", rtol=RTOL, atol=ATOL):
    """Solve the terminal-value Riccati problem on ``grid`` (times in [0, 1 - 1e-6]).

    ``method`` is "rk" (adaptive DOP853 on the linear reversed-time pair) or
    "expm" (exact propagator, constant profiles only).  Raises BlowUpError if
    a conjugate point lies in [0, 1).
    """
    if n is None:
        n = profile.half_dim
    if n != profile.half_dim:
        raise DomainError("profile size does not match n")
    if grid is None:
        grid = np.linspace(0.0, 0.99, 100)
    g = _check_grid(grid)
    sm = build_structure_matrices(n)
    m = sm.size
    # symmetry is checked when each CurvatureMatrix is built
    profile.blocks(0.0)
    if method == "rk":
        pair_at, steps = _pair_values_rk(profile, sm, rtol, atol)
    elif method == "expm":
        pair_at, steps = _pair_values_expm(profile, sm)
    else:
        raise DomainError(f"unknown method {method!r}")

    # sign of det B~ on (0, 1]: sample the integrator steps plus the output grid
    probe = np.unique(np.concatenate([steps[steps > 0], 1.0 - g, [1.0]]))
    probe = probe[probe > 0]
    pairs = _pair_batch(pair_at, probe, method, profile, sm)
    dets = np.linalg.det(pairs[:, :, m:])
    bad = np.nonzero(dets <= 0.0)[0]
    if bad.size:
        i = bad[0]

        def det_fn(tau):
            return float(np.linalg.det(pair_at(tau)[:, m:]))

        lo = probe[i - 1] if i > 0 else probe[0] * 1e-3
        try:
            tau_c = _locate_det_zero(det_fn, lo, probe[i]) if dets[i] < 0 else probe[i]
        except ValueError:
            tau_c = probe[i]
        raise BlowUpError(f"conjugate point at t = {1.0 - tau_c:.12g}", time=1.0 - tau_c)

    det_end = float(dets[-1])
    gp = _pair_batch(pair_at, 1.0 - g, method, profile, sm)
    a = gp[:, :, :m]
    b = gp[:, :, m:]
    s = np.linalg.solve(b, a)
    s = 0.5 * (s + np.swapaxes(s, 1, 2))
    trace = np.trace(s, axis1=1, axis2=2) - s[:, 0, 0]
    det_b = np.linalg.det(b) / det_end
    det_b[g == 0.0] = 1.0
    return RiccatiSolution(_readonly(g), _readonly(s), _readonly(trace), _readonly(det_b),
                           int(n), pair_at, det_end)


def riccati_residual(sol, profile, t, h=None):
    """Max-abs residual of the Riccati equation at t, with S' from a five-point stencil."""
    sm = build_structure_matrices(sol.half_dim)
    if h is None:
        h = 1e-3 * (1.0 - t)
    h = min(h, t) if t > 0 else h
    if t >= 2 * h:
        ds = (sol.s_at(t - 2 * h) - 8 * sol.s_at(t - h) + 8 * sol.s_at(t + h)
              - sol.s_at(t + 2 * h)) / (12 * h)
    else:
        # forward stencil at the left end of the interval
        f = [sol.s_at(t + j * h) for j in range(5)]
        ds = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    s = sol.s_at(t)
    res = ds - s @ sm.c2 @ s + sm.c1.T @ s + s @ sm.c1 - profile.matrix(t)
    return float(np.max(np.abs(res)))


def volume_distortion(sol, epsabs=1e-13, epsrel=1e-12):
    """(t, det B(t)) with det B(t) = exp(-int_0^t tr(C2 S)) by adaptive quadrature."""
    g = sol.grid
    out = []
    acc = 0.0
    prev = 0.0
    if g[0] > 0.0:
        acc, _ = quad(sol.trace_at, 0.0, g[0], epsabs=epsabs, epsrel=epsrel, limit=200)
        prev = g[0]
    for t in g:
        if t > prev:
            val, _ = quad(sol.trace_at, prev, t, epsabs=epsabs, epsrel=epsrel, limit=200)
            acc += val
            prev = t
        out.append((float(t), math.exp(-acc)))
    return out


@dataclass(frozen=True)
class FrameSolution:
    grid: np.ndarray
    a_values: np.ndarray
    b_values: np.ndarray
    _dense: object = field(repr=False, compare=False, default=None)

    @property
    def det_b(self):
        return np.linalg.det(self.b_values)

    def pair_at(self, t):
        m = self.a_values.shape[1]
        y = self._dense(t).reshape(m, 2 * m)
        return y[:, :m], y[:, m:]


def solve_frame_forward(profile, n=None, init=None, t_span=(0.0, 1.0), grid=None,
                        rtol=RTOL, atol=ATOL):
    """Integrate A' = -A C1 + B R(t), B' = -A C2 + B C1^T from ``init`` = (A0, B0)."""
    if n is None:
        n = profile.half_dim
    sm = build_structure_matrices(n)
    m = sm.size
    if init is None:
        init = (np.zeros((m, m)), np.eye(m))
    a0, b0 = (np.asarray(x, dtype=float) for x in init)
    if a0.shape != (m, m) or b0.shape != (m, m):
        raise DomainError(f"initial matrices must be {m}x{m}")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if grid is None:
        grid = np.linspace(t0, t1, 101)
    grid = np.asarray(grid, dtype=float)
    const = profile.constant

    def gen_at(t):
        r = profile.matrix(t)
        return np.block([[-sm.c1, -sm.c2], [r, sm.c1.T]])

    gen_const = gen_at(t0) if const else None

    def rhs(t, y):
        gen = gen_const if const else gen_at(t)
        return (y.reshape(m, 2 * m) @ gen).ravel()

    y0 = np.hstack([a0, b0]).ravel()
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise IntegrationError(f"frame integration failed: {sol.message}")
    ys = np.array([sol.sol(t).reshape(m, 2 * m) for t in grid])
    return FrameSolution(_readonly(grid), _readonly(ys[:, :, :m]), _readonly(ys[:, :, m:]),
                         sol.sol)


def detect_conjugate_time(profile, n=None, horizon=1.0, samples=4000):
    """First t in (0, horizon] with det B(t) = 0 for the vertical start A = I, B = 0.

    Zeros are bracketed by a sign change of det B and refined by Brent's method
    to 1e-8 relative.  A zero of even order does not change sign; those are
    caught by a scan of the smallest singular value of the rescaled B and then
    refined with a bounded minimization.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if n is None:
        n = profile.half_dim
    m = 2 * n + 1
    fs = solve_frame_forward(profile, n, (np.eye(m), np.zeros((m, m))), (0.0, horizon),
                             grid=np.array([horizon]), rtol=1e-13, atol=1e-30)

    def det_at(t):
        return float(np.linalg.det(fs.pair_at(t)[1]))

    ts = np.linspace(0.0, horizon, samples + 1)[1:]
    dets = np.array([det_at(t) for t in ts])
    ref = np.sign(dets[0])
    flips = np.nonzero(np.sign(dets) != ref)[0]
    if flips.size:
        i = flips[0]
        lo = ts[i - 1] if i > 0 else ts[0] * 1e-3
        if dets[i] == 0.0:
            return float(ts[i])
        root = brentq(det_at, lo, ts[i], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
        return float(root)
    # even-order zeros: sigma_min(B) / sigma_max(B) dips to ~0 without a sign change
    ratio = []
    for t in ts:
        sv = np.linalg.svd(fs.pair_at(t)[1], compute_uv=False)
        ratio.append(sv[-1] / sv[0])
    ratio = np.array(ratio)
    # near t = 0, B ~ t C2 + ..., so the ratio starts small; skip the initial ramp
    start = np.searchsorted(ts, 0.02 * horizon)
    idx = start + int(np.argmin(ratio[start:])) if start < ts.size else None
    if idx is not None and ratio[idx] < 1e-7 and 0 < idx < ts.size - 1:
        from scipy.optimize import minimize_scalar

        def smin(t):
            sv = np.linalg.svd(fs.pair_at(t)[1], compute_uv=False)
            return sv[-1] / sv[0]

        res = minimize_scalar(smin, bounds=(ts[idx - 1], ts[idx + 1]), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < 1e-9:
            return float(res.x)
    return None


@dataclass(frozen=True)
class TraceComparisonReport:
    grid: np.ndarray
    trace: np.ndarray
    trace_bound: np.ndarray
    det_b: np.ndarray
    det_bound: np.ndarray
    trace_violations: int
    det_violations: int
    tol: float

    @property
    def passed(self):
        return self.trace_violations == 0 and self.det_violations == 0

    def to_dict(self):
        return {
            "grid": self.grid.tolist(), "trace": self.trace.tolist(),
            "trace_bound": self.trace_bound.tolist(), "det_b": self.det_b.tolist(),
            "det_bound": self.det_bound.tolist(), "trace_violations": self.trace_violations,
            "det_violations": self.det_violations, "tol": self.tol, "passed": self.passed,
        }


def verify_trace_comparison(profile, n=None, k1=0.0, k2=0.0, grid=None, tol=1e-8,
                            method="rk"):
    """Check the decoupled trace bound and the integrated det B bound on ``grid``.

    Requires R_bb(t) >= k1 and tr R_cc(t) >= (2n-2) k2 at every grid time;
    R_cb is unconstrained.
    """
    if n is None:
        n = profile.half_dim
    if grid is None:
        grid = np.linspace(0.0, 0.99, 100)
    g = _check_grid(grid)
    q = 2 * n - 2
    for t in g:
        blk = profile.blocks(t)
        if blk.r_bb < k1 - tol * (1 + abs(k1)):
            raise PreconditionError(f"R_bb({t:g}) = {blk.r_bb:g} < k1 = {k1:g}")
        if q and np.trace(blk.r_cc) < q * k2 - tol * (1 + abs(q * k2)):
            raise PreconditionError(f"tr R_cc({t:g}) < (2n-2) k2")
    sol = solve_riccati_terminal(profile, n, g, method=method)
    bound = np.array([cmp.trace_bound_b(k1, t) + cmp.trace_bound_c(k2, t, q)
                      + cmp.trace_bound_last(t) for t in g])
    params = cmp.ComparisonParams(k1, k2, 2 * n + 1)
    det_bound = np.asarray(cmp.density_factor(params, 1.0, g), dtype=float)
    trace_viol = int(np.sum(sol.trace_c2s > bound + tol * (1.0 + np.abs(bound))))
    det_viol = int(np.sum(sol.det_b < det_bound - tol))
    return TraceComparisonReport(_readonly(g), sol.trace_c2s, _readonly(bound), sol.det_b,
                                 _readonly(det_bound), trace_viol, det_viol, tol)
