"""End-to-end checks of the contraction identities and inequalities."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import ndtri
from scipy.stats import qmc

from . import comparison as cmp
from . import kernels
from . import spaces as sp
from .errors import DomainError, MonteCarloPrecisionError, SingularDenominatorError
from .riccati import (
    CurvatureProfile,
    build_structure_matrices,
    solve_riccati_terminal,
    verify_trace_comparison,
)

EQUALITY_TOL = 1e-6
INEQUALITY_TOL = 1e-8
CURVATURE_DRIFT_TOL = 1e-9
GUARD = 0.95
CHUNK = 1 << 16


@dataclass
class ContractionReport:
    """det B(t) against the model density, one row per sampled geodesic."""

    space: str
    mode: str
    grid: np.ndarray
    samples: list
    measured: np.ndarray
    predicted: np.ndarray
    tol: float
    rejected: int = 0
    max_drift: tuple = (0.0, 0.0)
    set_level: dict = field(default_factory=dict)

    @property
    def max_abs_deviation(self):
        if self.measured.size == 0:
            return 0.0
        return float(np.max(np.abs(self.measured - self.predicted)))

    @property
    def violations(self):
        """Equality mode: samples off by more than tol.  Inequality: measured < predicted - tol."""
        if self.measured.size == 0:
            return 0
        if self.mode == "equality":
            bad = np.abs(self.measured - self.predicted) > self.tol
        else:
            bad = self.measured < self.predicted - self.tol
        return int(np.sum(np.any(bad, axis=1)))

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return {
            "space": self.space, "mode": self.mode, "grid": self.grid.tolist(),
            "samples": self.samples, "measured": self.measured.tolist(),
            "predicted": self.predicted.tolist(), "tol": self.tol, "rejected": self.rejected,
            "max_drift": list(self.max_drift), "set_level": self.set_level,
            "max_abs_deviation": self.max_abs_deviation, "violations": self.violations,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["space"], d["mode"], np.asarray(d["grid"], float), list(d["samples"]),
                   np.asarray(d["measured"], float).reshape(len(d["samples"]), -1),
                   np.asarray(d["predicted"], float).reshape(len(d["samples"]), -1),
                   float(d["tol"]), int(d.get("rejected", 0)),
                   tuple(d.get("max_drift", (0.0, 0.0))), dict(d.get("set_level", {})))


def _grid(grid):
    if grid is None:
        return np.linspace(0.0, 0.99, 100)
    return np.asarray(grid, dtype=float)


def _admissible(k1, k2, margin=1.0):
    """First-zero guard: sqrt(k1) < 2 pi and sqrt(k2) < pi (scaled by margin)."""
    ok = True
    if k1 > 0:
        ok &= math.sqrt(k1) < margin * 2.0 * math.pi
    if k2 > 0:
        ok &= math.sqrt(k2) < margin * math.pi
    return bool(ok)


def contraction_profile(space, terminal_state, grid=None, method="rk", flow=True):
    """det B(t) and the closed-form density along the geodesic ending at x0.

    ``terminal_state`` holds x0 and the covector p at x0: the geodesic is
    followed backwards from (x0, -p) for unit time to its start x, so that
    the contraction map runs from x to x0 with |p^h|^2 = d^2 and u0 read off
    the covector.  With ``flow`` the backward geodesic is integrated
    numerically, conservation drift is recorded and the curvature at both
    ends is compared.
    """
    g = _grid(grid)
    h = sp.hamiltonian(space, terminal_state)
    u0 = sp.reeb_momentum(space, terminal_state)
    k1, k2 = sp.mcp_params(space, terminal_state)
    drift = (0.0, 0.0)
    curv_end = sp.curvature_matrix(space, terminal_state)
    if flow:
        back = sp.PhaseState(terminal_state.x, -terminal_state.p)
        traj = sp.geodesic_flow(space, back, 1.0, tol=1e-13, method="numeric", n_out=11)
        drift = traj.drift()
        start = sp.PhaseState(traj.end.x, -traj.end.p)
        curv = sp.curvature_matrix(space, start)
        dev = np.max(np.abs(curv.assemble() - curv_end.assemble()))
        if dev > CURVATURE_DRIFT_TOL * (1.0 + np.max(np.abs(curv_end.assemble()))):
            raise DomainError(f"curvature matrix is not constant along the geodesic ({dev:g})")
    else:
        curv = curv_end
    sol = solve_riccati_terminal(CurvatureProfile.constant_from(curv), space.half_dim, g,
                                 method=method)
    params = cmp.ComparisonParams(k1, k2, 2 * space.half_dim + 1)
    pred = np.asarray(cmp.density_factor(params, 1.0, g), dtype=float)
    sample = {"x0": terminal_state.x.tolist(), "p": terminal_state.p.tolist(),
              "hamiltonian": h, "reeb_momentum": u0, "k1": k1, "k2": k2}
    return ContractionReport(space.kind.value, "equality", g, [sample],
                             np.array(sol.det_b)[None, :], pred[None, :], EQUALITY_TOL,
                             max_drift=drift)


def _merge(reports, space, mode, g, tol, rejected=0):
    samples = [s for r in reports for s in r.samples]
    meas = np.vstack([r.measured for r in reports]) if reports else np.zeros((0, g.size))
    pred = np.vstack([r.predicted for r in reports]) if reports else np.zeros((0, g.size))
    drift = (max([r.max_drift[0] for r in reports], default=0.0),
             max([r.max_drift[1] for r in reports], default=0.0))
    return ContractionReport(space, mode, g, samples, meas, pred, tol, rejected, drift)


def random_admissible_state(space, rng, margin=GUARD, max_dist=2.0):
    """A random terminal state whose geodesic stays inside the first-zero guard."""
    n = space.half_dim
    x0 = sp.random_point(space, rng)
    while True:
        direction = rng.standard_normal(2 * n)
        direction /= np.linalg.norm(direction)
        if space.is_heisenberg:
            d = rng.uniform(0.1, max_dist)
            u0 = rng.uniform(-1.0, 1.0) * margin * 2.0 * math.pi
        elif space.kind is sp.SpaceKind.HOPF:
            # sqrt(k1) = sqrt(4 d^2 + u0^2) uniform below the guard
            big_d = rng.uniform(0.2, margin * 2.0 * math.pi)
            phi = rng.uniform(0.0, 0.5 * math.pi)
            d = 0.5 * big_d * math.cos(phi)
            u0 = big_d * math.sin(phi) * rng.choice([-1.0, 1.0])
        else:
            d = rng.uniform(0.1, max_dist)
            u0 = rng.uniform(-1.0, 1.0) * margin * 2.0 * math.pi
        k1 = space.curvature_constants[0] * d * d + u0 * u0
        k2 = space.curvature_constants[1] * d * d + 0.25 * u0 * u0
        if _admissible(k1, k2, margin) and d > 0.05:
            break
    p = sp.covector_from_frame(space, x0, d * direction, u0)
    return sp.PhaseState(x0, p)


def model_equality_check(space, sample_size=50, grid=None, seed=0, method="rk", flow=True,
                         margin=GUARD):
    """Exact contraction identity det B = density on random admissible geodesics."""
    g = _grid(grid)
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    reports = [contraction_profile(space, random_admissible_state(space, rng, margin), g,
                                   method=method, flow=flow)
               for _ in range(int(sample_size))]
    return _merge(reports, space.kind.value, "equality", g, EQUALITY_TOL)


def _det_b_expm(k1, k2, n, g):
    """Normalized det B on the grid by the exact propagator of the constant system."""
    sm = build_structure_matrices(n)
    m = sm.size
    r = np.zeros((m, m))
    r[1, 1] = k1
    idx = np.arange(2, m - 1)
    r[idx, idx] = k2
    gen = np.block([[sm.c1, sm.c2], [-r, -sm.c1.T]])
    taus = np.concatenate([1.0 - g, [1.0]])
    b = scipy.linalg.expm(taus[:, None, None] * gen[None])[:, :m, m:]
    dets = np.linalg.det(b)
    return dets[:-1] / dets[-1], dets


def _sobol(dim, size, seed):
    eng = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng([seed, 1]))
    mexp = max(0, int(math.ceil(math.log2(max(size, 1)))))
    return eng.random_base2(mexp)[:size]


def mcp_inequality_check(target, k1, k2, sample_size=1000, grid=None, seed=0, radius=None,
                         u0_max=None, tol=INEQUALITY_TOL):
    """Check det B(t) >= density(k1, k2; d^2, t) along sampled geodesics.

    ``target`` is a ModelSpace (covectors drawn by scrambled Sobol points in
    {|p^h| <= radius, |u0| <= u0_max}; samples with a conjugate point before
    unit time are rejected and counted) or a CurvatureProfile (a single
    geodesic with d^2 = 1, checked through the trace comparison).
    The set-level inequality is aggregated as the mean over accepted
    samples, i.e. with the covector measure on the sampled box.
    """
    g = _grid(grid)
    if isinstance(target, CurvatureProfile):
        rep = verify_trace_comparison(target, target.half_dim, k1, k2, g, tol=tol)
        sample = {"profile": "user", "k1": k1, "k2": k2}
        out = ContractionReport("user_profile", "inequality", g, [sample], rep.det_b[None, :],
                                rep.det_bound[None, :], tol)
        out.set_level = _set_level(out)
        return out
    space = target
    n = space.half_dim
    if radius is None:
        radius = 1.0 if space.kind is sp.SpaceKind.HOPF else 2.0
    if u0_max is None:
        u0_max = 2.0 * math.pi
    # column 0: radius, columns 1..2n: direction, last column: u0
    pts = _sobol(2 * n + 2, int(sample_size), seed)
    gauss = ndtri(np.clip(pts[:, 1:2 * n + 1], 1e-12, 1.0 - 1e-12))
    gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
    rad = radius * pts[:, 0] ** (1.0 / (2 * n))
    coeffs = rad[:, None] * gauss
    u0s = (2.0 * pts[:, -1] - 1.0) * u0_max
    params = cmp.ComparisonParams(k1, k2, 2 * n + 1)
    kc1, kc2 = space.curvature_constants
    samples, meas, pred = [], [], []
    rejected = 0
    for c, u0 in zip(coeffs, u0s):
        d2 = float(c @ c)
        if d2 == 0.0:
            rejected += 1
            continue
        ks1 = kc1 * d2 + u0 * u0
        ks2 = kc2 * d2 + 0.25 * u0 * u0
        if not _admissible(ks1, ks2):
            rejected += 1
            continue
        det_b, raw = _det_b_expm(ks1, ks2, n, g)
        if np.any(raw <= 0.0):
            rejected += 1
            continue
        try:
            dens = np.asarray(cmp.density_factor(params, d2, g), dtype=float)
        except SingularDenominatorError:
            rejected += 1
            continue
        samples.append({"coeffs": c.tolist(), "reeb_momentum": float(u0), "dist_sq": d2})
        meas.append(det_b)
        pred.append(dens)
    meas = np.array(meas).reshape(-1, g.size)
    pred = np.array(pred).reshape(-1, g.size)
    out = ContractionReport(space.kind.value, "inequality", g, samples, meas, pred, tol, rejected)
    out.set_level = _set_level(out)
    return out


def _set_level(rep):
    if rep.measured.size == 0:
        return {"measured": [], "predicted": [], "holds": True}
    mean_m = rep.measured.mean(axis=0)
    mean_p = rep.predicted.mean(axis=0)
    return {"measured": mean_m.tolist(), "predicted": mean_p.tolist(),
            "holds": bool(np.all(mean_m >= mean_p - rep.tol))}


# --- doubling on the Heisenberg group -------------------------------------------

@dataclass
class DoublingReport:
    half_dim: int
    radius: float
    sample_size: int
    volume_r: float
    volume_2r: float
    stderr_r: float
    stderr_2r: float
    seed: int

    @property
    def ratio(self):
        return self.volume_2r / self.volume_r

    @property
    def expected(self):
        return 2.0 ** (2 * self.half_dim + 2)

    @property
    def ratio_rel_stderr(self):
        return math.hypot(self.stderr_r / self.volume_r, self.stderr_2r / self.volume_2r)

    @property
    def rel_error(self):
        return abs(self.ratio / self.expected - 1.0)

    def to_dict(self):
        return {
            "half_dim": self.half_dim, "radius": self.radius, "sample_size": self.sample_size,
            "volume_r": self.volume_r, "volume_2r": self.volume_2r, "stderr_r": self.stderr_r,
            "stderr_2r": self.stderr_2r, "seed": self.seed, "ratio": self.ratio,
            "expected": self.expected, "rel_error": self.rel_error,
            "ratio_rel_stderr": self.ratio_rel_stderr,
        }


def _ball_volume(dim, r):
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * r ** dim


def _chunk_jacobian_sum(n, radius, seed, stream, chunk_index, count):
    """Sum and sum of squares of |det d exp| over one deterministic chunk."""
    gen = np.random.Generator(np.random.Philox(key=[seed, stream]).jumped(chunk_index))
    dirs = gen.standard_normal((count, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rad = radius * gen.random(count) ** (1.0 / (2 * n))
    u = (2.0 * gen.random(count) - 1.0) * 2.0 * math.pi
    cov = np.empty((count, 2 * n + 1))
    cov[:, :2 * n] = rad[:, None] * dirs
    cov[:, 2 * n] = u
    steps = np.full(2 * n + 1, 1e-5 * radius)
    steps[-1] = 1e-5
    jac = kernels.heisenberg_jacobians(cov, steps)
    return float(np.sum(jac)), float(np.sum(jac * jac))


def heisenberg_ball_volume(n, radius, sample_size, seed, stream=0, workers=1, chunk=CHUNK):
    """Monte Carlo volume of the ball exp{|p^h| <= radius, |u0| < 2 pi} about the origin.

    Returns (volume, standard error).  Chunks use independent Philox
    substreams, so results do not depend on ``workers``.
    """
    sizes = [chunk] * (sample_size // chunk)
    if sample_size % chunk:
        sizes.append(sample_size % chunk)
    args = [(n, radius, seed, stream, i, c) for i, c in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _chunk_jacobian_sum(*a), args))
    else:
        parts = [_chunk_jacobian_sum(*a) for a in args]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / sample_size
    var = max(s2 / sample_size - mean * mean, 0.0) * sample_size / max(sample_size - 1, 1)
    box = _ball_volume(2 * n, radius) * 4.0 * math.pi
    return box * mean, box * math.sqrt(var / sample_size)


def doubling_check(space, radius=1.0, sample_size=10 ** 6, seed=0, precision=0.02, workers=1):
    """vol(B(2R)) / vol(B(R)) on the Heisenberg group by Monte Carlo.

    The two volumes use independent sample streams.  Raises
    MonteCarloPrecisionError if three standard errors of the ratio exceed
    ``precision`` (relative).
    """
    if not space.is_heisenberg:
        raise DomainError("doubling_check is implemented for the Heisenberg group")
    if not radius > 0:
        raise DomainError("radius must be positive")
    n = space.half_dim
    v1, e1 = heisenberg_ball_volume(n, radius, sample_size, seed, 0, workers)
    v2, e2 = heisenberg_ball_volume(n, 2 * radius, sample_size, seed, 1, workers)
    rep = DoublingReport(n, float(radius), int(sample_size), v1, v2, e1, e2, int(seed))
    if 3.0 * rep.ratio_rel_stderr > precision:
        raise MonteCarloPrecisionError(
            f"relative standard error {rep.ratio_rel_stderr:.3g} too large for precision "
            f"{precision:g}; increase sample_size")
    return rep
