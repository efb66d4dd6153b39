"""The three Sasakian model spaces: Heisenberg group, complex Hopf fibration and
anti-de Sitter space.

Heisenberg chart: x = (x_1..x_n, y_1..y_n, z) with orthonormal horizontal frame
X_i = d_{x_i} - y_i/2 d_z, Y_i = d_{y_i} + x_i/2 d_z and Reeb field v0 = d_z.

Hopf and anti-de Sitter live in the real-ified ambient space R^{2n+2} with
layout (x_1..x_{n+1}, y_1..y_{n+1}) for z = x + iy, multiplication by i
acting as (v_x, v_y) -> (-v_y, v_x) and the hermitian form <<v, w>> = v^T G w, where G = I
(Hopf) or G = diag(-1, .., -1, +1) on each half (anti-de Sitter).  The level
set <<z, z>> = 1 is the manifold, v0 = 2 J z, and the horizontal space is the
<<.,.>>-complement of span{z, Jz}.  With eta = +1 (Hopf) or -1 (anti-de
Sitter) the sub-Riemannian metric on the horizontal space is eta <<., .>>.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .errors import ConstraintError, DomainError, IntegrationError
from .riccati import CurvatureMatrix, CurvatureProfile

CONSTRAINT_TOL = 1e-10
REPROJECT_EVERY = 0.25


class SpaceKind(str, enum.Enum):
    HEISENBERG = "heisenberg"
    HOPF = "hopf"
    ANTI_DE_SITTER = "anti_de_sitter"


_CONSTANTS = {
    SpaceKind.HEISENBERG: (0.0, 0.0),
    SpaceKind.HOPF: (4.0, 1.0),
    SpaceKind.ANTI_DE_SITTER: (-4.0, -1.0),
}


@dataclass(frozen=True)
class ModelSpace:
    kind: SpaceKind
    half_dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SpaceKind(self.kind))
        if int(self.half_dim) != self.half_dim or self.half_dim < 1:
            raise DomainError(f"half_dim must be an integer >= 1, got {self.half_dim}")
        object.__setattr__(self, "half_dim", int(self.half_dim))

    @property
    def curvature_constants(self):
        return _CONSTANTS[self.kind]

    @property
    def is_heisenberg(self):
        return self.kind is SpaceKind.HEISENBERG

    @property
    def chart_dim(self):
        """Length of the coordinate vectors of a PhaseState."""
        return 2 * self.half_dim + 1 if self.is_heisenberg else 2 * self.half_dim + 2

    @property
    def eta(self):
        return -1.0 if self.kind is SpaceKind.ANTI_DE_SITTER else 1.0

    @property
    def j_sign(self):
        """Sign s with J = s * i on the horizontal space.

        With alpha0 = (1/2) sum(x dy - y dx) and v0 = 2iz the identity
        d alpha0(v, w) = <v, Jw> holds for J = -i on the sphere and J = +i on
        anti-de Sitter space.
        """
        return -1.0 if self.kind is SpaceKind.HOPF else 1.0

    def gram(self):
        """Diagonal of G for the ambient spaces."""
        n1 = self.half_dim + 1
        g = np.ones(n1)
        if self.kind is SpaceKind.ANTI_DE_SITTER:
            g[:-1] = -1.0
        return np.concatenate([g, g])

    def base_point(self):
        x = np.zeros(self.chart_dim)
        if not self.is_heisenberg:
            # z = e_{n+1}
            x[self.half_dim] = 1.0
        return x


@dataclass(frozen=True)
class PhaseState:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if x.shape != p.shape:
            raise DomainError("x and p must have the same length")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    def to_dict(self):
        return {"x": self.x.tolist(), "p": self.p.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x"], float), np.asarray(d["p"], float))


@dataclass(frozen=True)
class GeodesicTrajectory:
    times: np.ndarray
    states: tuple
    hamiltonian_values: np.ndarray
    reeb_momentum_values: np.ndarray

    def drift(self):
        """Max relative drift of (H, u0) from their initial values."""
        h0 = self.hamiltonian_values[0]
        u0 = self.reeb_momentum_values[0]
        dh = np.max(np.abs(self.hamiltonian_values - h0)) / max(abs(h0), 1e-300)
        du = np.max(np.abs(self.reeb_momentum_values - u0))
        du = du / abs(u0) if u0 != 0 else du
        return float(dh), float(du)

    @property
    def end(self):
        return self.states[-1]


# --- helpers for the ambient spaces ----------------------------------------------

def _cj(v):
    h = v.shape[-1] // 2
    return np.concatenate([-v[..., h:], v[..., :h]], axis=-1)


def _form(space, v, w):
    return float(np.dot(v * space.gram(), w))


def _check_state(space, state):
    if state.x.size != space.chart_dim:
        raise DomainError(f"{space.kind.value} state needs {space.chart_dim} coordinates, "
                          f"got {state.x.size}")
    if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.p))):
        raise DomainError("state must be finite")
    if not space.is_heisenberg:
        rho = _form(space, state.x, state.x)
        # on AdS <<z, z>> is a difference of terms of size |z|^2, so rounding scales with it
        if abs(rho - 1.0) > CONSTRAINT_TOL * float(state.x @ state.x):
            raise ConstraintError(f"constraint <<z, z>> = 1 violated: {rho!r}")


def _ambient_ab(space, z, p):
    gz = space.gram() * z
    rho = float(z @ gz)
    return rho, float(p @ z), float(p @ _cj(z))


def _horizontal_projection(space, z, v):
    """Remove the span{z, Jz} components of v with respect to <<., .>>."""
    g = space.gram()
    jz = _cj(z)
    rho = float(z @ (g * z))
    return v - (float(z @ (g * v)) * z + float(jz @ (g * v)) * jz) / rho


def reeb_field(space, x):
    if space.is_heisenberg:
        v = np.zeros(space.chart_dim)
        v[-1] = 1.0
        return v
    return 2.0 * _cj(np.asarray(x, float))


def horizontal_frame(space, x):
    """Rows X_1..X_n, Y_1..Y_n (Y_i = J X_i) of an orthonormal horizontal frame at x."""
    n = space.half_dim
    x = np.asarray(x, dtype=float)
    if space.is_heisenberg:
        frame = np.zeros((2 * n, 2 * n + 1))
        for i in range(n):
            frame[i, i] = 1.0
            frame[i, -1] = -0.5 * x[n + i]
            frame[n + i, n + i] = 1.0
            frame[n + i, -1] = 0.5 * x[i]
        return frame
    eta = space.eta
    xs = []
    for e in np.eye(space.chart_dim):
        v = _horizontal_projection(space, x, e)
        for u in xs:
            v = v - eta * _form(space, u, v) * u
            ju = _cj(u)
            v = v - eta * _form(space, ju, v) * ju
        nrm = eta * _form(space, v, v)
        if nrm > 1e-8:
            xs.append(v / math.sqrt(nrm))
        if len(xs) == n:
            break
    if len(xs) < n:
        raise ConstraintError("could not build a horizontal frame at this point")
    xs = np.array(xs)
    return np.vstack([xs, space.j_sign * _cj(xs)])


def complex_structure(space, x, v):
    """J: rotation by i on the horizontal part, J v0 = 0."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    if space.is_heisenberg:
        n = space.half_dim
        frame = horizontal_frame(space, x)
        a = v[:n]
        b = v[n:2 * n]
        return a @ frame[n:] - b @ frame[:n]
    return space.j_sign * _cj(_horizontal_projection(space, x, v))


def alpha0(space, x, v):
    """Contact form: alpha0(v0) = 1, alpha0 = 0 on horizontal vectors."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    if space.is_heisenberg:
        n = space.half_dim
        return float(v[-1] + 0.5 * (x[n:2 * n] @ v[:n] - x[:n] @ v[n:2 * n]))
    return 0.5 * _form(space, _cj(x), v)


def riemannian_metric(space, x, v, w):
    """Sasakian Riemannian metric: horizontal metric plus alpha0 (x) alpha0."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    if space.is_heisenberg:
        n = space.half_dim
        hor = float(v[:2 * n] @ w[:2 * n])
    else:
        vh = _horizontal_projection(space, x, v)
        wh = _horizontal_projection(space, x, w)
        hor = space.eta * _form(space, vh, wh)
    return hor + alpha0(space, x, v) * alpha0(space, x, w)


def frame_pairings(space, x, p):
    """(p(X_i), p(Y_i)) for the orthonormal frame of :func:`horizontal_frame`."""
    return horizontal_frame(space, x) @ np.asarray(p, float)


def hamiltonian(space, state):
    """H = (1/2) sum_i p(X_i)^2 + p(Y_i)^2."""
    _check_state(space, state)
    if space.is_heisenberg:
        return 0.5 * float(np.sum(frame_pairings(space, state.x, state.p) ** 2))
    rho, a, b = _ambient_ab(space, state.x, state.p)
    g = space.gram()
    return 0.5 * space.eta * (float(state.p @ (g * state.p)) - (a * a + b * b) / rho)


def reeb_momentum(space, state):
    """u0 = p(v0)."""
    _check_state(space, state)
    return float(state.p @ reeb_field(space, state.x))


def covector_from_horizontal(space, x, v_h, u0):
    """The covector p with p(X) = <v_h, X> on horizontal X and p(v0) = u0."""
    x = np.asarray(x, float)
    v_h = np.asarray(v_h, float)
    if space.is_heisenberg:
        n = space.half_dim
        p = np.empty(2 * n + 1)
        p[:n] = v_h[:n] + 0.5 * x[n:2 * n] * u0
        p[n:2 * n] = v_h[n:2 * n] - 0.5 * x[:n] * u0
        p[-1] = u0
        return p
    g = space.gram()
    v = _horizontal_projection(space, x, v_h)
    return space.eta * g * v + 0.5 * u0 * g * _cj(x)


def covector_from_frame(space, x, coeffs, u0):
    """Covector whose horizontal part is sum coeffs_i (X_i, Y_i) in the frame at x."""
    frame = horizontal_frame(space, x)
    return covector_from_horizontal(space, x, np.asarray(coeffs, float) @ frame, u0)


def random_point(space, rng, spread=1.0):
    """A random point of the space (chart coordinates)."""
    n = space.half_dim
    if space.is_heisenberg:
        return spread * rng.standard_normal(2 * n + 1)
    n1 = n + 1
    if space.kind is SpaceKind.HOPF:
        v = rng.standard_normal(2 * n1)
        return v / np.linalg.norm(v)
    # z_{n+1} = cosh(r) e^{i theta}, (z_1..z_n) = sinh(r) omega with |omega| = 1
    r = spread * abs(rng.standard_normal())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    om = rng.standard_normal(2 * n)
    om /= np.linalg.norm(om)
    x = np.zeros(2 * n1)
    x[:n] = math.sinh(r) * om[:n]
    x[n1:n1 + n] = math.sinh(r) * om[n:]
    x[n] = math.cosh(r) * math.cos(theta)
    x[n1 + n] = math.cosh(r) * math.sin(theta)
    return x


# --- geodesic flow ----------------------------------------------------------------

def _heisenberg_exact(space, state, times):
    n = space.half_dim
    x0 = state.x
    u0 = float(state.p[-1])
    hp = frame_pairings(space, x0, state.p)
    w0 = hp[:n] + 1j * hp[n:]
    zeta0 = x0[:n] + 1j * x0[n:2 * n]
    out = []
    for t in times:
        theta = u0 * t
        g_re, g_im, q = kernels._g_q_numpy(np.array([theta]))
        g = t * (g_re[0] + 1j * g_im[0])
        ez = np.exp(1j * theta)
        w = w0 * ez
        zeta = zeta0 + w0 * g
        zt = x0[-1] + 0.5 * float(np.sum(np.imag(np.conj(zeta0) * w0 * g))
                                  + np.sum(np.abs(w0) ** 2) * t * t * q[0])
        x = np.concatenate([zeta.real, zeta.imag, [zt]])
        p = np.concatenate([w.real + 0.5 * zeta.imag * u0, w.imag - 0.5 * zeta.real * u0, [u0]])
        out.append(PhaseState(x, p))
    return out


def _heisenberg_rhs(n):
    def rhs(t, y):
        x = y[:n]
        yy = y[n:2 * n]
        px = y[2 * n + 1:3 * n + 1]
        py = y[3 * n + 1:4 * n + 1]
        pz = y[4 * n + 1]
        hx = px - 0.5 * yy * pz
        hy = py + 0.5 * x * pz
        dz = 0.5 * float(x @ hy - yy @ hx)
        return np.concatenate([hx, hy, [dz], -0.5 * pz * hy, 0.5 * pz * hx, [0.0]])
    return rhs


def _ambient_rhs(space):
    g = space.gram()
    eta = space.eta

    def rhs(t, y):
        h = y.size // 2
        z = y[:h]
        p = y[h:]
        jz = _cj(z)
        rho = float(z @ (g * z))
        a = float(p @ z)
        b = float(p @ jz)
        zd = eta * (g * p - (a * z + b * jz) / rho)
        pd = eta * ((a * p - b * _cj(p)) / rho - (a * a + b * b) * (g * z) / (rho * rho))
        return np.concatenate([zd, pd])
    return rhs


def _reproject(space, z, p):
    g = space.gram()
    rho = float(z @ (g * z))
    if not rho > 0:
        raise ConstraintError("reprojection failed: <<z, z>> is not positive")
    p = p - (float(p @ z) / rho) * (g * z)
    return z / math.sqrt(rho), p


def geodesic_flow(space, state, T=1.0, tol=1e-12, method=None, n_out=101):
    """Integrate the normal geodesic flow e^{tH} from ``state`` for time T.

    ``method`` is "exact" (closed form, Heisenberg only and the default there)
    or "numeric" (DOP853; ambient spaces reproject onto the constraint at
    segment boundaries).
    """
    _check_state(space, state)
    if method is None:
        method = "exact" if space.is_heisenberg else "numeric"
    times = np.linspace(0.0, T, int(n_out))
    if method == "exact":
        if not space.is_heisenberg:
            raise DomainError("closed-form flow is available for the Heisenberg group only")
        states = _heisenberg_exact(space, state, times)
    elif method == "numeric":
        states = _numeric_flow(space, state, times, tol)
    else:
        raise DomainError(f"unknown method {method!r}")
    ham = np.array([hamiltonian(space, s) for s in states])
    reeb = np.array([reeb_momentum(space, s) for s in states])
    return GeodesicTrajectory(times, tuple(states), ham, reeb)


def _numeric_flow(space, state, times, tol):
    atol = tol * 1e-3
    if space.is_heisenberg:
        rhs = _heisenberg_rhs(space.half_dim)
        sol = solve_ivp(rhs, (times[0], times[-1]), np.concatenate([state.x, state.p]),
                        method="DOP853", rtol=tol, atol=atol, t_eval=times)
        if not sol.success:
            raise IntegrationError(sol.message)
        m = space.chart_dim
        return [PhaseState(y[:m], y[m:]) for y in sol.y.T]
    rhs = _ambient_rhs(space)
    m = space.chart_dim
    z, p = _reproject(space, state.x.copy(), state.p.copy())
    T = times[-1]
    nseg = max(1, int(math.ceil(abs(T) / REPROJECT_EVERY)))
    edges = np.linspace(times[0], T, nseg + 1)
    out = []
    for i in range(nseg):
        lo, hi = edges[i], edges[i + 1]
        last = i == nseg - 1
        sel = times[(times >= lo) & ((times <= hi) if last else (times < hi))]
        sol = solve_ivp(rhs, (lo, hi), np.concatenate([z, p]), method="DOP853", rtol=tol,
                        atol=atol, dense_output=True)
        if not sol.success:
            raise IntegrationError(sol.message)
        for t in sel:
            y = sol.sol(t)
            zz, pp = _reproject(space, y[:m], y[m:])
            out.append(PhaseState(zz, pp))
        z, p = _reproject(space, sol.y[:m, -1], sol.y[m:, -1])
    return out


def exponential_map(space, x, p, T=1.0, method=None):
    """Endpoint of the geodesic with initial covector p at x after time T."""
    traj = geodesic_flow(space, PhaseState(x, p), T, method=method, n_out=2)
    return traj.end


# --- curvature --------------------------------------------------------------------

def _require_motion(h):
    if not h > 0:
        raise DomainError("curvature matrix is undefined for H = 0 (no horizontal motion)")


def mcp_params(space, state):
    """(k1, k2) of the exact contraction identity along the geodesic of ``state``."""
    h = hamiltonian(space, state)
    if h < 0:
        raise DomainError("H must be non-negative")
    u0 = reeb_momentum(space, state)
    c1, c2 = space.curvature_constants
    return c1 * 2.0 * h + u0 * u0, c2 * 2.0 * h + 0.25 * u0 * u0


def curvature_matrix(space, state):
    """Constant curvature matrix along the geodesic through ``state``."""
    h = hamiltonian(space, state)
    _require_motion(h)
    k1, k2 = mcp_params(space, state)
    q = 2 * space.half_dim - 2
    return CurvatureMatrix(k1, np.zeros(q), k2 * np.eye(q), space.half_dim)


def curvature_profile(space, state):
    return CurvatureProfile.constant_from(curvature_matrix(space, state))


def user_curvature_profile(callback, half_dim, d_sq=1.0, u0=0.0, direction=None):
    """Wrap Tanaka-Webster curvature data into a CurvatureProfile.

    ``callback(v, u0)`` receives a unit horizontal vector v (length 2n, frame
    coordinates) and the Reeb momentum and returns ``(hol, cross, block)``:
    hol = <Rm*(Jv, v) v, Jv>, cross the length 2n-2 row <Rm*(w_i, v) v, Jv> and
    block the (2n-2) square <Rm*(w_i, v) v, w_j>.  The curvature matrix along a
    geodesic with |p^h|^2 = d_sq is then

        R_bb = d_sq hol + u0^2,  R_cb = d_sq cross,  R_cc = d_sq block + u0^2/4 I.

    ``direction`` is a fixed unit vector or a callable t -> unit vector.
    """
    n = int(half_dim)
    q = 2 * n - 2
    if direction is None:
        direction = np.eye(2 * n)[0]

    def blocks(t):
        v = direction(t) if callable(direction) else direction
        hol, cross, block = callback(np.asarray(v, float), u0)
        cross = np.asarray(cross, float).reshape(q)
        block = np.asarray(block, float).reshape(q, q)
        return CurvatureMatrix(d_sq * hol + u0 * u0, d_sq * cross,
                               d_sq * block + 0.25 * u0 * u0 * np.eye(q), n)

    constant = not callable(direction)
    prof = CurvatureProfile(blocks, n, constant=constant)
    prof.blocks(0.0)
    return prof


def model_curvature_callback(space):
    """Callback for :func:`user_curvature_profile` returning the model constants."""
    k1, k2 = space.curvature_constants
    q = 2 * space.half_dim - 2

    def callback(v, u0):
        return k1, np.zeros(q), k2 * np.eye(q)
    return callback
