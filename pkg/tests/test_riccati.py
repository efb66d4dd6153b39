import math

import numpy as np
import pytest
from conftest import bordered, random_symmetric

from sasakian_mcp import comparison as cmp
from sasakian_mcp import spaces
from sasakian_mcp.errors import (
    BlowUpError,
    DomainError,
    NonSymmetricProfileError,
    PreconditionError,
)
from sasakian_mcp.riccati import (
    CurvatureMatrix,
    CurvatureProfile,
    RiccatiSolution,
    build_structure_matrices,
    detect_conjugate_time,
    riccati_residual,
    solve_frame_forward,
    solve_riccati_terminal,
    verify_trace_comparison,
    volume_distortion,
)

GRID = np.linspace(0.0, 0.99, 100)


def random_profile(rng, n, low=-5.0, high=5.0):
    return CurvatureProfile.constant_from(bordered(random_symmetric(rng, 2 * n - 1, low, high)))


def heisenberg_profile(n, u0):
    q = 2 * n - 2
    return CurvatureProfile.constant_from(CurvatureMatrix(u0 * u0, np.zeros(q),
                                                          0.25 * u0 * u0 * np.eye(q), n))


# --- structure matrices ---------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_structure_invariants(n):
    sm = build_structure_matrices(n)
    m = 2 * n + 1
    assert sm.c1.shape == sm.c2.shape == (m, m)
    assert np.count_nonzero(sm.c1) == 1 and sm.c1[0, 1] == 1.0
    np.testing.assert_array_equal(np.diag(sm.c2), [0.0] + [1.0] * (2 * n))
    np.testing.assert_array_equal(sm.c2, np.diag(np.diag(sm.c2)))
    assert np.linalg.matrix_rank(sm.c2) == 2 * n
    np.testing.assert_array_equal(sm.c2 @ sm.c2, sm.c2)
    np.testing.assert_array_equal(sm.c1 @ sm.c2, sm.c1)
    np.testing.assert_array_equal(sm.c2 @ sm.c1.T, sm.c1.T)


def test_structure_n1_example():
    sm = build_structure_matrices(1)
    np.testing.assert_array_equal(sm.c1, [[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(sm.c2, np.diag([0, 1, 1]))


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_structure_bad_n(n):
    with pytest.raises(DomainError):
        build_structure_matrices(n)


# --- curvature matrix types ------------------------------------------------------------

def test_curvature_matrix_border_and_roundtrip(rng):
    curv = CurvatureMatrix(1.5, rng.standard_normal(4), random_symmetric(rng, 4), 3)
    r = curv.assemble()
    assert r.shape == (7, 7)
    assert np.all(r[0] == 0) and np.all(r[:, 0] == 0) and np.all(r[-1] == 0) and np.all(r[:, -1] == 0)
    np.testing.assert_array_equal(r, r.T)
    back = CurvatureMatrix.from_matrix(r)
    np.testing.assert_array_equal(back.assemble(), r)
    again = CurvatureMatrix.from_dict(curv.to_dict())
    np.testing.assert_array_equal(again.assemble(), r)


def test_curvature_matrix_rejects_asymmetric():
    with pytest.raises(NonSymmetricProfileError):
        CurvatureMatrix(0.0, np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]), 2)
    r = np.zeros((5, 5))
    r[1, 2] = 1.0
    with pytest.raises(NonSymmetricProfileError):
        CurvatureMatrix.from_matrix(r)


def test_curvature_matrix_rejects_border():
    r = np.zeros((5, 5))
    r[0, 0] = 1.0
    with pytest.raises(DomainError):
        CurvatureMatrix.from_matrix(r)


def test_asymmetric_profile_is_reported_by_solver():
    prof = CurvatureProfile(lambda t: np.array([[0, 0, 0, 0, 0], [0, 1, 0.5, 0, 0],
                                                [0, 0, 1, 0, 0], [0, 0, 0, 1, 0],
                                                [0, 0, 0, 0, 0]], float), 2)
    with pytest.raises(NonSymmetricProfileError):
        solve_riccati_terminal(prof, 2, GRID)


def test_constant_profile_is_constant(rng):
    prof = random_profile(rng, 2)
    np.testing.assert_array_equal(prof.matrix(0.0), prof.matrix(0.7))


# --- terminal Riccati problem ---------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_flat_closed_forms(n):
    sol = solve_riccati_terminal(CurvatureProfile.flat(n), n, GRID)
    np.testing.assert_allclose(sol.trace_c2s, (2 * n + 3) / (1 - GRID), rtol=1e-11)
    np.testing.assert_allclose(sol.det_b, (1 - GRID) ** (2 * n + 3), rtol=1e-11)


def test_flat_n1_trace_example():
    sol = solve_riccati_terminal(CurvatureProfile.flat(1), 1, np.array([0.0, 0.5]))
    assert sol.trace_c2s[0] == pytest.approx(5.0, rel=1e-12)
    assert sol.trace_c2s[1] == pytest.approx(10.0, rel=1e-12)


# Lambda(1 - t) is finite only while sqrt(k)(1 - t) < pi/2
@pytest.mark.parametrize("k1,k2,n", [(1.0, 0.25, 2), (2.4, 2.0, 3), (2.2, 0.5, 1), (-3.0, 2.4, 2)])
def test_comparison_equality(k1, k2, n):
    sol = solve_riccati_terminal(CurvatureProfile.comparison(k1, k2, n), n, GRID)
    spec = cmp.ComparisonMatrixSpec(k1, k2, n)
    for t, s in zip(GRID, sol.s_values):
        gamma = np.linalg.inv(cmp.lambda_closed_form(spec, 1 - t))
        assert np.max(np.abs(s - gamma)) <= 1e-8 * (1 + np.max(np.abs(gamma)))


def test_solution_invariants(rng):
    for n in (1, 2, 3):
        prof = random_profile(rng, n)
        sol = solve_riccati_terminal(prof, n, GRID)
        assert isinstance(sol, RiccatiSolution)
        for s in sol.s_values:
            assert np.max(np.abs(s - s.T)) <= 1e-9 * (1 + np.linalg.norm(s))
        assert sol.det_b[0] == 1.0
        assert np.all(sol.det_b > 0)
        with pytest.raises(ValueError):
            sol.det_b[0] = 2.0


def test_log_det_matches_trace_integral(rng):
    prof = random_profile(rng, 2)
    sol = solve_riccati_terminal(prof, 2, GRID)
    vd = volume_distortion(sol)
    np.testing.assert_allclose([d for _, d in vd], sol.det_b, rtol=1e-9)


def test_residual_bound(rng):
    for n in (1, 2, 3):
        prof = random_profile(rng, n)
        sol = solve_riccati_terminal(prof, n, GRID)
        for t, s in zip(GRID, sol.s_values):
            assert riccati_residual(sol, prof, t) <= 1e-7 * (1 + np.linalg.norm(s) ** 2)


def test_time_dependent_profile_residual():
    n = 2

    def func(t):
        return CurvatureMatrix(1.0 + math.sin(3 * t), np.array([0.3 * t, 0.0]),
                               np.array([[0.5, 0.2 * t], [0.2 * t, -1.0]]), n)

    prof = CurvatureProfile(func, n)
    sol = solve_riccati_terminal(prof, n, GRID)
    for t, s in zip(GRID[::7], sol.s_values[::7]):
        assert riccati_residual(sol, prof, t) <= 1e-7 * (1 + np.linalg.norm(s) ** 2)


def test_expm_matches_rk(rng):
    for n in (1, 2, 3):
        prof = random_profile(rng, n)
        a = solve_riccati_terminal(prof, n, GRID, method="rk")
        b = solve_riccati_terminal(prof, n, GRID, method="expm")
        np.testing.assert_allclose(a.det_b, b.det_b, rtol=1e-9)
        np.testing.assert_allclose(a.trace_c2s, b.trace_c2s, rtol=1e-9)


def test_expm_rejects_time_dependent():
    prof = CurvatureProfile(lambda t: CurvatureMatrix(t, [], np.zeros((0, 0)), 1), 1)
    with pytest.raises(DomainError):
        solve_riccati_terminal(prof, 1, GRID, method="expm")


def test_blow_up_detected():
    # Heisenberg data with u0 = 7 > 2 pi: conjugate point at t = 1 - 2 pi / 7
    with pytest.raises(BlowUpError) as info:
        solve_riccati_terminal(heisenberg_profile(1, 7.0), 1, GRID)
    assert info.value.time == pytest.approx(1 - 2 * math.pi / 7, abs=1e-8)


@pytest.mark.parametrize("grid", [[0.2, 0.1], [0.0, 0.999999999], [-0.1, 0.5], [],
                                  [0.0, float("nan")]])
def test_grid_validation(grid):
    with pytest.raises(DomainError):
        solve_riccati_terminal(CurvatureProfile.flat(1), 1, np.array(grid, float))


def test_size_mismatch():
    with pytest.raises(DomainError):
        solve_riccati_terminal(CurvatureProfile.flat(2), 3, GRID)


def test_grid_choice_does_not_change_values(rng):
    prof = random_profile(rng, 2)
    fine = solve_riccati_terminal(prof, 2, GRID)
    coarse = solve_riccati_terminal(prof, 2, GRID[::11])
    np.testing.assert_allclose(coarse.det_b, fine.det_b[::11], rtol=1e-10)


def test_small_time_expansion(rng):
    n = 2
    r = bordered(random_symmetric(rng, 2 * n - 1, -3, 3))
    prof = CurvatureProfile.constant_from(r)
    sol = solve_riccati_terminal(prof, n, GRID)
    sm = build_structure_matrices(n)

    def remainder(tau):
        series = (tau * sm.c2 - tau ** 2 / 2 * (sm.c1 + sm.c1.T)
                  + tau ** 3 / 3 * (sm.c1 @ sm.c1.T + sm.c2 @ r @ sm.c2))
        return np.max(np.abs(sol.u_at(tau) - series))

    for tau in (1e-2, 1e-3):
        assert remainder(2 * tau) / remainder(tau) == pytest.approx(16.0, rel=0.05)


def test_monotone_comparison(rng):
    for i in range(20):
        n = 1 + i % 3
        q = 2 * n - 1
        r2 = random_symmetric(rng, q, -3, 3)
        delta = random_symmetric(rng, q, 0, 3)
        s1 = solve_riccati_terminal(CurvatureProfile.constant_from(bordered(r2 + delta)), n, GRID)
        s2 = solve_riccati_terminal(CurvatureProfile.constant_from(bordered(r2)), n, GRID)
        for a, b in zip(s1.s_values, s2.s_values):
            gap = np.linalg.eigvalsh(b - a)
            assert gap.min() >= -1e-8 * (1 + np.abs(b).max())


# --- volume distortion -------------------------------------------------------------------

def test_volume_distortion_constant_trace():
    c = 2.5
    stub = RiccatiSolution(np.linspace(0, 0.9, 10), np.zeros((10, 3, 3)), np.full(10, c),
                           np.ones(10), 1, None)
    stub = _with_trace(stub, lambda t: c)
    out = volume_distortion(stub)
    assert out[0] == (0.0, 1.0)
    for t, d in out:
        assert d == pytest.approx(math.exp(-c * t), rel=1e-13)


def _with_trace(sol, fn):
    class Stub:
        grid = sol.grid

        @staticmethod
        def trace_at(t):
            return fn(t)

    return Stub()


@pytest.mark.parametrize("n", [1, 2, 3])
def test_volume_distortion_flat(n):
    sol = solve_riccati_terminal(CurvatureProfile.flat(n), n, GRID)
    for t, d in volume_distortion(sol):
        assert d == pytest.approx((1 - t) ** (2 * n + 3), rel=1e-9)


@pytest.mark.parametrize("u0", [0.5, math.pi, 5.0])
def test_volume_distortion_heisenberg_closed_form(u0):
    space = spaces.ModelSpace("heisenberg", 2)
    p = spaces.covector_from_frame(space, space.base_point(), [1, 0, 0, 0], u0)
    state = spaces.PhaseState(space.base_point(), p)
    sol = solve_riccati_terminal(spaces.curvature_profile(space, state), 2, GRID)
    k1, k2 = spaces.mcp_params(space, state)
    pred = cmp.density_factor(cmp.ComparisonParams(k1, k2, 5), 1.0, GRID)
    np.testing.assert_allclose([d for _, d in volume_distortion(sol)], pred, rtol=0, atol=1e-6)


# --- forward frame -------------------------------------------------------------------------

def test_frame_flat_from_identity():
    # A stays 0; the B C1^T term shears B = I + t C1^T, so only det B = 1 is stationary
    sm = build_structure_matrices(2)
    fs = solve_frame_forward(CurvatureProfile.flat(2), 2, (np.zeros((5, 5)), np.eye(5)))
    np.testing.assert_allclose(fs.a_values, 0.0, atol=1e-15)
    expect = np.eye(5) + fs.grid[:, None, None] * sm.c1.T
    np.testing.assert_allclose(fs.b_values, expect, atol=1e-13)
    np.testing.assert_allclose(fs.det_b, 1.0, rtol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_frame_flat_det(n):
    sol = solve_riccati_terminal(CurvatureProfile.flat(n), n, GRID)
    m = 2 * n + 1
    fs = solve_frame_forward(CurvatureProfile.flat(n), n, (sol.s_values[0], np.eye(m)),
                             grid=GRID)
    np.testing.assert_allclose(fs.det_b, (1 - GRID) ** (2 * n + 3), rtol=1e-8)


def test_frame_relation_a_equals_b_s(rng):
    prof = random_profile(rng, 2)
    sol = solve_riccati_terminal(prof, 2, GRID)
    fs = solve_frame_forward(prof, 2, (sol.s_values[0], np.eye(5)), grid=GRID)
    for s, a, b in zip(sol.s_values[::9], fs.a_values[::9], fs.b_values[::9]):
        # S = B^{-1} A
        np.testing.assert_allclose(a, b @ s, rtol=1e-7, atol=1e-7 * np.abs(a).max())


def test_frame_bad_init():
    with pytest.raises(DomainError):
        solve_frame_forward(CurvatureProfile.flat(1), 1, (np.eye(2), np.eye(2)))


def test_two_route_consistency(rng):
    worst = 0.0
    for i in range(50):
        n = 1 + i % 3
        prof = random_profile(rng, n)
        sol = solve_riccati_terminal(prof, n, GRID)
        vd = np.array([d for _, d in volume_distortion(sol)])
        fs = solve_frame_forward(prof, n, (sol.s_values[0], np.eye(2 * n + 1)), grid=GRID)
        worst = max(worst, np.max(np.abs(fs.det_b / vd - 1)))
    assert worst <= 1e-6


# --- conjugate times ---------------------------------------------------------------------------

def test_conjugate_flat_none():
    assert detect_conjugate_time(CurvatureProfile.flat(2), 2, horizon=5.0) is None
    assert detect_conjugate_time(heisenberg_profile(1, 0.0), 1, horizon=20.0) is None


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("u0", [math.pi, 2 * math.pi, 4 * math.pi])
def test_conjugate_heisenberg(n, u0):
    t = detect_conjugate_time(heisenberg_profile(n, u0), n, horizon=1.5)
    expect = 2 * math.pi / u0
    if expect > 1.5:
        assert t is None
    else:
        assert t == pytest.approx(expect, rel=1e-8)


def test_conjugate_example_quarter_turn():
    assert detect_conjugate_time(heisenberg_profile(1, 4 * math.pi), 1) == pytest.approx(0.5,
                                                                                         rel=1e-8)


def test_conjugate_matches_fine_bracketing_oracle():
    prof = heisenberg_profile(2, 9.0)
    fs = solve_frame_forward(prof, 2, (np.eye(5), np.zeros((5, 5))), (0.0, 1.0),
                             grid=np.linspace(1e-3, 1.0, 20001))
    dets = fs.det_b
    i = np.nonzero(np.sign(dets) != np.sign(dets[0]))[0][0]
    bracket = (fs.grid[i - 1], fs.grid[i])
    t = detect_conjugate_time(prof, 2)
    assert bracket[0] <= t <= bracket[1]


def test_conjugate_bad_horizon():
    with pytest.raises(DomainError):
        detect_conjugate_time(CurvatureProfile.flat(1), 1, horizon=0.0)


# --- trace comparison --------------------------------------------------------------------------

@pytest.mark.parametrize("k1,k2", [(1.0, 0.25), (-2.0, -1.0), (0.0, 0.0), (9.0, 2.0)])
def test_trace_comparison_equality(k1, k2):
    rep = verify_trace_comparison(CurvatureProfile.comparison(k1, k2, 2), 2, k1, k2, GRID)
    assert rep.passed
    np.testing.assert_allclose(rep.trace, rep.trace_bound, rtol=1e-8)
    np.testing.assert_allclose(rep.det_b, rep.det_bound, rtol=0, atol=1e-8)


def test_trace_comparison_strict():
    k1, k2, n = 1.0, 0.5, 2

    def func(t):
        return CurvatureMatrix(k1 + abs(math.sin(t)), np.zeros(2), (k2 + 0.1) * np.eye(2), n)

    rep = verify_trace_comparison(CurvatureProfile(func, n), n, k1, k2, GRID)
    assert rep.passed
    assert np.all(rep.trace < rep.trace_bound)
    assert np.all(rep.det_b[1:] > rep.det_bound[1:])


def test_trace_comparison_ignores_coupling():
    rng = np.random.default_rng(7)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = 2 + seed % 2
        q = 2 * n - 2
        k1, k2 = rng.uniform(-2, 6), rng.uniform(-1, 2)
        r_cc = random_symmetric(rng, q, -3, 3)
        r_cc += (k2 - np.trace(r_cc) / q + rng.uniform(0, 1)) * np.eye(q)
        curv = CurvatureMatrix(k1 + rng.uniform(0, 2), rng.uniform(-2, 2, q), r_cc, n)
        rep = verify_trace_comparison(CurvatureProfile.constant_from(curv), n, k1, k2, GRID)
        assert rep.passed, seed


def test_trace_comparison_precondition():
    with pytest.raises(PreconditionError):
        verify_trace_comparison(CurvatureProfile.comparison(1.0, 1.0, 2), 2, 2.0, 0.0, GRID)
    with pytest.raises(PreconditionError):
        verify_trace_comparison(CurvatureProfile.comparison(1.0, 1.0, 2), 2, 0.0, 2.0, GRID)


def test_trace_comparison_report_dict():
    rep = verify_trace_comparison(CurvatureProfile.flat(1), 1, 0.0, 0.0, GRID[:5])
    d = rep.to_dict()
    assert d["passed"] is True and len(d["trace"]) == 5
