import math

import numpy as np
import pytest

from kirchhoff_qp.errors import BadParameter, ConfigError
from kirchhoff_qp.fourier import TorusFunction as TF, sobolev_norm
from kirchhoff_qp.kirchhoff import ProblemData, forcing_preset, full_residual, recover_v0, residual
from kirchhoff_qp.nash_moser import (
    ExponentSet, build_truncated_L, check_exponents, initial_state, newton_step,
    perturb_lambda_invertibility, scale, solve,
)

ES = ExponentSet.greedy(1, 1)


@pytest.fixture(scope="module")
def baseline_run(baseline):
    return solve(baseline, 1.0, ES, N0=8, max_steps=6, tol=0.0, box=(16, 16))


# -- exponents ----------------------------------------------------------------
def test_greedy_feasible():
    ok, v = check_exponents(ES)
    assert ok, v
    assert (ES.tau, ES.delta, ES.s0, ES.s1, ES.sigma) == (1.0, 0.1, 2.0, 7.0, 4.0)
    assert ES.frak_a == pytest.approx(1.7)


@pytest.mark.parametrize("nu,d", [(1, 1), (2, 1), (1, 2), (3, 2)])
def test_greedy_feasible_other_dims(nu, d):
    assert check_exponents(ExponentSet.greedy(nu, d))[0]


def test_delta_out_of_range():
    es = ExponentSet(**{**ES.to_dict(), "delta": 0.4})
    ok, v = check_exponents(es)
    assert not ok and "delta in (0, 1/3)" in v


def test_all_zero():
    ok, v = check_exponents(ExponentSet(*([0.0] * 9)))
    assert not ok and len(v) >= 4


def test_solve_refuses_bad_exponents(baseline):
    es = ExponentSet(**{**ES.to_dict(), "delta": 0.4})
    with pytest.raises(ConfigError):
        solve(baseline, 1.0, es)


# -- scale -------------------------------------------------------------------
@pytest.mark.parametrize("N0,n,want", [(8, 0, 8.0), (4, 1, 8.0), (10, 2, 10 ** 2.25)])
def test_scale(N0, n, want):
    assert scale(N0, n) == pytest.approx(want)


@pytest.mark.parametrize("N0,n", [(1, 0), (4, -1)])
def test_scale_invalid(N0, n):
    with pytest.raises(ValueError):
        scale(N0, n)


# -- truncated operator ---------------------------------------------------------
def test_L_N_at_zero_diagonal(baseline):
    lam = 0.9
    LN, _ = build_truncated_L(baseline, lam, TF(1, 1, (16, 16)), 4)
    l, j = LN.rows[:, 0], LN.rows[:, 1]
    want = -(lam * np.sqrt(2) * l) ** 2 + j ** 2
    assert np.allclose(LN.entries, np.diag(want), atol=1e-14)


@pytest.mark.parametrize("N", [1, 3, 4])
def test_L_N_dimension(baseline, N):
    LN, _ = build_truncated_L(baseline, 1.0, TF(1, 1, (8, 8)), N)
    brute = sum(1 for l in range(-8, 9) for j in range(-8, 9)
                if j != 0 and 0 < max(abs(l), abs(j)) <= N)
    assert LN.shape == (brute, brute)


def test_L_N_symmetric(fd_sqrt2, rng):
    pd = ProblemData(fd_sqrt2, 0.1, forcing_preset("cos_phi_cos_x", 1, 1))
    u = TF.random(rng, 1, 1, (4, 4), decay=3) * 0.1
    LN, _ = build_truncated_L(pd, 1.0, u, 4, box=(8, 8))
    A = LN.real_basis()
    assert np.linalg.norm(A - A.T) <= 1e-8 * np.linalg.norm(A)


# -- Newton steps ------------------------------------------------------------------
def test_eps_zero_exact(fd_sqrt2):
    pd = ProblemData(fd_sqrt2, 0.0, forcing_preset("cos_phi_cos_x", 1, 1))
    u, trace = solve(pd, 1.0, ES, box=(8, 8))
    assert len(trace) == 1 and trace[0].residual_s0 == 0
    assert np.all(u.coeffs == 0)


@pytest.mark.parametrize("lam", [0.8, 1.0, 1.2])
def test_first_step_closed_form(baseline, lam):
    st = newton_step(baseline, lam, initial_state(baseline, lam, (8, 8), ES, 8), ES, 8)
    D = -(lam * np.sqrt(2)) ** 2 + 1
    for l, j in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
        assert st.u.coeff((l,), (j,)) == pytest.approx(1e-3 * 0.25 / D, rel=1e-12)
    mask = np.abs(st.u.coeffs) > 1e-15
    assert mask.sum() == 4


def test_baseline_convergence(baseline_run):
    _, trace = baseline_run
    r = [st.residual_s0 for st in trace]
    for n in range(3):
        assert r[n + 1] <= r[n] / 10
    assert min(r[:7]) <= 1e-9


def test_quadratic_signature(baseline_run):
    _, trace = baseline_run
    r = [st.residual_s0 for st in trace]
    # ratios are meaningful until r reaches the floating-point floor of
    # ||F|| ~ 1e-16 * |u|^2-sized cancellations; past it only the floor is checked
    floor = 1e-16 * sobolev_norm(trace[-1].u, 2) ** 2
    for n in range(3):
        if r[n + 1] > floor:
            assert r[n + 1] / r[n] ** 2 < 10.0
        else:
            assert r[n + 1] <= floor


def test_trace_invariants(baseline_run):
    _, trace = baseline_run
    for st in trace:
        assert st.N_n == pytest.approx(scale(8, st.n))
        assert st.u.is_real()
        assert np.all(st.u.coeffs[st.u._j_zero_mask()] == 0)
        rec = st.record()
        assert set(rec) >= {"n", "N_n", "residual_s0", "step_norm_s1", "u_norm_S",
                            "condition_estimate", "wall_ms"}


def test_two_residual_consistency(baseline, baseline_run):
    u, trace = baseline_run
    v0 = recover_v0(baseline, 1.0)
    v = u.resize((16, 16)) + v0.resize((16, 16))
    full = sobolev_norm(full_residual(baseline, 1.0, v), 2)
    assert full <= trace[-1].residual_s0 + 1e-10


def test_default_tol_stops(baseline):
    _, trace = solve(baseline, 1.0, ES, max_steps=6, box=(16, 16))
    assert trace[-1].residual_s0 <= 1e-9 and len(trace) <= 7


def test_callback(baseline):
    seen = []
    solve(baseline, 1.0, ES, max_steps=2, box=(8, 8), callback=seen.append)
    assert [s.n for s in seen] == list(range(len(seen)))


def test_bad_parameter_near_resonance(baseline):
    # lambda sqrt2 * l = j exactly for (l, j) = (1, 1): L_N singular at u = 0
    with pytest.raises(BadParameter) as ei:
        solve(baseline, 1 / np.sqrt(2), ES, box=(8, 8))
    assert len(ei.value.trace) == 1


# -- lambda perturbation ---------------------------------------------------------
def test_perturb_zero(baseline):
    out = perturb_lambda_invertibility(baseline, TF(1, 1, (8, 8)), 4, 1.0, 0.0)
    assert out["norm_A"] == 0 and out["neumann_bound"] == pytest.approx(out["norm_inv"])


def test_perturb_diagonal_closed_form(baseline):
    lam, dl = 1.0, 1e-3
    out = perturb_lambda_invertibility(baseline, TF(1, 1, (8, 8)), 4, lam, dl)
    ls, js = np.meshgrid(np.arange(-4, 5), np.r_[-4:0, 1:5], indexing="ij")
    D0 = -(lam * np.sqrt(2) * ls) ** 2 + js ** 2
    D1 = -((lam + dl) * np.sqrt(2) * ls) ** 2 + js ** 2
    assert out["norm_A"] == pytest.approx(np.max(np.abs((D1 - D0) / D0)))
    assert out["norm_inv"] == pytest.approx(np.max(1 / np.abs(D0)))


def test_perturb_random(fd_sqrt2, rng):
    pd = ProblemData(fd_sqrt2, 0.1, forcing_preset("cos_phi_cos_x", 1, 1))
    u = TF.random(rng, 1, 1, (4, 4), decay=3) * 0.1
    out = perturb_lambda_invertibility(pd, u, 4, 1.0, 1e-4, box=(8, 8))
    assert out["invertible"]
    assert out["direct_norm_inv"] <= out["neumann_bound"] * (1 + 1e-12)
    assert not math.isinf(out["direct_norm_inv"])
