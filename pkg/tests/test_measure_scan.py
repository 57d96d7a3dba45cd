import io
import math

import numpy as np
import pytest

from kirchhoff_qp.diophantine import in_I_bar
from kirchhoff_qp.errors import DomainError
from kirchhoff_qp.fourier import TorusFunction as TF
from kirchhoff_qp.kirchhoff import ProblemData, forcing_preset
from kirchhoff_qp.measure_scan import (
    ScanSettings, _j0_range, bad_region, bad_region_rescaled, classify_lambda,
    fitted_exponent, scan_lambda, theta_measure, theta_range, write_csv,
)
from kirchhoff_qp.multiscale import _window, bad_theta_mask, theta_grid
from kirchhoff_qp.nash_moser import ExponentSet

ES = ExponentSet.greedy(1, 1)
FAST = ScanSettings(check_G0=False)


@pytest.fixture
def pd0(fd_sqrt2):
    return ProblemData(fd_sqrt2, 0.0, forcing_preset("cos_phi_cos_x", 1, 1))


def test_settings_resolved():
    s = ScanSettings().resolved(1, 1)
    assert s.N_bar == 8 and s.frak_e == 7 and s.frak_e_alt == 3
    assert ScanSettings(N_bar=5).resolved(1, 1).N_bar == 5


def test_j0_half_range():
    assert _j0_range(1, 3).ravel().tolist() == [0, 1, 2, 3]
    two = {tuple(j) for j in _j0_range(2, 1)}
    assert len(two) == 5 and all(tuple(-np.array(j)) not in two or j == (0, 0) for j in two)


def test_eps_zero_I_bar_implies_J(pd0):
    grid = np.linspace(0.55, 1.45, 19)
    rep = scan_lambda(pd0, ES, grid, FAST)
    for r in rep.records:
        if r.in_I_bar:
            assert all(r.J_N_ok.values()), r
        assert r.solver_converged


def test_resonant_lambda_excluded(baseline):
    lam = 1 / math.sqrt(2)  # lambda sqrt2 * 1 = 1
    rec = classify_lambda(baseline, ES, lam, FAST)
    assert not rec.in_I_bar and not rec.good


def test_report_fields(baseline):
    rep = scan_lambda(baseline, ES, [0.8, 1.0], ScanSettings(N_list=(4,)))
    assert 0 <= rep.bad_fraction <= 1
    c = rep.counts()
    assert c["n_lambda"] == 2 and c["n_bad"] == round(2 * rep.bad_fraction)
    r = rep.records[1]
    assert r.solver_converged and r.residual <= 1e-9
    assert set(r.G0_N_ok) == {4} and (4, 1) in r.theta_measure


def test_threads_match_serial(baseline):
    grid = [0.7, 0.95, 1.2]
    a = scan_lambda(baseline, ES, grid, FAST)
    b = scan_lambda(baseline, ES, grid, FAST, threads=2)
    assert write_csv([a]) == write_csv([b])


def test_enlarging_N_list_shrinks(baseline):
    grid = [0.62, 0.9, 1.07, 1.33]
    one = scan_lambda(baseline, ES, grid, ScanSettings(N_list=(4,), N_bar=8, check_G0=False))
    two = scan_lambda(baseline, ES, grid, ScanSettings(N_list=(4, 8), check_G0=False))
    for a, b in zip(one.records, two.records):
        assert a.good or not b.good


def test_csv_format(baseline):
    rep = scan_lambda(baseline, ES, [1.0], FAST)
    text = write_csv([rep], header=["config_hash=abc"])
    lines = text.splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1].startswith("epsilon,lambda,in_I_bar,in_I_tilde,solver_converged,residual")
    row = lines[2].split(",")
    assert row[0] == "0.001" and row[1] == "1.0" and row[-2] in ("0", "1")
    buf = io.StringIO()
    write_csv([rep], buf, header=["config_hash=abc"])
    assert buf.getvalue() == text


def test_fitted_exponent():
    assert fitted_exponent([1e-2, 1e-3], [0.1, 0.01]) == pytest.approx(1.0)
    assert fitted_exponent([1e-2], [0.1]) is None
    assert fitted_exponent([1e-2, 1e-3], [0.0, 0.0]) is None


# -- theta measure -------------------------------------------------------------
def test_theta_measure_closed_form_bound(pd0):
    N, tau1 = 2, 2.0
    u = TF(1, 1, (1, 1))
    _, idx = _window(1, 1, N, (1,))
    m = theta_measure(pd0, 0.9, u, (1,), N, tau1)
    bound = 4 * len(idx) * 2 * N ** -tau1
    assert 0 < m <= bound


def test_theta_outside_range_good(pd0):
    N, tau1 = 2, 2.0
    u = TF(1, 1, (1, 1))
    h = 11 * N
    for j0 in (0, 1, 2):
        mask = bad_theta_mask(pd0, 1.1, u, (j0,), N, np.array([-h, h]), tau1, method="dense")
        assert not mask.any()


def test_theta_measure_monotone_in_tau1(pd0):
    N = 2
    u = TF(1, 1, (1, 1))
    lo, hi = theta_range(N, 1)
    grid = theta_grid(N, 3.0, lo, hi)
    ms = [theta_measure(pd0, 0.9, u, (1,), N, t, grid=grid) for t in (1.5, 2.0, 3.0)]
    assert ms[0] >= ms[1] >= ms[2]


def test_theta_measure_grid_must_cover(pd0):
    with pytest.raises(DomainError):
        theta_measure(pd0, 0.9, TF(1, 1, (1, 1)), (1,), 2, 2.0, grid=np.linspace(-1, 1, 50))


def test_fubini_consistency(pd0):
    N, tau1 = 2, 2.0
    lams = np.linspace(0.8, 1.2, 5)
    lo, hi = theta_range(N, 1)
    grid = theta_grid(N, tau1, lo, hi)
    step = grid[1] - grid[0]
    region = bad_region(pd0, lams, grid, (1,), N, tau1)
    avg = np.mean([theta_measure(pd0, lam, TF(1, 1, (1, 1)), (1,), N, tau1, grid=grid)
                   for lam in lams])
    assert avg == pytest.approx(region.sum() * step / len(lams), abs=step)


def test_rescaled_region(baseline):
    N, tau1 = 2, 2.0
    lams = np.linspace(0.7, 1.3, 7)
    grid = theta_grid(N, tau1, -6, 6)
    a = bad_region(baseline, lams, grid, (1,), N, tau1)
    b = bad_region_rescaled(baseline, lams, grid, (1,), N, tau1)
    assert a.any() and np.sum(a != b) <= 2
