"""Classification of a lambda grid into good and bad parameters.

For each ``lambda`` the scan records

* ``in_I_bar``: first-order Melnikov condition at order ``N_bar``;
* ``in_I_tilde``: quadratic non-resonance at order ``N_bar``;
* ``J_N_ok``: ``||L_N^-1||_0 <= N^tau1 / 2`` for every ``N`` in ``N_list``;
* ``G0_N_ok``: for every ``j0`` the bad theta set of ``L_{N,j0}`` is covered
  by at most ``N^e`` intervals of length ``N^-tau1``;
* ``solver_converged``.

``L_N`` is evaluated at the solution of :func:`~kirchhoff_qp.nash_moser.solve`
when it converges, otherwise at ``u = 0`` (and the point counts as bad).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .decay import box_indices
from .diophantine import in_I_bar, in_I_tilde
from .errors import DomainError, KirchhoffError
from .fourier import TorusFunction
from .multiscale import (_runs, _window, bad_theta_mask, covering_count,
                         interval_measure, theta_grid)
from .nash_moser import solve
from .reduction import reduce


@dataclass(frozen=True)
class ScanSettings:
    """Knobs of :func:`scan_lambda`; ``None`` entries get derived defaults.

    ``N_bar`` defaults to ``max(N_list)`` and ``tau0 = 1`` so that
    ``N_bar^tau0 <= N^tau1 / 2`` for the default lists: at ``epsilon = 0``
    every lambda in ``I_bar`` then passes ``J_N``.
    """

    N_list: tuple = (4, 8)
    tau1: float = 2.0
    tau0: float = 1.0
    N_bar: int | None = None
    tilde_coeff: int = 2
    frak_e: float | None = None        # 2d + nu + 4
    frak_e_alt: float | None = None    # d + nu + 1
    theta_factor: float = 10.0         # theta range [-f sqrt(d) N, f sqrt(d) N]
    j0_report: tuple = (1,)
    solver_N0: int = 8
    max_steps: int = 6
    tol: float = 1e-9
    box: tuple = (8, 8)
    check_G0: bool = True

    def resolved(self, nu, d):
        kw = asdict(self)
        kw["N_list"] = tuple(int(n) for n in self.N_list)
        kw["N_bar"] = self.N_bar or max(kw["N_list"])
        kw["frak_e"] = self.frak_e if self.frak_e is not None else 2 * d + nu + 4
        kw["frak_e_alt"] = self.frak_e_alt if self.frak_e_alt is not None else d + nu + 1
        kw["box"] = tuple(self.box)
        kw["j0_report"] = tuple(self.j0_report)
        return ScanSettings(**kw)


@dataclass
class LambdaRecord:
    lam: float
    in_I_bar: bool
    in_I_tilde: bool
    solver_converged: bool
    residual: float
    J_N_ok: dict = field(default_factory=dict)
    inv_norm: dict = field(default_factory=dict)
    G0_N_ok: dict = field(default_factory=dict)
    G0_N_ok_alt: dict = field(default_factory=dict)
    max_cover: dict = field(default_factory=dict)
    theta_measure: dict = field(default_factory=dict)
    error: str = ""

    @property
    def good(self):
        return (self.in_I_bar and self.in_I_tilde and self.solver_converged
                and all(self.J_N_ok.values()) and all(self.G0_N_ok.values()))


@dataclass
class ScanReport:
    epsilon: float
    lambda_grid: np.ndarray
    settings: ScanSettings
    records: list

    @property
    def bad_fraction(self):
        if not self.records:
            return 0.0
        return sum(not r.good for r in self.records) / len(self.records)

    def counts(self):
        n = len(self.records)
        return {"n_lambda": n,
                "n_bad": sum(not r.good for r in self.records),
                "n_not_I_bar": sum(not r.in_I_bar for r in self.records),
                "n_not_I_tilde": sum(not r.in_I_tilde for r in self.records),
                "n_not_converged": sum(not r.solver_converged for r in self.records),
                "n_J_fail": sum(not all(r.J_N_ok.values()) for r in self.records),
                "n_G0_fail": sum(not all(r.G0_N_ok.values()) for r in self.records)}

    def summary(self):
        return {"epsilon": self.epsilon, "bad_fraction": self.bad_fraction,
                "lambda_min": float(self.lambda_grid[0]) if len(self.lambda_grid) else None,
                "lambda_max": float(self.lambda_grid[-1]) if len(self.lambda_grid) else None,
                **self.counts()}

    def columns(self):
        s = self.settings
        cols = ["epsilon", "lambda", "in_I_bar", "in_I_tilde", "solver_converged",
                "residual"]
        for N in s.N_list:
            cols += [f"J_{N}_ok", f"inv_norm_{N}"]
            if s.check_G0:
                cols += [f"G0_{N}_ok", f"G0_{N}_ok_alt", f"max_cover_{N}"]
                cols += [f"bad_theta_measure_N{N}_j0{j}" for j in s.j0_report]
        return cols + ["good", "error"]

    def rows(self):
        s = self.settings
        for r in self.records:
            row = [self.epsilon, r.lam, r.in_I_bar, r.in_I_tilde, r.solver_converged,
                   r.residual]
            for N in s.N_list:
                row += [r.J_N_ok.get(N), r.inv_norm.get(N)]
                if s.check_G0:
                    row += [r.G0_N_ok.get(N), r.G0_N_ok_alt.get(N), r.max_cover.get(N)]
                    row += [r.theta_measure.get((N, j)) for j in s.j0_report]
            yield row + [r.good, r.error]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_csv(reports, stream=None, header=None):
    """All reports into one CSV (deterministic formatting)."""
    out = stream if stream is not None else io.StringIO()
    if header:
        for line in header:
            out.write(f"# {line}\n")
    w = csv.writer(out, lineterminator="\n")
    if reports:
        w.writerow(reports[0].columns())
    for rep in reports:
        for row in rep.rows():
            w.writerow([_fmt(v) for v in row])
    return out.getvalue() if stream is None else None


# -- per-lambda pieces ------------------------------------------------------
def inverse_norm_L_N(red, N):
    """``||L_N^-1||_0`` on ``E_N`` (largest inverse singular value)."""
    LN = red.L2_matrix(N=N)
    if LN.entries.size == 0:
        return 0.0
    sv = np.linalg.svd(LN.entries, compute_uv=False)
    return math.inf if sv[-1] == 0 else float(1.0 / sv[-1])


def _j0_range(d, jmax):
    """``j0`` with ``|j0| <= jmax`` up to ``j0 -> -j0`` (lexicographic half)."""
    J = box_indices(0, d, (0, jmax), exclude_j0=False)
    keep = []
    for j in J:
        nz = np.flatnonzero(j)
        if len(nz) == 0 or j[nz[0]] > 0:
            keep.append(j)
    return np.array(keep, int)


def theta_range(N, d, factor=10.0):
    h = factor * math.sqrt(d) * N
    return -h, h


def j0_cutoff(pd, lam, mu, N, theta_max, eta_r):
    """Beyond this ``|j0|`` no site of the window can be bad on ``|theta| <= theta_max``."""
    w = lam * float(np.sum(np.abs(pd.fd.omega_bar))) * N
    return int(math.ceil((theta_max + w + eta_r + 1.0) / math.sqrt(mu))) + N


def g0_check(pd, lam, red, N, tau1, frak_e, frak_e_alt=None, factor=10.0,
             j0_report=()):
    """``(ok, ok_alt, max_cover, measures)`` for the bad-theta covering condition.

    The j0 range is cut where the window's smallest ``mu |j|^2`` exceeds
    the theta range; ``j0`` and ``-j0`` give mirror-image sets for real
    ``u`` so only one of each pair is scanned.
    """
    d = pd.d
    lo, hi = theta_range(N, d, factor)
    grid = theta_grid(N, tau1, lo, hi)
    step = grid[1] - grid[0]
    jmax = j0_cutoff(pd, lam, red.mu, N, hi, 1.0)
    u = red.u
    worst = 0
    measures = {}
    report = {tuple(np.atleast_1d(j)) for j in j0_report}
    for j0 in _j0_range(d, jmax):
        mask = bad_theta_mask(pd, lam, u, j0, N, grid, tau1, red=red)
        runs = _runs(mask)
        ivs = [[grid[a], grid[b]] for a, b in runs]
        worst = max(worst, covering_count(ivs, N, tau1, step))
        if tuple(j0) in report:
            measures[tuple(j0)] = interval_measure(ivs, step)
    ok = worst <= N ** frak_e
    ok_alt = None if frak_e_alt is None else worst <= N ** frak_e_alt
    return ok, ok_alt, worst, measures


def theta_measure(pd, lam, u, j0, N, tau1, grid=None, red=None):
    """Grid measure of the bad theta set of ``L_{N,j0}``.

    The grid must cover ``[-10 sqrt(d) N, 10 sqrt(d) N]``.
    """
    lo, hi = theta_range(N, pd.d)
    grid = theta_grid(N, tau1, lo, hi) if grid is None else np.asarray(grid, float)
    if grid[0] > lo + 1e-12 or grid[-1] < hi - 1e-12:
        raise DomainError("theta grid must cover [-10 sqrt(d) N, 10 sqrt(d) N]")
    mask = bad_theta_mask(pd, lam, u, j0, N, grid, tau1, red=red)
    return float(mask.sum() * (grid[1] - grid[0]))


def _reduction(pd, lam, u, N):
    u = u.resize((max(u.box[0], 1), max(u.box[1], 1)))
    return reduce(pd, lam, u, box=(max(N, u.box[0]), max(N, u.box[1])))


def classify_lambda(pd, es, lam, settings):
    """One :class:`LambdaRecord`; failures are recorded, never raised."""
    s = settings.resolved(pd.nu, pd.d)
    fd = pd.fd
    rec = LambdaRecord(lam=float(lam),
                       in_I_bar=in_I_bar(lam, fd, s.N_bar, s.tau0, pd.d),
                       in_I_tilde=in_I_tilde(lam, fd, s.N_bar, s.tilde_coeff),
                       solver_converged=False, residual=math.nan)
    try:
        u, trace = solve(pd, lam, es=es, N0=s.solver_N0, max_steps=s.max_steps,
                         tol=s.tol, box=s.box)
        rec.residual = trace[-1].residual_s0
        rec.solver_converged = rec.residual <= s.tol
    except KirchhoffError as e:
        rec.error = f"solve: {type(e).__name__}: {e}"
        u = None
    if u is None or not rec.solver_converged:
        u = TorusFunction(pd.nu, pd.d, s.box)
    for N in s.N_list:
        try:
            red = _reduction(pd, lam, u, N)
            nrm = inverse_norm_L_N(red, N)
            rec.inv_norm[N] = nrm
            rec.J_N_ok[N] = nrm <= N ** s.tau1 / 2
            if s.check_G0:
                ok, ok_alt, worst, meas = g0_check(
                    pd, lam, red, N, s.tau1, s.frak_e, s.frak_e_alt, s.theta_factor,
                    s.j0_report)
                rec.G0_N_ok[N], rec.G0_N_ok_alt[N], rec.max_cover[N] = ok, ok_alt, worst
                for j, m in meas.items():
                    rec.theta_measure[(N, j[0] if len(j) == 1 else j)] = m
        except KirchhoffError as e:
            rec.J_N_ok[N] = False
            rec.G0_N_ok[N] = False
            rec.error += f" N={N}: {type(e).__name__}: {e}"
    rec.error = rec.error.strip()
    return rec


def scan_lambda(pd, es, lambda_grid, settings=None, threads=1, progress=None):
    """Classify every ``lambda`` of the grid; returns a :class:`ScanReport`."""
    settings = (settings or ScanSettings()).resolved(pd.nu, pd.d)
    grid = np.asarray(lambda_grid, float)

    def work(lam):
        rec = classify_lambda(pd, es, lam, settings)
        if progress:
            progress(rec)
        return rec

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            records = list(ex.map(work, grid))
    else:
        records = [work(lam) for lam in grid]
    return ScanReport(pd.epsilon, grid, settings, records)


def fitted_exponent(epsilons, fractions):
    """Least-squares slope of ``log bad_fraction`` against ``log epsilon``.

    ``None`` when fewer than two points have positive epsilon and fraction.
    """
    pts = [(math.log(e), math.log(f)) for e, f in zip(epsilons, fractions)
           if e > 0 and f > 0]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


# -- two-dimensional bad region and its rescaled form ------------------------
def _window_data(pd, red, j0, N):
    nu = pd.nu
    _, idx = _window(nu, pd.d, N, j0)
    R = red.R2_block(idx).entries
    R = 0.5 * (R + R.conj().T)
    ob = idx[:, :nu] @ np.asarray(pd.fd.omega_bar, float)
    j2 = np.sum(idx[:, nu:].astype(float) ** 2, axis=1)
    return ob, j2, R


def bad_region(pd, lam_grid, theta_vals, j0, N, tau1, u_of=None):
    """Boolean ``(lambda, theta)`` mask of ``||L_{N,j0}^-1||_0 > N^tau1 / 2``."""
    eta = 2.0 * N ** (-tau1)
    out = np.zeros((len(lam_grid), len(theta_vals)), bool)
    for i, lam in enumerate(lam_grid):
        u = u_of(lam) if u_of else TorusFunction(pd.nu, pd.d, (1, 1))
        red = _reduction(pd, lam, u, N)
        ob, j2, R = _window_data(pd, red, j0, N)
        for k, th in enumerate(theta_vals):
            ev = np.linalg.eigvalsh(R + np.diag(-(lam * ob + th) ** 2 + red.mu * j2))
            out[i, k] = np.min(np.abs(ev)) < eta
    return out


def bad_region_rescaled(pd, lam_grid, theta_vals, j0, N, tau1, u_of=None):
    """Same mask through ``zeta = 1 / lambda^2``, ``eta = theta / lambda``.

    ``L = lambda^2 [-(omega_bar.l + eta)^2 + zeta (mu |j|^2 + R2)]``, so a
    point is bad iff the bracket has an eigenvalue below ``zeta * 2 N^-tau1``.
    """
    thr = 2.0 * N ** (-tau1)
    out = np.zeros((len(lam_grid), len(theta_vals)), bool)
    for i, lam in enumerate(lam_grid):
        u = u_of(lam) if u_of else TorusFunction(pd.nu, pd.d, (1, 1))
        red = _reduction(pd, lam, u, N)
        ob, j2, R = _window_data(pd, red, j0, N)
        zeta = 1.0 / lam ** 2
        B = zeta * (R + np.diag(red.mu * j2))
        for k, th in enumerate(theta_vals):
            et = th / lam
            ev = np.linalg.eigvalsh(B - np.diag((ob + et) ** 2))
            out[i, k] = np.min(np.abs(ev)) < zeta * thr
    return out


__all__ = ["ScanSettings", "LambdaRecord", "ScanReport", "scan_lambda",
           "classify_lambda", "inverse_norm_L_N", "g0_check", "theta_measure",
           "theta_range", "j0_cutoff", "fitted_exponent", "write_csv",
           "bad_region", "bad_region_rescaled"]
