"""Reduction of the linearized operator to constant coefficients.

Given ``u``, two changes of variables turn

    L(u) = (omega.d_phi)^2 - (1 + a(phi)) Delta + R,
    R h  = 2 eps Delta u int Delta u h dx,

into ``L2 = (omega.d_theta)^2 - mu Delta + R2`` with constant ``mu``:

* ``A h(phi) = h(phi + omega alpha(phi))`` (time reparametrization), with
  inverse ``A^-1 h(theta) = h(theta + omega alpha_breve(theta))``;
* ``B h = b(theta) h`` (multiplication).

Precisely ``L2 = B^-1 rho^-1 A^-1 L A B`` where

    mu      = (average of sqrt(1 + a))^2
    alpha   = (omega.d_phi)^-1 [sqrt(1 + a)/sqrt(mu) - 1]
    rho     = A^-1 [(1 + omega.d_phi alpha)^2]
    a1      = rho^-1 A^-1 [(omega.d_phi)^2 alpha]
    b       = exp(-(omega.d_theta)^-1 a1 / 2)
    R2      = 2 eps rho^-1 U int U h dy + b^-1 (omega.d)^2 b + a1 b^-1 omega.d b

and ``U(theta, x) = (Delta u)(theta + omega alpha_breve(theta), x)``.  The
``b`` factors cancel in the nonlocal part, which is therefore symmetric.

Functions of ``phi`` alone live on a :class:`~kirchhoff_qp.fourier.PhiGrid`
with ``M = 2K + 1`` points per axis; the returned
:class:`~kirchhoff_qp.fourier.TorusFunction` objects have box ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decay import DecayMatrix, box_indices
from .errors import DomainError, NoConvergence, NonPositiveArgument
from .fourier import PhiGrid, TorusFunction, laplacian, s0_of, sobolev_norm
from .kirchhoff import nonlocal_coefficient

OVERSAMPLE = 4
FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAXITER = 100


def compute_a(pd, u):
    """``a(phi) = eps int |grad u|^2 dx`` (exact, box ``2 Lphi``)."""
    return nonlocal_coefficient(pd, u)


def _grid_for(f, K=None):
    K = K if K is not None else max(OVERSAMPLE * f.box[0], 16)
    return PhiGrid(f.nu, max(K, f.box[0]))


def _sqrt1p_m1(a):
    # sqrt(1 + a) - 1 without cancellation for small a
    return a / (np.sqrt(1 + a) + 1)


def _mu_from_values(a_vals):
    a = np.real(a_vals)
    if np.min(1 + a) <= 0:
        raise NonPositiveArgument(f"1 + a has minimum {np.min(1 + a):.3e} <= 0")
    m1 = np.mean(_sqrt1p_m1(a))
    return float(1 + (2 * m1 + m1 * m1))


def compute_mu(a, K=None):
    """``mu = (normalized average of sqrt(1 + a))^2`` on an oversampled grid."""
    g = _grid_for(a, K)
    return _mu_from_values(g.from_function(a))


def _alpha_values(g, a_vals, mu, omega):
    # sqrt(1 + a) / sqrt(mu) - 1 = (a - (mu - 1)) / (sqrt(mu) (sqrt(1 + a) + sqrt(mu))),
    # with mu - 1 recomputed from a so no O(1) quantities cancel
    a = np.real(a_vals)
    m1 = np.mean(_sqrt1p_m1(a))
    f = (a - (2 * m1 + m1 * m1)) / (np.sqrt(mu) * (np.sqrt(1 + a) + np.sqrt(mu)))
    return np.real(g.inv_deriv(f, omega, 1, atol=1e-14))


def compute_alpha(a, mu, omega, K=None):
    """``alpha = (omega.d_phi)^-1 [sqrt(1 + a)/sqrt(mu) - 1]``."""
    g = _grid_for(a, K)
    vals = _alpha_values(g, g.from_function(a), mu, omega)
    return g.to_function(vals)


def _check_small(g, alpha_vals, omega):
    dal = np.max(np.abs(g.deriv(alpha_vals, omega, 1)))
    if dal >= 0.5:
        raise DomainError(f"max |omega.d alpha| = {dal:.3f} >= 1/2: not a small diffeo")


def _invert_values(g, alpha_vals, omega, tol=FIXED_POINT_TOL,
                   maxiter=FIXED_POINT_MAXITER):
    _check_small(g, alpha_vals, omega)
    C = g.coeffs(alpha_vals)
    om = np.asarray(omega, float)
    ab = np.zeros(g.P)
    for _ in range(maxiter):
        new = -np.real(g.eval_at(C, g.points + ab[:, None] * om[None, :]))
        err = np.max(np.abs(new - ab))
        ab = new
        if err <= tol:
            return ab
    raise NoConvergence(f"inverse diffeomorphism: residual {err:.2e} after {maxiter} iterations")


def invert_diffeo(alpha, omega):
    """``alpha_breve`` with ``theta -> theta + omega alpha_breve(theta)`` the
    inverse of ``phi -> phi + omega alpha(phi)``.
    """
    g = PhiGrid(alpha.nu, alpha.box[0])
    return g.to_function(_invert_values(g, g.from_function(alpha), omega))


def compose_with_diffeo(h, alpha, omega, K=None):
    """Coefficients of ``h(phi + omega alpha(phi), x)`` on ``h.box``."""
    K = K if K is not None else max(alpha.box[0], OVERSAMPLE * h.box[0], 16)
    g = PhiGrid(h.nu, K)
    shift = np.real(g.from_function(alpha.resize((min(alpha.box[0], K), 0))))
    if h.d == 0:
        vals = g.compose(g.from_function(h), shift, omega)
        out = g.to_function(vals, real=False).resize(h.box)
    else:
        vals = g.compose(g.field_from(h), shift, omega)
        out = g.field_to(vals, h.nu, h.d, h.box)
    return out.real_part() if h.is_real() else out


def _rho_a1_values(g, alpha_vals, ab_vals, omega):
    d1 = np.real(g.deriv(alpha_vals, omega, 1))
    d2 = np.real(g.deriv(alpha_vals, omega, 2))
    rho = np.real(g.compose((1 + d1) ** 2, ab_vals, omega))
    if np.min(rho) <= 0.5:
        raise DomainError(f"rho has minimum {np.min(rho):.3f} <= 1/2")
    a1 = np.real(g.compose(d2, ab_vals, omega)) / rho
    return rho, a1


def compute_a1_rho(alpha, mu, omega):
    """``(a1, rho)`` with ``rho = A^-1[(1 + omega.d alpha)^2]`` and
    ``a1 = rho^-1 A^-1[(omega.d)^2 alpha]``.  ``mu`` is accepted for
    interface symmetry; it does not enter the formulas.
    """
    g = PhiGrid(alpha.nu, alpha.box[0])
    av = np.real(g.from_function(alpha))
    ab = _invert_values(g, av, omega)
    rho, a1 = _rho_a1_values(g, av, ab, omega)
    return g.to_function(a1), g.to_function(rho)


A1_MEAN_TOL = 1e-6


def _b_minus_one(g, a1_vals, omega):
    # the average of a1 vanishes identically; what is left is grid
    # truncation (reported as aliasing["a1_mean"]) and is discarded.
    # b - 1 via expm1 keeps full relative precision when a1 is small
    return np.expm1(-0.5 * np.real(g.inv_deriv(a1_vals, omega, 1, tol=A1_MEAN_TOL,
                                               atol=1e-14)))


def _b_values(g, a1_vals, omega):
    return 1.0 + _b_minus_one(g, a1_vals, omega)


def compute_b(a1, omega):
    """``b = exp(-(omega.d_theta)^-1 a1 / 2)``.

    Conjugating ``(omega.d)^2 + a1 omega.d`` by ``h -> b h`` produces the
    first-order coefficient ``2 b^-1 (omega.d b) + a1``; the factor ``1/2``
    makes it vanish.
    """
    g = PhiGrid(a1.nu, a1.box[0])
    return g.to_function(_b_values(g, np.real(g.from_function(a1)), omega))


def _neg_index(Lx, d):
    J = (2 * Lx + 1) ** d
    return np.arange(J)[::-1]


def _jsq(Lx, d):
    ax = np.arange(-Lx, Lx + 1)
    g = np.meshgrid(*([ax] * d), indexing="ij")
    return sum(gi.astype(float) ** 2 for gi in g).ravel()


@dataclass(frozen=True, eq=False)
class ReductionResult:
    """Output of :func:`reduce`; ``R2`` is a dense :class:`DecayMatrix`."""

    pd: object
    lam: float
    u: TorusFunction
    box: tuple
    grid: PhiGrid
    mu: float
    a: TorusFunction
    alpha: TorusFunction
    alpha_breve: TorusFunction
    rho: TorusFunction
    a1: TorusFunction
    b: TorusFunction
    R2: DecayMatrix
    aliasing: dict
    vals: dict = field(repr=False)

    @property
    def omega(self):
        return self.pd.omega(self.lam)

    @property
    def Lx(self):
        return max(self.u.box[1], self.box[1])

    # -- diagonal part ----------------------------------------------------
    def diagonal(self, idx, theta=0.0):
        """``D_k = -(omega.l + theta)^2 + mu |j|^2`` on the index array."""
        idx = np.asarray(idx)
        nu = self.u.nu
        om = np.asarray(self.omega)
        ell = idx[:, :nu] @ om + theta
        j2 = np.sum(idx[:, nu:].astype(float) ** 2, axis=1)
        return -ell ** 2 + self.mu * j2

    def L2_matrix(self, N=None, center=None, theta=0.0):
        """``D(theta) + R2`` restricted to ``|k - center| <= N`` in the box."""
        R = self.R2 if N is None else self.R2.submatrix(
            np.zeros(self.u.nu + self.u.d, int) if center is None else center, N)
        return R.with_entries(R.entries + np.diag(self.diagonal(R.rows, theta)))

    def R2_block(self, rows, cols=None):
        """``R2`` on arbitrary index sets (``|l - l'|`` within the grid)."""
        nu = self.u.nu
        rows = np.asarray(rows, int).reshape(-1, nu + self.u.d)
        cols = rows if cols is None else np.asarray(cols, int).reshape(-1, nu + self.u.d)
        return DecayMatrix(nu, self.u.d, rows, cols, _assemble_R2(
            self.vals["Ghat"], self.vals["mhat"], self.grid.K, self.Lx, rows, cols, nu))

    # -- changes of variables on mixed fields -------------------------------
    def field(self, h):
        return self.grid.field_from(h, self.Lx)

    def to_function(self, vals, box=None):
        out = self.grid.field_to(vals, self.u.nu, self.u.d,
                                 box if box is not None else self.box)
        return out.real_part()

    def apply_A(self, vals):
        return self.grid.compose(vals, self.vals["alpha"], self.omega)

    def apply_A_inv(self, vals):
        return self.grid.compose(vals, self.vals["alpha_breve"], self.omega)

    def phi1(self, vals):
        """``Phi1 = B^-1 rho^-1 A^-1``."""
        w = self.vals["rho"] * self.vals["b"]
        return self.apply_A_inv(vals) / w[:, None]

    def phi2(self, vals):
        """``Phi2 = A B``."""
        return self.apply_A(vals * self.vals["b"][:, None])

    def apply_L(self, vals):
        """Linearized operator ``L(u)`` on a mixed field (no projection)."""
        g, om = self.grid, self.omega
        jsq = _jsq(self.Lx, self.u.d)
        out = g.deriv(vals, om, 2) + (1 + self.vals["a"])[:, None] * jsq[None, :] * vals
        eps = self.pd.epsilon
        if eps:
            du = self.vals["lap_u"]
            neg = _neg_index(self.Lx, self.u.d)
            integral = (2 * np.pi) ** self.u.d * np.sum(du * vals[:, neg], axis=1)
            out = out + 2 * eps * du * integral[:, None]
        return out

    def conjugated_apply(self, h, box=None):
        """Literal ``B^-1 rho^-1 A^-1 L(u) A B h`` projected on ``box``."""
        return self.to_function(self.phi1(self.apply_L(self.phi2(self.field(h)))), box)

    def reduced_apply(self, h):
        """``((omega.d)^2 - mu Delta + R2) h`` via the assembled matrix."""
        M = self.L2_matrix()
        return M.apply(h.resize(self.box), box=self.box)

    def conjugation_residual(self, h, s=None):
        """``||literal - reduced||_s0 / ||h||_{s0+2}`` for ``h`` in the box."""
        s0 = s0_of(self.u.nu, self.u.d) if s is None else s
        diff = self.conjugated_apply(h) - self.reduced_apply(h)
        return sobolev_norm(diff, s0) / sobolev_norm(h, s0 + 2)

    def report(self, h=None):
        s0 = s0_of(self.u.nu, self.u.d)
        rep = {
            "mu": self.mu,
            "norm_a": sobolev_norm(self.a, s0),
            "norm_alpha": sobolev_norm(self.alpha, s0),
            "norm_a1": sobolev_norm(self.a1, s0),
            "norm_b_minus_1": sobolev_norm(
                self.b - TorusFunction.from_modes(self.b.nu, 0, self.b.box,
                                                  {((0,) * self.b.nu, ()): 1.0},
                                                  real=False), s0),
            "decay_norm_R2_s0": self.R2.decay_norm(s0),
            "conjugation_residual": None,
        }
        if h is not None:
            rep["conjugation_residual"] = self.conjugation_residual(h)
        return rep


def _assemble_R2(Ghat, mhat, K, Lx, rows, cols, nu):
    """Entries ``R2[r, c]`` from the phi-Fourier data of the kernel.

    The nonlocal part vanishes when ``|j| > Lx`` on either side.
    """
    d = rows.shape[1] - nu
    dl = rows[:, None, :nu] - cols[None, :, :nu]
    if dl.size and np.max(np.abs(dl)) > K:
        raise DomainError("phi-distance exceeds the grid resolution")
    lpos = tuple(dl[..., i] + K for i in range(nu))
    out = np.where(np.all(rows[:, None, nu:] == cols[None, :, nu:], axis=2),
                   mhat[lpos], 0).astype(complex)
    rin = np.all(np.abs(rows[:, nu:]) <= Lx, axis=1)
    cin = np.all(np.abs(cols[:, nu:]) <= Lx, axis=1)
    if np.any(rin) and np.any(cin):
        shape = (2 * Lx + 1,) * d
        jr = np.ravel_multi_index(tuple((rows[rin, nu:] + Lx).T), shape)
        jc = np.ravel_multi_index(tuple((cols[cin, nu:] + Lx).T), shape)
        sub = tuple(p[np.ix_(rin, cin)] for p in lpos)
        out[np.ix_(rin, cin)] += Ghat[sub + (jr[:, None], jc[None, :])]
    return out


def reduce(pd, lam, u, box=None, oversample=OVERSAMPLE):
    """Reduce ``L(u)`` at ``lambda``; ``R2`` is assembled on ``box``.

    ``box`` defaults to ``u.box``.  The phi-grid has ``K = oversample *
    max(Lphi)`` so products of the box functions with ``a`` stay alias-free.
    """
    nu, d = u.nu, u.d
    if d == 0:
        raise DomainError("u must depend on x")
    box = tuple(box) if box is not None else u.box
    om = pd.omega(lam)
    K = max(oversample * max(u.box[0], box[0], 1), 8)
    g = PhiGrid(nu, K)
    Lx = max(u.box[1], box[1])

    a = compute_a(pd, u)
    a_vals = np.real(g.from_function(a))
    mu = _mu_from_values(a_vals)
    alpha = _alpha_values(g, a_vals, mu, om)
    ab = _invert_values(g, alpha, om)
    rho, a1 = _rho_a1_values(g, alpha, ab, om)
    bm1 = _b_minus_one(g, a1, om)
    b = 1.0 + bm1
    db = np.real(g.deriv(bm1, om, 1))
    d2b = np.real(g.deriv(bm1, om, 2))
    m = d2b / b + a1 * db / b

    lap_u = g.field_from(laplacian(u), Lx)
    U = g.compose(lap_u, ab, om)
    J = U.shape[1]
    neg = _neg_index(Lx, d)
    G = (2 * pd.epsilon * (2 * np.pi) ** d / rho)[:, None, None] \
        * U[:, :, None] * U[:, None, neg]
    Ghat = g.coeffs(G.reshape(g.P, J * J)).reshape((g.M,) * nu + (J, J))
    mhat = g.coeffs(m)

    idx = box_indices(nu, d, box)
    R2 = _assemble_R2(Ghat, mhat, K, Lx, idx, idx, nu)

    vals = {"a": a_vals, "alpha": alpha, "alpha_breve": ab, "rho": rho,
            "a1": a1, "b": b, "lap_u": lap_u, "Ghat": Ghat, "mhat": mhat}
    aliasing = {k: g.tail_fraction(v) for k, v in
                (("alpha", alpha), ("b", b), ("U", U))}
    aliasing["a1_mean"] = float(abs(np.mean(a1)))
    return ReductionResult(
        pd=pd, lam=float(lam), u=u, box=box, grid=g, mu=mu, a=a,
        alpha=g.to_function(alpha), alpha_breve=g.to_function(ab),
        rho=g.to_function(rho), a1=g.to_function(a1), b=g.to_function(b),
        R2=DecayMatrix(nu, d, idx, idx, R2), aliasing=aliasing, vals=vals)
