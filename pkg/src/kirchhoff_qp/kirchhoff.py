"""The forced Kirchhoff functional and its exact differential.

Zero-x-mean unknown ``u`` solves ``F(u) = 0`` with

    F(u) = (omega . d_phi)^2 u - (1 + eps int |grad u|^2 dx) Delta u - eps g,

``omega = lambda * omega_bar`` and ``g`` the zero-x-mean part of the
forcing ``f = f0 + g``.  The x-average ``v0`` of the full solution solves a
decoupled linear equation, see :func:`recover_v0`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diophantine import FrequencyData
from .errors import DomainError
from .fourier import (
    TorusFunction,
    grad_x,
    integrate_x,
    invert_omega_dphi,
    laplacian,
    lift_phi,
    multiply,
    omega_dphi,
    phi_part,
    s0_of,
    sobolev_norm,
    x_mean_split,
)


@dataclass(frozen=True)
class ProblemData:
    """Frequencies, coupling ``epsilon`` and forcing ``f`` (zero average)."""

    fd: FrequencyData
    epsilon: float
    f: TorusFunction
    g: TorusFunction = field(init=False, repr=False)
    f0: TorusFunction = field(init=False, repr=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise DomainError("epsilon must be non-negative")
        if self.f.nu != self.fd.nu:
            raise DomainError("forcing and frequency dimensions differ")
        if not self.f.is_real():
            raise DomainError("forcing must be real")
        scale = max(1.0, float(np.max(np.abs(self.f.coeffs))))
        if abs(self.f.coeff((0,) * self.nu, (0,) * self.d)) > 1e-12 * scale:
            raise DomainError("forcing must have zero total average")
        f0, g = x_mean_split(self.f)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "g", g)

    @property
    def nu(self):
        return self.f.nu

    @property
    def d(self):
        return self.f.d

    def omega(self, lam):
        return self.fd.omega(lam)

    def with_epsilon(self, epsilon):
        return ProblemData(self.fd, epsilon, self.f)


#: named forcings ``name -> {(ell, j): amplitude}`` (cosine amplitudes)
FORCING_PRESETS = {
    "cos_phi_cos_x": lambda nu, d: {((1,) + (0,) * (nu - 1), (1,) + (0,) * (d - 1)): 0.25,
                                    ((1,) + (0,) * (nu - 1), (-1,) + (0,) * (d - 1)): 0.25},
    "cos_phi_cos_x_plus_cos_phi": lambda nu, d: {
        ((1,) + (0,) * (nu - 1), (1,) + (0,) * (d - 1)): 0.25,
        ((1,) + (0,) * (nu - 1), (-1,) + (0,) * (d - 1)): 0.25,
        ((1,) + (0,) * (nu - 1), (0,) * d): 0.5},
    "zero": lambda nu, d: {},
}


def forcing_preset(name, nu, d, box=(1, 1)):
    """A forcing from :data:`FORCING_PRESETS` on ``box``.

    ``cos_phi_cos_x`` is ``cos(phi_1) cos(x_1)``; the ``_plus_cos_phi``
    variant adds an x-mean part ``cos(phi_1)``.
    """
    try:
        modes = FORCING_PRESETS[name](nu, d)
    except KeyError:
        raise DomainError(f"unknown forcing preset {name!r}") from None
    return TorusFunction.from_modes(nu, d, box, modes)


def _check_zero_x_mean(u, what="u"):
    zero = u._j_zero_mask()
    if np.any(np.abs(u.coeffs[zero]) > 1e-12 * max(1.0, np.abs(u.coeffs).max())):
        raise DomainError(f"{what} must have zero x-mean (modes j = 0)")


def nonlocal_coefficient(pd, u):
    """``a(phi) = eps int_{T^d} |grad u|^2 dx`` exactly, on box ``2 Lphi``."""
    if pd.epsilon == 0:
        return TorusFunction(u.nu, 0, (2 * u.box[0], 0))
    acc = None
    box = (2 * u.box[0], 2 * u.box[1])
    for gi in grad_x(u):
        sq = multiply(gi, gi, box=box)
        acc = sq if acc is None else acc + sq
    return (integrate_x(acc) * pd.epsilon).real_part()


def residual(pd, lam, u, box=None):
    """``F(u)`` projected on ``box`` (default ``u.box``)."""
    _check_zero_x_mean(u)
    box = tuple(box) if box is not None else u.box
    om = pd.omega(lam)
    a = nonlocal_coefficient(pd, u)
    lap = laplacian(u)
    out = omega_dphi(u, om, 2).resize(box) - lap.resize(box)
    if pd.epsilon:
        out = out - multiply(a, lap, box=box) - (pd.g * pd.epsilon).resize(box)
    return out


def recover_v0(pd, lam):
    """``v0 = eps (omega . d_phi)^-2 f0``."""
    return invert_omega_dphi(pd.f0, pd.omega(lam), 2) * pd.epsilon


def full_residual(pd, lam, v, box=None):
    """Original functional on ``v = v0 + u`` including the x-mean part."""
    box = tuple(box) if box is not None else v.box
    om = pd.omega(lam)
    a = nonlocal_coefficient(pd, x_mean_split(v)[1])
    lap = laplacian(v)
    out = omega_dphi(v, om, 2).resize(box) - lap.resize(box)
    if pd.epsilon:
        out = out - multiply(a, lap, box=box) - (pd.f * pd.epsilon).resize(box)
    return out


def remainder_R(pd, u, h, box=None):
    """Nonlocal part of the differential: ``2 eps Delta u int Delta u h dx``."""
    box = tuple(box) if box is not None else h.box
    if pd.epsilon == 0:
        return TorusFunction(h.nu, h.d, box)
    lu = laplacian(u)
    Lb = (u.box[0] + h.box[0], max(u.box[1], h.box[1]))
    w = integrate_x(multiply(lu, h, box=Lb))
    return multiply(w, lu, box=box) * (2 * pd.epsilon)


def apply_linearized(pd, lam, u, h, box=None):
    """``L(u) h = (omega.d_phi)^2 h - (1 + a) Delta h + 2 eps Delta u int Delta u h``.

    This is the exact derivative of :func:`residual` at ``u`` in direction
    ``h``, projected on ``box`` (default ``h.box``).
    """
    _check_zero_x_mean(u)
    _check_zero_x_mean(h, "h")
    box = tuple(box) if box is not None else h.box
    om = pd.omega(lam)
    lap = laplacian(h)
    out = omega_dphi(h, om, 2).resize(box) - lap.resize(box)
    if pd.epsilon:
        a = nonlocal_coefficient(pd, u)
        out = out - multiply(a, lap, box=box) + remainder_R(pd, u, h, box)
    return out


def quadratic_remainder(pd, lam, u, h, box=None):
    """``Q(u, h) = F(u + h) - F(u) - L(u) h``."""
    box = tuple(box) if box is not None else (max(u.box[0], h.box[0]),
                                               max(u.box[1], h.box[1]))
    return (residual(pd, lam, u + h, box) - residual(pd, lam, u, box)
            - apply_linearized(pd, lam, u, h, box))


def collocation_residual(pd, lam, v, n_phi=None, n_x=None):
    """Root-mean-square of the full equation sampled on a dense grid.

    Independent of the Galerkin projection: ``v`` and its derivatives are
    evaluated by direct trigonometric sums, the nonlocal integral by the
    trapezoidal rule in ``x``.  The default grids resolve every mode of the
    residual (phi-degree ``3 Lphi``), so nothing is aliased.  Returns ``sqrt(mean(r^2))`` which equals
    the coefficient l2-norm of the residual by Parseval.  Supports
    ``nu = d = 1``.
    """
    if (v.nu, v.d) != (1, 1):
        raise DomainError("collocation oracle implemented for nu = d = 1")
    Lp, Lx = v.box
    Lf = max(pd.f.box)
    n_phi = n_phi or 8 * max(Lp, Lf) + 8
    n_x = n_x or 4 * max(Lx, Lf) + 8
    om = float(pd.omega(lam)[0])
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    x = 2 * np.pi * np.arange(n_x) / n_x

    def synth(c, ell, j, wl, wj):
        Ep = np.exp(1j * np.outer(phi, ell)) * wl[None, :]
        Ex = np.exp(1j * np.outer(x, j)) * wj[None, :]
        return (Ep @ c @ Ex.T).real

    ell = np.arange(-Lp, Lp + 1)
    j = np.arange(-Lx, Lx + 1)
    one_l, one_j = np.ones_like(ell, complex), np.ones_like(j, complex)
    c = np.asarray(v.coeffs)
    dtt = synth(c, ell, j, -(om * ell) ** 2 + 0j, one_j)
    lap = synth(c, ell, j, one_l, -(j.astype(float) ** 2) + 0j)
    vx = synth(c, ell, j, one_l, 1j * j)
    integral = np.mean(vx ** 2, axis=1) * 2 * np.pi
    fl = np.arange(-pd.f.box[0], pd.f.box[0] + 1)
    fj = np.arange(-pd.f.box[1], pd.f.box[1] + 1)
    fv = synth(np.asarray(pd.f.coeffs), fl, fj, np.ones_like(fl, complex),
               np.ones_like(fj, complex))
    r = dtt - (1 + pd.epsilon * integral)[:, None] * lap - pd.epsilon * fv
    return float(np.sqrt(np.mean(r ** 2)))


def tame_constant(pd, lam, u, s):
    """``||F(u)||_s / (1 + ||u||_{s+2})`` (measured constant in the tame bound)."""
    return sobolev_norm(residual(pd, lam, u), s) / (1 + sobolev_norm(u, s + 2))


__all__ = [
    "ProblemData", "forcing_preset", "nonlocal_coefficient", "residual",
    "recover_v0", "full_residual", "remainder_R", "apply_linearized",
    "quadratic_remainder", "collocation_residual", "tame_constant",
    "phi_part", "lift_phi", "s0_of",
]
