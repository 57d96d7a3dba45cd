"""Frequency vectors ``omega = lambda * omega_bar`` and non-resonance checks.

All Diophantine constants are measured at a finite order by exhaustive
scans; the max-norm is used for ``|l|`` and ``|p|`` throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

#: named frequency vectors; each has algebraically independent products
PRESETS = {
    "sqrt2": (np.sqrt(2.0),),
    "quartic2": (2.0 ** 0.25,),
    "cbrt2": (1.0, 2.0 ** (1.0 / 3.0)),
}


@dataclass(frozen=True)
class FrequencyData:
    """Base frequency vector and its Diophantine constant."""

    omega_bar: tuple
    gamma0: float = 1.0
    lambda_range: tuple = (0.5, 1.5)
    nu: int = field(init=False)

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(self.omega_bar))
        if len(w) == 0 or any(v == 0 for v in w):
            raise DomainError("omega_bar components must be nonzero")
        if self.gamma0 <= 0:
            raise DomainError("gamma0 must be positive")
        lo, hi = self.lambda_range
        if not 0 < lo < hi:
            raise DomainError("lambda_range must be a positive interval")
        object.__setattr__(self, "omega_bar", w)
        object.__setattr__(self, "nu", len(w))

    @classmethod
    def preset(cls, name, gamma0=None, L=20):
        """Named vector; ``gamma0`` defaults to the measured constant at ``L``."""
        w = PRESETS[name]
        fd = cls(w, 1.0)
        if gamma0 is None:
            gamma0 = min(check_dio(fd, L)[2], check_dioquad(fd, L)[1])
        return cls(w, gamma0)

    def omega(self, lam):
        return float(lam) * np.asarray(self.omega_bar)


def _nonzero_box(n, L):
    """Integer vectors ``0 < |k|_inf <= L`` in ``Z^n``, shape ``(m, n)``."""
    ax = np.arange(-L, L + 1)
    g = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1).reshape(-1, n)
    return g[np.any(g != 0, axis=1)]


def check_dio(fd, L):
    """Check ``|omega_bar . l| >= gamma0 / |l|^nu`` for ``0 < |l| <= L``.

    Returns ``(ok, worst_l, min_value)`` where ``min_value`` is the minimum
    of ``|omega_bar . l| |l|^nu`` and ``worst_l`` attains it.
    """
    if L < 1:
        raise DomainError("L must be >= 1")
    ells = _nonzero_box(fd.nu, L)
    size = np.max(np.abs(ells), axis=1).astype(float)
    vals = np.abs(ells @ np.asarray(fd.omega_bar)) * size ** fd.nu
    i = int(np.argmin(vals))
    return bool(vals[i] >= fd.gamma0), tuple(int(v) for v in ells[i]), float(vals[i])


def _quad_monomials(w):
    nu = len(w)
    return np.array([w[i] * w[k] for i in range(nu) for k in range(i, nu)])


def check_dioquad(fd, P):
    """Check ``|sum_{i<=k} w_i w_k p_ik| >= gamma0 / |p|^(nu(nu+1))``.

    Returns ``(ok, min_value)`` with ``min_value`` the minimum of
    ``|sum w_i w_k p_ik| |p|^(nu(nu+1))`` over ``0 < |p| <= P``.
    """
    if P < 1:
        raise DomainError("P must be >= 1")
    mono = _quad_monomials(fd.omega_bar)
    ps = _nonzero_box(len(mono), P)
    size = np.max(np.abs(ps), axis=1).astype(float)
    vals = np.abs(ps @ mono) * size ** (fd.nu * (fd.nu + 1))
    m = float(vals.min())
    return bool(m >= fd.gamma0), m


def in_I_bar(lam, fd, N0, tau0, d=1):
    """``|(lambda omega_bar . l)^2 - |j|^2| >= N0^-tau0`` for ``|(l,j)| <= N0``, ``j != 0``.

    Only ``|j|^2`` enters, so ``j`` ranges over the squared Euclidean norms
    realised by ``0 < |j|_inf <= N0`` in dimension ``d``.
    """
    lam = float(lam)
    ells = np.vstack([np.zeros((1, fd.nu), int), _nonzero_box(fd.nu, N0)])
    om2 = (lam * (ells @ np.asarray(fd.omega_bar))) ** 2
    js = _nonzero_box(d, N0)
    jsq = np.unique(np.sum(js.astype(float) ** 2, axis=1))
    gap = np.min(np.abs(om2[:, None] - jsq[None, :]))
    return bool(gap >= float(N0) ** (-tau0))


def in_I_tilde(lam, fd, N0, max_coeff):
    """``|P(lambda omega_bar)| >= N0^-1 / (1 + |p|^(nu(nu+1)))`` for all
    nonzero quadratic integer polynomials ``P = p0 + sum p_ik X_i X_k`` with
    coefficients in ``[-max_coeff, max_coeff]``.
    """
    lam = float(lam)
    mono = np.concatenate([[1.0], _quad_monomials(lam * np.asarray(fd.omega_bar))])
    if max_coeff < 1:
        # only constant polynomials remain (p0 = 0 would be the zero poly)
        return True
    ps = _nonzero_box(len(mono), int(max_coeff))
    size = np.max(np.abs(ps), axis=1).astype(float)
    vals = np.abs(ps @ mono)
    thr = (1.0 / N0) / (1.0 + size ** (fd.nu * (fd.nu + 1)))
    return bool(np.all(vals >= thr))
