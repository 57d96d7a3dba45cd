"""Fourier representation of real functions on T^nu x T^d.

A :class:`TorusFunction` stores the complex exponential coefficients
``c[l, j]`` of

    u(phi, x) = sum_{l, j} c[l, j] exp(i (l . phi + j . x))

on a centered box ``|l|_inf <= Lphi``, ``|j|_inf <= Lx``.  Functions of
``phi`` alone use ``d = 0``.  Real functions satisfy
``c[-l, -j] = conj(c[l, j])``.

Norms use the weight ``<l, j> = max(1, |l|_inf, |j|_inf)``; integrals over
``T^d`` are *not* normalized (a factor ``(2 pi)^d`` appears).

:class:`PhiGrid` is the mixed "phi grid values x x-coefficients" layout used
for compositions with torus diffeomorphisms and for pointwise products with
functions of ``phi``.
"""
from __future__ import annotations

import json

import numpy as np
from scipy import signal

from .errors import DomainError, MeanNotZero, SmallDivisorUnderflow

MEAN_TOL = 1e-12
DIVISOR_FLOOR = 1e-14
# products of boxes up to this many coefficient pairs use direct convolution
DIRECT_CONV_LIMIT = 200_000


def s0_of(nu, d):
    """Smallest admissible Sobolev index ``floor((nu + d)/2) + 1``."""
    if nu < 1 or d < 0:
        raise DomainError(f"need nu >= 1 and d >= 0, got nu={nu}, d={d}")
    return (nu + d) // 2 + 1


def _box_tuple(box, d):
    Lphi = int(box[0])
    Lx = int(box[1]) if (d > 0 and len(box) > 1) else 0
    if Lphi < 0 or Lx < 0:
        raise DomainError(f"box must be non-negative, got {box}")
    return (Lphi, Lx)


class TorusFunction:
    """Truncated Fourier series of a function on ``T^nu x T^d``.

    Instances are immutable: the coefficient array is read-only and all
    operations return new objects.
    """

    __slots__ = ("nu", "d", "box", "coeffs")

    def __init__(self, nu, d, box, coeffs=None):
        nu, d = int(nu), int(d)
        if nu < 1 or d < 0:
            raise DomainError(f"need nu >= 1, d >= 0 (got {nu}, {d})")
        box = _box_tuple(box, d)
        shape = (2 * box[0] + 1,) * nu + (2 * box[1] + 1,) * d
        if coeffs is None:
            c = np.zeros(shape, dtype=complex)
        else:
            c = np.array(coeffs, dtype=complex)
            if c.shape != shape:
                raise DomainError(f"coefficient shape {c.shape} != {shape}")
        c.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("TorusFunction is immutable")

    def __repr__(self):
        return f"TorusFunction(nu={self.nu}, d={self.d}, box={self.box})"

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, nu, d, box):
        return cls(nu, d, box)

    @classmethod
    def from_modes(cls, nu, d, box, modes, real=True):
        """Build from ``{(ell, j): value}``; ``real`` adds conjugate partners.

        ``ell`` and ``j`` are tuples (or ints when the dimension is 1).
        """
        box = _box_tuple(box, d)
        c = np.zeros((2 * box[0] + 1,) * nu + (2 * box[1] + 1,) * d, complex)
        for (ell, j), val in modes.items():
            ell = np.atleast_1d(ell).astype(int)
            j = np.atleast_1d(j).astype(int) if d else np.zeros(0, int)
            if len(ell) != nu or len(j) != d:
                raise DomainError(f"mode ({ell}, {j}) has wrong dimension")
            k = tuple(np.concatenate([ell, j]))
            idx = _index_of(k, nu, box)
            c[idx] += val
            if real:
                c[_index_of(tuple(-np.array(k)), nu, box)] += np.conj(val)
        return cls(nu, d, box, c)

    @classmethod
    def random(cls, rng, nu, d, box, decay=0.0, radius=None,
               zero_x_mean=True, real=True):
        """Random coefficients ``~ N(0,1) <k>^(-decay)`` on ``|k| <= radius``."""
        f = cls(nu, d, box)
        w = f.weights()
        c = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
        c = c * w ** (-float(decay))
        if radius is not None:
            c[f.max_norms() > radius] = 0
        if zero_x_mean and d > 0:
            c[f._j_zero_mask()] = 0
        if real:
            c = 0.5 * (c + _conj_flip(c))
        return cls(nu, d, box, c)

    @classmethod
    def from_grid(cls, values, box, nu, d):
        """Coefficients from samples on a uniform grid ``2 pi k / M``.

        Exact when the sampled function is a trigonometric polynomial whose
        modes fit in the grid (no aliasing).
        """
        values = np.asarray(values)
        n = nu + d
        if values.ndim != n:
            raise DomainError("grid rank does not match nu + d")
        box = _box_tuple(box, d)
        C = np.fft.fftn(values) / values.size
        out = np.zeros((2 * box[0] + 1,) * nu + (2 * box[1] + 1,) * d, complex)
        idx = []
        for ax in range(n):
            L = box[0] if ax < nu else box[1]
            if values.shape[ax] < 2 * L + 1:
                raise DomainError("grid too coarse for the requested box")
            idx.append(np.arange(-L, L + 1) % values.shape[ax])
        out[...] = C[np.ix_(*idx)]
        if np.isrealobj(values):
            out = 0.5 * (out + _conj_flip(out))
        return cls(nu, d, box, out)

    # -- index helpers ------------------------------------------------
    def axes_modes(self):
        """Per-axis integer frequencies (phi axes first)."""
        Lphi, Lx = self.box
        return ([np.arange(-Lphi, Lphi + 1)] * self.nu
                + [np.arange(-Lx, Lx + 1)] * self.d)

    def _grids(self):
        return np.meshgrid(*self.axes_modes(), indexing="ij")

    def max_norms(self):
        g = self._grids()
        return np.max(np.abs(np.stack(g)), axis=0)

    def weights(self):
        return np.maximum(1, self.max_norms())

    def _j_zero_mask(self):
        g = self._grids()[self.nu:]
        if not g:
            return np.ones(self.coeffs.shape, bool)
        return np.all(np.stack(g) == 0, axis=0)

    def _ell_zero_mask(self):
        g = self._grids()[:self.nu]
        return np.all(np.stack(g) == 0, axis=0)

    def ell_dot(self, omega):
        """Array of ``omega . ell`` over the coefficient box."""
        omega = np.asarray(omega, float)
        if omega.shape != (self.nu,):
            raise DomainError(f"omega must have length {self.nu}")
        g = self._grids()[:self.nu]
        return sum(w * gi for w, gi in zip(omega, g))

    def j_squared(self):
        """Array of Euclidean ``|j|^2`` over the coefficient box."""
        g = self._grids()[self.nu:]
        return sum(gi.astype(float) ** 2 for gi in g) if g else np.zeros(
            self.coeffs.shape)

    def coeff(self, ell, j=()):
        k = tuple(np.atleast_1d(ell)) + tuple(np.atleast_1d(j) if self.d else ())
        try:
            return complex(self.coeffs[_index_of(k, self.nu, self.box)])
        except IndexError:
            return 0j

    # -- algebra ------------------------------------------------------
    def _check_compatible(self, other):
        if not isinstance(other, TorusFunction):
            return NotImplemented
        if (self.nu, self.d) != (other.nu, other.d):
            raise DomainError("incompatible torus dimensions")
        return True

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        box = (max(self.box[0], other.box[0]), max(self.box[1], other.box[1]))
        return TorusFunction(self.nu, self.d, box,
                             self.resize(box).coeffs + other.resize(box).coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return TorusFunction(self.nu, self.d, self.box, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, TorusFunction):
            return multiply(self, scalar)
        return TorusFunction(self.nu, self.d, self.box, self.coeffs * scalar)

    __rmul__ = __mul__

    def resize(self, box):
        """Zero-pad or truncate to ``box``."""
        box = _box_tuple(box, self.d)
        if box == self.box:
            return self
        out = np.zeros((2 * box[0] + 1,) * self.nu + (2 * box[1] + 1,) * self.d,
                       complex)
        src, dst = [], []
        for ax in range(self.nu + self.d):
            Lo = self.box[0] if ax < self.nu else self.box[1]
            Ln = box[0] if ax < self.nu else box[1]
            m = min(Lo, Ln)
            src.append(slice(Lo - m, Lo + m + 1))
            dst.append(slice(Ln - m, Ln + m + 1))
        out[tuple(dst)] = self.coeffs[tuple(src)]
        return TorusFunction(self.nu, self.d, box, out)

    def with_coeffs(self, coeffs):
        return TorusFunction(self.nu, self.d, self.box, coeffs)

    # -- reality ------------------------------------------------------
    def reality_defect(self):
        return float(np.max(np.abs(self.coeffs - _conj_flip(self.coeffs)),
                            initial=0.0))

    def is_real(self, tol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        return self.reality_defect() <= tol * scale

    def real_part(self):
        """Real part of the represented function (symmetrized coefficients)."""
        return self.with_coeffs(0.5 * (self.coeffs + _conj_flip(self.coeffs)))

    # -- evaluation ---------------------------------------------------
    def to_grid(self, sizes):
        """Samples on the uniform grid with ``sizes`` points per axis."""
        sizes = tuple(int(s) for s in np.broadcast_to(sizes, (self.nu + self.d,)))
        big = np.zeros(sizes, complex)
        idx = []
        for ax, m in enumerate(self.axes_modes()):
            if sizes[ax] < len(m):
                raise DomainError("grid too coarse for the box (aliasing)")
            idx.append(m % sizes[ax])
        big[np.ix_(*idx)] = self.coeffs
        vals = np.fft.ifftn(big) * big.size
        return vals.real if self.is_real() else vals

    def evaluate(self, phi, x=None):
        """Direct trigonometric sum at points ``phi`` (n, nu), ``x`` (n, d)."""
        phi = np.atleast_2d(np.asarray(phi, float))
        pts = phi if self.d == 0 else np.hstack(
            [phi, np.atleast_2d(np.asarray(x, float))])
        g = [gi.ravel() for gi in self._grids()]
        K = np.stack(g, axis=1)
        vals = np.exp(1j * pts @ K.T) @ self.coeffs.ravel()
        return vals.real if self.is_real() else vals

    # -- serialization ------------------------------------------------
    def to_dict(self):
        """JSON-ready dict storing one member of each conjugate pair."""
        g = [gi.ravel() for gi in self._grids()]
        K = np.stack(g, axis=1)
        c = self.coeffs.ravel()
        modes = []
        real = self.is_real()
        for k, val in zip(K, c):
            if val == 0:
                continue
            if real and _lex_sign(k) < 0:
                continue
            modes.append({"ell": [int(v) for v in k[:self.nu]],
                          "j": [int(v) for v in k[self.nu:]],
                          "re": float(val.real), "im": float(val.imag)})
        return {"nu": self.nu, "d": self.d, "box": list(self.box),
                "real": real, "modes": modes}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data):
        nu, d, box = int(data["nu"]), int(data["d"]), data["box"]
        real = bool(data.get("real", True))
        box = _box_tuple(box, d)
        c = np.zeros((2 * box[0] + 1,) * nu + (2 * box[1] + 1,) * d, complex)
        for m in data["modes"]:
            k = tuple(m["ell"]) + tuple(m["j"])
            val = complex(m["re"], m["im"])
            c[_index_of(k, nu, box)] = val
            if real:
                c[_index_of(tuple(-v for v in k), nu, box)] = np.conj(val)
        return cls(nu, d, box, c)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _lex_sign(k):
    for v in k:
        if v > 0:
            return 1
        if v < 0:
            return -1
    return 0


def _index_of(k, nu, box):
    idx = []
    for ax, v in enumerate(k):
        L = box[0] if ax < nu else box[1]
        if abs(v) > L:
            raise IndexError(f"mode {k} outside box {box}")
        idx.append(int(v) + L)
    return tuple(idx)


def _conj_flip(c):
    return np.conj(c[(slice(None, None, -1),) * c.ndim])


# ---------------------------------------------------------------------
# norms and projections

def weighted_norm(coeffs, weights, s):
    """``sqrt(sum w^(2s) |c|^2)`` computed without overflow for large ``s``."""
    a = np.abs(np.asarray(coeffs)).ravel()
    w = np.asarray(weights, float).ravel()
    mask = a > 0
    if not np.any(mask):
        return 0.0
    a, w = a[mask], w[mask]
    wmax = w.max()
    scaled = (w / wmax) ** s * a
    return float(np.exp(s * np.log(wmax)) * np.sqrt(np.sum(scaled ** 2)))


def sobolev_norm(u, s):
    """``||u||_s^2 = sum <l,j>^(2s) |c_{l,j}|^2``."""
    return weighted_norm(u.coeffs, u.weights(), s)


def project(u, N, complement=False):
    """``Pi_N``: keep modes with ``0 < max(|l|,|j|) <= N`` (or the rest)."""
    n = u.max_norms()
    keep = (n <= N) & (n > 0)
    if complement:
        keep = ~keep
    return u.with_coeffs(np.where(keep, u.coeffs, 0))


def x_mean_split(v):
    """Split ``v = v0 + u`` with ``v0`` the x-average (modes ``j = 0``)."""
    mask = v._j_zero_mask()
    return (v.with_coeffs(np.where(mask, v.coeffs, 0)),
            v.with_coeffs(np.where(mask, 0, v.coeffs)))


def phi_part(v):
    """The ``j = 0`` modes of ``v`` as a function of ``phi`` only (d = 0)."""
    if v.d == 0:
        return v
    sl = (slice(None),) * v.nu + (v.box[1],) * v.d
    return TorusFunction(v.nu, 0, (v.box[0], 0), v.coeffs[sl])


def lift_phi(f, d, Lx=0):
    """Embed a function of ``phi`` into ``T^nu x T^d`` (``j = 0`` modes)."""
    if f.d != 0:
        raise DomainError("lift_phi expects a function of phi only")
    out = TorusFunction(f.nu, d, (f.box[0], Lx))
    c = np.zeros(out.coeffs.shape, complex)
    c[(slice(None),) * f.nu + (Lx,) * d] = f.coeffs
    return out.with_coeffs(c)


# ---------------------------------------------------------------------
# differential operators

def omega_dphi(u, omega, order=1):
    """``(omega . d_phi)^order u``."""
    sym = (1j * u.ell_dot(omega)) ** int(order)
    return u.with_coeffs(u.coeffs * sym)


def invert_omega_dphi(u, omega, order=1):
    """Inverse of ``(omega . d_phi)^order`` on functions with zero phi-mean.

    Raises :class:`MeanNotZero` if the ``l = 0`` coefficients exceed
    ``1e-12 * ||u||_{s0}`` and :class:`SmallDivisorUnderflow` if a mode that
    is present has ``|omega . l| < 1e-14``.
    """
    dot = u.ell_dot(omega)
    zero = u._ell_zero_mask()
    scale = sobolev_norm(u, s0_of(u.nu, u.d))
    if np.max(np.abs(u.coeffs[zero]), initial=0.0) > MEAN_TOL * scale:
        raise MeanNotZero("function has nonzero phi-average")
    tiny = (~zero) & (np.abs(dot) < DIVISOR_FLOOR) & (u.coeffs != 0)
    if np.any(tiny):
        k = np.argwhere(tiny)[0]
        raise SmallDivisorUnderflow(
            f"|omega . l| below {DIVISOR_FLOOR} at index "
            f"{tuple(int(i) for i in k)}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero, 0, u.coeffs / (1j * dot) ** int(order))
    return u.with_coeffs(out)


def grad_x(u):
    """Tuple of the ``d`` partial derivatives in ``x``."""
    g = u._grids()[u.nu:]
    return tuple(u.with_coeffs(u.coeffs * (1j * gi)) for gi in g)


def laplacian(u):
    """``Delta_x u``."""
    return u.with_coeffs(-u.j_squared() * u.coeffs)


def integrate_x(u):
    """``int_{T^d} u dx`` as a function of phi (factor ``(2 pi)^d``)."""
    return phi_part(u) * (2 * np.pi) ** u.d


# ---------------------------------------------------------------------
# products

def multiply(u, v, box=None, method="auto"):
    """Product ``u v`` projected on ``box`` (default ``u.box``).

    A function of ``phi`` alone (``d = 0``) may multiply a function on
    ``T^nu x T^d``.  Small boxes use direct convolution, larger ones an
    alias-free oversampled FFT grid; both are exact.
    """
    if u.nu != v.nu:
        raise DomainError("different nu")
    if u.d != v.d:
        if u.d == 0:
            u = lift_phi(u, v.d)
        elif v.d == 0:
            v = lift_phi(v, u.d)
        else:
            raise DomainError("different d")
    if box is None:
        box = (max(u.box[0], v.box[0]), max(u.box[1], v.box[1]))
    box = _box_tuple(box, u.d)
    nu, d = u.nu, u.d
    if method == "auto":
        method = "direct" if u.coeffs.size * v.coeffs.size <= DIRECT_CONV_LIMIT \
            else "grid"
    if method == "direct":
        full = signal.convolve(u.coeffs, v.coeffs, method="direct")
        Lf = (u.box[0] + v.box[0], u.box[1] + v.box[1])
        out = TorusFunction(nu, d, Lf, full).resize(box).coeffs
    elif method == "grid":
        sizes = []
        for ax in range(nu + d):
            i = 0 if ax < nu else 1
            sizes.append(u.box[i] + v.box[i] + box[i] + 1)
        U = _embed_fft(u.coeffs, sizes)
        V = _embed_fft(v.coeffs, sizes)
        n = int(np.prod(sizes))
        prod = np.fft.ifftn(U) * np.fft.ifftn(V) * n
        C = np.fft.fftn(prod)
        idx = [np.arange(-(box[0] if ax < nu else box[1]),
                         (box[0] if ax < nu else box[1]) + 1) % sizes[ax]
               for ax in range(nu + d)]
        out = C[np.ix_(*idx)]
    else:
        raise DomainError(f"unknown method {method!r}")
    res = TorusFunction(nu, d, box, out)
    if u.is_real() and v.is_real():
        res = res.real_part()
    return res


def _embed_fft(c, sizes):
    big = np.zeros(sizes, complex)
    idx = []
    for ax in range(c.ndim):
        L = (c.shape[ax] - 1) // 2
        idx.append(np.arange(-L, L + 1) % sizes[ax])
    big[np.ix_(*idx)] = c
    return big


# ---------------------------------------------------------------------
# mixed representation: phi on a grid, x in Fourier

class PhiGrid:
    """Uniform grid on ``T^nu`` with ``M = 2K + 1`` points per axis.

    Fields are arrays of shape ``(P, J)`` with ``P = M^nu`` grid points and
    ``J`` x-coefficients (``J = 1`` for functions of phi alone, which may
    also be passed as 1-d arrays of length ``P``).  A function of phi with
    modes ``|l| <= K`` is represented exactly, so a phi-only
    :class:`TorusFunction` with box ``K`` and its grid values are in
    bijection.
    """

    def __init__(self, nu, K):
        self.nu = int(nu)
        self.K = int(K)
        self.M = 2 * self.K + 1
        self.freqs = np.arange(-self.K, self.K + 1)
        t = 2 * np.pi * np.arange(self.M) / self.M
        g = np.meshgrid(*([t] * self.nu), indexing="ij")
        self.points = np.stack([gi.ravel() for gi in g], axis=1)
        self.P = self.M ** self.nu
        self._shape = (self.M,) * self.nu
        self._axes = tuple(range(self.nu))
        fg = np.meshgrid(*([self.freqs] * self.nu), indexing="ij")
        self._fgrid = np.stack(fg)

    def __repr__(self):
        return f"PhiGrid(nu={self.nu}, K={self.K})"

    def _as2d(self, vals):
        vals = np.asarray(vals)
        return (vals[:, None], True) if vals.ndim == 1 else (vals, False)

    def symbol(self, omega):
        """``omega . m`` on the centered mode grid, shape ``(M,)*nu``."""
        omega = np.asarray(omega, float)
        return np.tensordot(omega, self._fgrid, axes=1)

    def coeffs(self, vals):
        """Centered coefficients ``(M,)*nu + (J,)`` of grid values."""
        v, flat = self._as2d(vals)
        C = np.fft.fftn(v.reshape(self._shape + (v.shape[1],)), axes=self._axes)
        C = np.fft.fftshift(C, axes=self._axes) / self.P
        return C[..., 0] if flat else C

    def values(self, C):
        """Grid values ``(P, J)`` from centered coefficients."""
        C = np.asarray(C)
        flat = C.ndim == self.nu
        if flat:
            C = C[..., None]
        V = np.fft.ifftn(np.fft.ifftshift(C, axes=self._axes), axes=self._axes)
        V = V.reshape(self.P, C.shape[-1]) * self.P
        return V[:, 0] if flat else V

    def embed(self, c, L):
        """Zero-pad coefficients ``(2L+1,)*nu + (J,)`` to the grid modes."""
        if L > self.K:
            raise DomainError(f"box {L} exceeds grid capacity {self.K}")
        c = np.asarray(c)
        out = np.zeros(self._shape + c.shape[self.nu:], complex)
        sl = (slice(self.K - L, self.K + L + 1),) * self.nu
        out[sl] = c
        return out

    def crop(self, C, L):
        """Restrict centered coefficients to ``|l| <= L``."""
        if L > self.K:
            return self.embed_crop_pad(C, L)
        sl = (slice(self.K - L, self.K + L + 1),) * self.nu
        return np.asarray(C)[sl]

    def embed_crop_pad(self, C, L):
        C = np.asarray(C)
        out = np.zeros((2 * L + 1,) * self.nu + C.shape[self.nu:], complex)
        sl = (slice(L - self.K, L + self.K + 1),) * self.nu
        out[sl] = C
        return out

    # -- functions of phi only ----------------------------------------
    def from_function(self, f):
        """Grid values of a phi-only :class:`TorusFunction` (``box <= K``)."""
        if f.d != 0:
            raise DomainError("expected a function of phi only")
        return self.values(self.embed(f.coeffs, f.box[0]))

    def to_function(self, vals, real=True):
        """Phi-only :class:`TorusFunction` with box ``K`` from grid values."""
        f = TorusFunction(self.nu, 0, (self.K, 0), self.coeffs(vals))
        return f.real_part() if real else f

    # -- fields on T^nu x T^d -------------------------------------------
    def field_from(self, u, Lx=None):
        """Mixed field ``(P, J)`` of ``u`` with x-box ``Lx`` (default u's)."""
        if Lx is not None and Lx != u.box[1]:
            u = u.resize((u.box[0], Lx))
        J = (2 * u.box[1] + 1) ** u.d
        c = u.coeffs.reshape((2 * u.box[0] + 1,) * u.nu + (J,))
        return self.values(self.embed(c, u.box[0]))

    def field_to(self, vals, nu, d, box):
        """Project a mixed field onto a :class:`TorusFunction` on ``box``."""
        box = _box_tuple(box, d)
        C = self.crop(self.coeffs(vals), box[0])
        shape = (2 * box[0] + 1,) * nu + (2 * box[1] + 1,) * d
        return TorusFunction(nu, d, box, C.reshape(shape))

    # -- operators ------------------------------------------------------
    def mean(self, vals):
        return np.mean(vals, axis=0)

    def deriv(self, vals, omega, order=1):
        """``(omega . d_phi)^order`` applied spectrally."""
        C = self.coeffs(vals)
        sym = (1j * self.symbol(omega)) ** int(order)
        if C.ndim > self.nu:
            sym = sym[..., None]
        return self.values(C * sym)

    def inv_deriv(self, vals, omega, order=1, tol=MEAN_TOL, atol=0.0):
        """Inverse of ``(omega . d_phi)^order`` on zero-mean grid functions.

        The mean must be below ``tol * max|coeff| + atol``; it is then
        discarded.
        """
        C = self.coeffs(vals)
        sym = self.symbol(omega)
        zero = (self.K,) * self.nu
        scale = max(float(np.max(np.abs(C))), 0.0)
        if np.max(np.abs(C[zero])) > tol * scale + atol:
            raise MeanNotZero(
                f"phi-average {np.max(np.abs(C[zero])):.3e} is not zero")
        small = np.abs(sym) < DIVISOR_FLOOR
        small[zero] = False
        if np.any(small):
            k = np.argwhere(small)[0] - self.K
            raise SmallDivisorUnderflow(f"|omega . l| tiny at l={tuple(k)}")
        denom = (1j * sym) ** int(order)
        denom[zero] = 1
        if C.ndim > self.nu:
            denom = denom[..., None]
        C = C / denom
        C[zero] = 0
        return self.values(C)

    def eval_at(self, C, pts):
        """Evaluate centered coefficients at arbitrary points ``(n, nu)``."""
        C = np.asarray(C)
        flat = C.ndim == self.nu
        if flat:
            C = C[..., None]
        pts = np.asarray(pts, float)
        E = [np.exp(1j * np.outer(pts[:, i], self.freqs)) for i in range(self.nu)]
        out = np.tensordot(E[0], C, axes=([1], [0]))
        for i in range(1, self.nu):
            out = np.einsum("pm,pm...->p...", E[i], out)
        return out[:, 0] if flat else out

    def compose(self, vals, shift, omega):
        """Values of ``h(phi + omega * shift(phi))`` at the grid points."""
        omega = np.asarray(omega, float)
        pts = self.points + np.real(shift)[:, None] * omega[None, :]
        return self.eval_at(self.coeffs(vals), pts)

    def tail_fraction(self, vals, frac=0.25):
        """Share of spectral mass in the top ``frac`` of the grid modes."""
        C = self.coeffs(vals)
        n = np.max(np.abs(self._fgrid), axis=0)
        mass = np.abs(C) ** 2
        if mass.ndim > self.nu:
            mass = mass.sum(axis=-1)
        tot = mass.sum()
        if tot == 0:
            return 0.0
        return float(np.sqrt(mass[n > (1 - frac) * self.K].sum() / tot))
