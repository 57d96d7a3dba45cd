"""Matrices indexed by ``Z^nu x Z^d`` and their s-decay norm.

For a matrix ``M`` with rows and columns labelled by lattice points, the
s-decay norm is

    |M|_s^2 = sum_k [M(k)]^2 <k>^(2s),   [M(k)] = max_{r - c = k} |M_{r,c}|,

with ``<k> = max(1, |k|_inf)``.  Storage is dense.
"""
from __future__ import annotations

import csv
import io

import numpy as np

from .errors import DomainError, Singular
from .fourier import TorusFunction, weighted_norm

COND_LIMIT = 1e12


def box_indices(nu, d, box, N=None, center=None, exclude_j0=True):
    """Lattice points of the box, optionally within max-distance ``N`` of
    ``center``.  Rows are ordered lexicographically.
    """
    Lphi, Lx = box[0], (box[1] if d else 0)
    axes = [np.arange(-Lphi, Lphi + 1)] * nu + [np.arange(-Lx, Lx + 1)] * d
    g = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, nu + d)
    keep = np.ones(len(g), bool)
    if exclude_j0 and d:
        keep &= np.any(g[:, nu:] != 0, axis=1)
    if N is not None:
        c = np.zeros(nu + d, int) if center is None else np.asarray(center, int)
        keep &= np.max(np.abs(g - c), axis=1) <= N
    return g[keep]


def _as_index_array(idx, n):
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        return np.zeros((0, n), int)
    return idx.reshape(-1, n)


class DecayMatrix:
    """Dense matrix with lattice row/column labels."""

    __slots__ = ("nu", "d", "rows", "cols", "entries", "_row_pos", "_col_pos")

    def __init__(self, nu, d, rows, cols, entries):
        n = nu + d
        rows = _as_index_array(rows, n)
        cols = _as_index_array(cols, n)
        entries = np.array(entries, dtype=complex).reshape(len(rows), len(cols))
        for a in (rows, cols, entries):
            a.setflags(write=False)
        object.__setattr__(self, "nu", int(nu))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_row_pos", None)
        object.__setattr__(self, "_col_pos", None)

    def __setattr__(self, name, value):
        raise AttributeError("DecayMatrix is immutable")

    def __repr__(self):
        return f"DecayMatrix({len(self.rows)}x{len(self.cols)}, nu={self.nu}, d={self.d})"

    @property
    def shape(self):
        return self.entries.shape

    # -- constructors -------------------------------------------------
    @classmethod
    def identity(cls, nu, d, idx):
        idx = _as_index_array(idx, nu + d)
        return cls(nu, d, idx, idx, np.eye(len(idx)))

    @classmethod
    def diagonal(cls, nu, d, idx, values):
        idx = _as_index_array(idx, nu + d)
        return cls(nu, d, idx, idx, np.diag(np.asarray(values, complex)))

    @classmethod
    def multiplication(cls, a, rows, cols=None):
        """Matrix of ``h -> a h``: entry ``(r, c)`` is ``a_{r - c}``."""
        n = a.nu + a.d
        rows = _as_index_array(rows, n)
        cols = rows if cols is None else _as_index_array(cols, n)
        diff = rows[:, None, :] - cols[None, :, :]
        L = np.array([a.box[0]] * a.nu + [a.box[1]] * a.d)
        inside = np.all(np.abs(diff) <= L, axis=-1)
        pos = np.where(inside[..., None], diff + L, 0)
        vals = a.coeffs[tuple(pos[..., i] for i in range(n))]
        return cls(a.nu, a.d, rows, cols, np.where(inside, vals, 0))

    def with_entries(self, entries):
        return DecayMatrix(self.nu, self.d, self.rows, self.cols, entries)

    # -- algebra ------------------------------------------------------
    def __matmul__(self, other):
        if isinstance(other, DecayMatrix):
            if not np.array_equal(self.cols, other.rows):
                raise DomainError("inner index sets differ")
            return DecayMatrix(self.nu, self.d, self.rows, other.cols,
                               self.entries @ other.entries)
        return NotImplemented

    def __add__(self, other):
        self._same_sets(other)
        return self.with_entries(self.entries + other.entries)

    def __sub__(self, other):
        self._same_sets(other)
        return self.with_entries(self.entries - other.entries)

    def __mul__(self, scalar):
        return self.with_entries(self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_entries(-self.entries)

    def _same_sets(self, other):
        if not (np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)):
            raise DomainError("index sets differ")

    def power(self, n):
        if not np.array_equal(self.rows, self.cols):
            raise DomainError("power needs a square matrix on one index set")
        return self.with_entries(np.linalg.matrix_power(self.entries, int(n)))

    # -- norms --------------------------------------------------------
    def decay_profile(self):
        """``(diffs, [M(k)])`` over the distinct differences ``k = r - c``."""
        n = self.nu + self.d
        if self.entries.size == 0:
            return np.zeros((0, n), int), np.zeros(0)
        diff = (self.rows[:, None, :] - self.cols[None, :, :]).reshape(-1, n)
        lo = diff.min(axis=0)
        span = diff.max(axis=0) - lo + 1
        key = np.ravel_multi_index(tuple((diff - lo).T), tuple(span))
        order = np.argsort(key, kind="stable")
        ks = key[order]
        starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
        mags = np.abs(self.entries).ravel()[order]
        sup = np.maximum.reduceat(mags, starts)
        kk = np.stack(np.unravel_index(ks[starts], tuple(span)), axis=1) + lo
        return kk, sup

    def decay_norm(self, s):
        k, sup = self.decay_profile()
        if len(sup) == 0:
            return 0.0
        w = np.maximum(1, np.max(np.abs(k), axis=1))
        return weighted_norm(sup, w, s)

    def operator_norm(self):
        """Spectral norm (largest singular value), i.e. ``||.||_0``."""
        if self.entries.size == 0:
            return 0.0
        return float(np.linalg.norm(self.entries, 2))

    def hermitian_defect(self):
        """``max |M - M^*|`` (requires a square matrix on one index set)."""
        if not np.array_equal(self.rows, self.cols):
            raise DomainError("not square on a single index set")
        if self.entries.size == 0:
            return 0.0
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    # -- index manipulation -------------------------------------------
    def _positions(self, which):
        attr = "_row_pos" if which == "rows" else "_col_pos"
        pos = getattr(self, attr)
        if pos is None:
            idx = getattr(self, which)
            pos = {tuple(int(v) for v in k): i for i, k in enumerate(idx)}
            object.__setattr__(self, attr, pos)
        return pos

    def submatrix(self, center, N):
        """Restriction to ``{k : |k - center|_inf <= N}`` on both sides."""
        c = np.asarray(center, int)
        rmask = np.max(np.abs(self.rows - c), axis=1) <= N if len(self.rows) \
            else np.zeros(0, bool)
        cmask = np.max(np.abs(self.cols - c), axis=1) <= N if len(self.cols) \
            else np.zeros(0, bool)
        return DecayMatrix(self.nu, self.d, self.rows[rmask], self.cols[cmask],
                           self.entries[np.ix_(rmask, cmask)])

    def restrict(self, rows, cols=None):
        """Restriction to explicit index subsets (must be present)."""
        rows = _as_index_array(rows, self.nu + self.d)
        cols = rows if cols is None else _as_index_array(cols, self.nu + self.d)
        rp, cp = self._positions("rows"), self._positions("cols")
        try:
            ri = [rp[tuple(int(v) for v in k)] for k in rows]
            ci = [cp[tuple(int(v) for v in k)] for k in cols]
        except KeyError as e:
            raise IndexError(f"index {e.args[0]} not in the matrix") from None
        return DecayMatrix(self.nu, self.d, rows, cols,
                           self.entries[np.ix_(ri, ci)])

    # -- action ---------------------------------------------------------
    def apply(self, h, box=None):
        """Matrix-vector product on the coefficients of ``h``.

        Coefficients of ``h`` outside the column set must vanish
        (``IndexError`` otherwise).  The result lives on ``box`` (default:
        the smallest box containing the rows and ``h.box``).
        """
        n = self.nu + self.d
        if (h.nu, h.d) != (self.nu, self.d):
            raise DomainError("dimension mismatch")
        L = np.array([h.box[0]] * h.nu + [h.box[1]] * h.d)
        inside = np.all(np.abs(self.cols) <= L, axis=1)
        vec = np.zeros(len(self.cols), complex)
        if np.any(inside):
            pos = self.cols[inside] + L
            vec[inside] = h.coeffs[tuple(pos[:, i] for i in range(n))]
        covered = np.zeros(h.coeffs.shape, bool)
        if np.any(inside):
            covered[tuple(pos[:, i] for i in range(n))] = True
        if np.any(np.abs(h.coeffs[~covered]) > 0):
            raise IndexError("h has coefficients outside the column set")
        out = self.entries @ vec
        if box is None:
            m = np.max(np.abs(self.rows), axis=0) if len(self.rows) else np.zeros(n, int)
            Lp = max([h.box[0]] + [int(v) for v in m[:self.nu]])
            Lx = max([h.box[1]] + [int(v) for v in m[self.nu:]]) if self.d else 0
            box = (Lp, Lx)
        res = TorusFunction(self.nu, self.d, box)
        c = np.zeros(res.coeffs.shape, complex)
        Lr = np.array([res.box[0]] * self.nu + [res.box[1]] * self.d)
        ok = np.all(np.abs(self.rows) <= Lr, axis=1)
        rp = self.rows[ok] + Lr
        c[tuple(rp[:, i] for i in range(n))] = out[ok]
        return res.with_coeffs(c)

    def vector(self, h, which="cols"):
        """Coefficients of ``h`` listed in the order of the column (row) set."""
        idx = self.cols if which == "cols" else self.rows
        n = self.nu + self.d
        L = np.array([h.box[0]] * h.nu + [h.box[1]] * h.d)
        inside = np.all(np.abs(idx) <= L, axis=1)
        vec = np.zeros(len(idx), complex)
        pos = idx[inside] + L
        vec[inside] = h.coeffs[tuple(pos[:, i] for i in range(n))]
        return vec

    # -- real basis -----------------------------------------------------
    def real_basis(self):
        """Matrix in the real cos/sin basis (index set closed under ``k -> -k``).

        Returns a real array when the operator maps real functions to real
        functions; symmetric iff the complex matrix is Hermitian.
        """
        if not np.array_equal(self.rows, self.cols):
            raise DomainError("real basis needs one index set")
        Q = real_basis_transform(self.rows)
        A = Q.conj().T @ self.entries @ Q
        return A

    # -- I/O ------------------------------------------------------------
    def to_csv(self, stream=None, header_comment=None, tol=0.0):
        """CSV rows ``(ell_row..., j_row..., ell_col..., j_col..., re, im)``."""
        own = stream is None
        stream = io.StringIO() if own else stream
        if header_comment:
            stream.write(f"# {header_comment}\n")
        w = csv.writer(stream, lineterminator="\n")
        nu, d = self.nu, self.d
        w.writerow([f"ell_row{i}" for i in range(nu)] + [f"j_row{i}" for i in range(d)]
                   + [f"ell_col{i}" for i in range(nu)] + [f"j_col{i}" for i in range(d)]
                   + ["re", "im"])
        for i, r in enumerate(self.rows):
            for k, c in enumerate(self.cols):
                v = self.entries[i, k]
                if abs(v) <= tol:
                    continue
                w.writerow([int(x) for x in r] + [int(x) for x in c]
                           + [repr(float(v.real)), repr(float(v.imag))])
        return stream.getvalue() if own else None

    @classmethod
    def from_csv(cls, text, nu, d):
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rdr = csv.reader(lines[1:])
        n = nu + d
        recs = [[int(v) for v in row[:2 * n]] + [float(row[2 * n]), float(row[2 * n + 1])]
                for row in rdr]
        rows = sorted({tuple(rc[:n]) for rc in recs})
        cols = sorted({tuple(rc[n:2 * n]) for rc in recs})
        rp = {k: i for i, k in enumerate(rows)}
        cp = {k: i for i, k in enumerate(cols)}
        E = np.zeros((len(rows), len(cols)), complex)
        for rc in recs:
            E[rp[tuple(rc[:n])], cp[tuple(rc[n:2 * n])]] = complex(rc[-2], rc[-1])
        return cls(nu, d, rows, cols, E)


def real_basis_transform(idx):
    """Unitary ``Q`` whose columns are ``(e_k + e_-k)/sqrt2`` and
    ``(e_k - e_-k)/(i sqrt2)`` for each pair ``{k, -k}`` (``e_0`` alone).
    """
    idx = np.asarray(idx, int)
    pos = {tuple(int(v) for v in k): i for i, k in enumerate(idx)}
    n = len(idx)
    Q = np.zeros((n, n), complex)
    col = 0
    seen = set()
    for i, k in enumerate(idx):
        kt = tuple(int(v) for v in k)
        if kt in seen:
            continue
        mk = tuple(-v for v in kt)
        if mk not in pos:
            raise DomainError(f"index set not symmetric: missing {mk}")
        if mk == kt:
            Q[i, col] = 1
            col += 1
        else:
            m = pos[mk]
            Q[i, col], Q[m, col] = 1 / np.sqrt(2), 1 / np.sqrt(2)
            Q[i, col + 1], Q[m, col + 1] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            col += 2
        seen.update({kt, mk})
    return Q


def invert_dense(M, cond_limit=COND_LIMIT):
    """Dense inverse; raises :class:`Singular` above the 1-norm condition limit."""
    if len(M.rows) != len(M.cols):
        raise DomainError("matrix is not square")
    if M.entries.size == 0:
        return DecayMatrix(M.nu, M.d, M.cols, M.rows, np.zeros((0, 0)))
    A = M.entries
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise Singular("matrix is singular") from None
    cond = np.linalg.norm(A, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > cond_limit:
        raise Singular(f"condition estimate {cond:.3e} exceeds {cond_limit:.1e}")
    return DecayMatrix(M.nu, M.d, M.cols, M.rows, inv)


def C_of(s, s0):
    """Constant used in the calculus inequalities: ``4^(s - s0)``."""
    return 4.0 ** (s - s0)


def interpolation_check(M1, M2, s, s0, C=None):
    """``(|M1 M2|_s, |M1|_s0 |M2|_s / 2 + C(s) |M1|_s |M2|_s0 / 2)``."""
    C = C_of(s, s0) if C is None else C
    lhs = (M1 @ M2).decay_norm(s)
    rhs = 0.5 * M1.decay_norm(s0) * M2.decay_norm(s) \
        + 0.5 * C * M1.decay_norm(s) * M2.decay_norm(s0)
    return lhs, rhs


def sobolev_check(M, h, s, s0, C=None):
    """``(||M h||_s, C(s) (|M|_s0 ||h||_s + |M|_s ||h||_s0))``."""
    from .fourier import sobolev_norm
    C = C_of(s, s0) if C is None else C
    lhs = sobolev_norm(M.apply(h), s)
    rhs = C * (M.decay_norm(s0) * sobolev_norm(h, s)
               + M.decay_norm(s) * sobolev_norm(h, s0))
    return lhs, rhs


def power_check(M, n, s, s0, C=None):
    """``(|M^n|_s, C(s)^n |M|_s |M|_s0^(n-1))``."""
    C = C_of(s, s0) if C is None else C
    lhs = M.power(n).decay_norm(s)
    rhs = C ** n * M.decay_norm(s) * M.decay_norm(s0) ** (n - 1)
    return lhs, rhs
