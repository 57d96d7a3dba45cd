"""Diagnostics for the theta-shifted operators ``L(theta) = D(theta) + R2``.

``D_{l,j}(lambda, theta) = -(lambda omega_bar.l + theta)^2 + mu |j|^2``; a
site is *regular* when ``|D| >= 1``.  The helpers below classify sites, test
N-goodness of finite blocks, scan theta for large inverses, build
Gamma-chains of singular sites and check cluster separation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .decay import DecayMatrix, box_indices, invert_dense
from .errors import DomainError, Singular
from .fourier import weighted_norm
from .reduction import reduce

EXACT_CHAIN_LIMIT = 20


def d_entry(lam, theta, mu, ell, j, omega_bar):
    """``-(lambda omega_bar.l + theta)^2 + mu |j|^2``; ``j = 0`` is excluded."""
    j = np.atleast_1d(np.asarray(j, float))
    if not np.any(j):
        raise DomainError("D is defined for j != 0 only")
    w = lam * float(np.dot(np.atleast_1d(omega_bar), np.atleast_1d(ell))) + theta
    return -w * w + mu * float(j @ j)


@dataclass(frozen=True, eq=False)
class ShiftedOperator:
    """``D(lambda, theta) + R2`` on the box of ``R2``."""

    lam: float
    theta: float
    mu: float
    R2: DecayMatrix
    omega_bar: tuple
    box: tuple

    @classmethod
    def from_reduction(cls, red, theta=0.0):
        return cls(red.lam, float(theta), red.mu, red.R2,
                   tuple(red.pd.fd.omega_bar), tuple(red.box))

    @property
    def nu(self):
        return self.R2.nu

    def diagonal(self, idx):
        idx = np.asarray(idx).reshape(-1, self.R2.nu + self.R2.d)
        w = self.lam * (idx[:, :self.nu] @ np.asarray(self.omega_bar)) + self.theta
        return -w ** 2 + self.mu * np.sum(idx[:, self.nu:].astype(float) ** 2, axis=1)

    def matrix(self, center=None, N=None):
        """Dense block on ``|k - center| <= N`` (whole box when ``N`` is None)."""
        R = self.R2
        if N is not None:
            c = np.zeros(R.nu + R.d, int) if center is None else center
            R = R.submatrix(c, N)
        return R.with_entries(R.entries + np.diag(self.diagonal(R.rows)))

    def shifted(self, theta):
        return ShiftedOperator(self.lam, float(theta), self.mu, self.R2,
                               self.omega_bar, self.box)


@dataclass(frozen=True)
class SiteClassification:
    site: tuple
    status: str                 # "regular" | "singular"
    D: float
    operator_status: str | None = None


def _diam(idx):
    idx = np.asarray(idx)
    if len(idx) < 2:
        return 0
    return int(np.max(idx.max(axis=0) - idx.min(axis=0)))


def is_N_good(A, N, tau, delta, s_list):
    """``(good, {s: |A^-1|_s})`` against ``N^(tau + delta s)``.

    The index set must have diameter at most ``4N``.  A singular block is
    N-bad and the norm map is empty.
    """
    if _diam(A.rows) > 4 * N or _diam(A.cols) > 4 * N:
        raise DomainError("diam of the index set exceeds 4N")
    try:
        inv = invert_dense(A)
    except Singular:
        return False, {}
    k, sup = inv.decay_profile()
    w = np.maximum(1, np.max(np.abs(k), axis=1)) if len(sup) else np.zeros(0)
    norms = {float(s): weighted_norm(sup, w, s) if len(sup) else 0.0 for s in s_list}
    good = all(v <= N ** (tau + delta * s) for s, v in norms.items())
    return good, norms


def s_samples(s0, s1, sigma):
    """``[s0, (s0 + s2)/2, s2]`` with ``s2 = s1 - sigma``."""
    s2 = s1 - sigma
    return [float(s0), 0.5 * (s0 + s2), float(s2)]


def classify_sites(op, region, N=None, tau=None, delta=None, s_list=None):
    """Regular/singular by ``|D| >= 1``.

    With ``N`` (and ``tau``, ``delta``, ``s_list``) each site also gets
    ``strongly-good`` (regular, or every site within distance ``N`` has an
    N-good centered block of radius ``N``) or ``weakly-bad``.  Blocks are
    the canonical windows of the operator's box.
    """
    region = np.asarray(region).reshape(-1, op.R2.nu + op.R2.d)
    D = op.diagonal(region)
    out = []
    cache = {}

    def strongly_regular(k):
        key = tuple(int(v) for v in k)
        if key not in cache:
            block = op.matrix(center=k, N=N)
            cache[key] = is_N_good(block, N, tau, delta, s_list)[0]
        return cache[key]

    boxv = np.array([op.box[0]] * op.nu + [op.box[1]] * op.R2.d)
    for k, dk in zip(region, D):
        status = "regular" if abs(dk) >= 1 else "singular"
        extra = None
        if N is not None:
            if status == "regular":
                extra = "strongly-good"
            else:
                extra = "strongly-good"
                rngs = [range(int(c) - N, int(c) + N + 1) for c in k]
                for kp in itertools.product(*rngs):
                    kp = np.array(kp)
                    if not np.any(kp[op.nu:]) or np.any(np.abs(kp) > boxv):
                        continue
                    if not strongly_regular(kp):
                        extra = "weakly-bad"
                        break
        out.append(SiteClassification(tuple(int(v) for v in k), status, float(dk), extra))
    return out


def an_regular(A, k, N, tau, delta, s_list):
    """``(A, N)``-regularity of ``k`` tested on the canonical window.

    The window is ``F = {|k' - k| <= 2N} cap E``; returns
    ``"regular (canonical window)"`` or ``"bad (canonical window)"``.
    """
    k = np.asarray(k)
    mask = np.max(np.abs(A.rows - k), axis=1) <= 2 * N
    F = A.rows[mask]
    good = is_N_good(A.restrict(F), N, tau, delta, s_list)[0] if len(F) else False
    return "regular (canonical window)" if good else "bad (canonical window)"


def an_bad_sites(red, theta, E, N, tau, delta, s_list):
    """``(L, N)``-bad sites of ``L = D(theta) + R2`` on the index set ``E``.

    A site is bad when it is singular and not ``(L, N)``-regular on its
    canonical window ``{|k' - k| <= 2N} cap E``.  ``R2`` entries come from
    :meth:`~kirchhoff_qp.reduction.ReductionResult.R2_block`, so ``E`` may
    extend beyond the reduction box.
    """
    E = np.asarray(E).reshape(-1, red.u.nu + red.u.d)
    D = red.diagonal(E, theta)
    bad = []
    for k in E[np.abs(D) < 1]:
        F = E[np.max(np.abs(E - k), axis=1) <= 2 * N]
        A = red.R2_block(F)
        A = A.with_entries(A.entries + np.diag(red.diagonal(F, theta)))
        if not is_N_good(A, N, tau, delta, s_list)[0]:
            bad.append(k)
    return np.array(bad, int).reshape(-1, E.shape[1])


def singular_sites(op, region):
    region = np.asarray(region).reshape(-1, op.R2.nu + op.R2.d)
    return region[np.abs(op.diagonal(region)) < 1]


# -- bad theta ------------------------------------------------------------
def theta_grid(N, tau1, lo, hi, cells=4):
    """Uniform grid on ``[lo, hi]`` with step at most ``N^-tau1 / cells``."""
    h = N ** (-tau1) / cells
    n = int(math.ceil((hi - lo) / h)) + 1
    return np.linspace(lo, hi, n)


def diniz_intervals(lam, mu, ell, j, omega_bar, eta):
    """Closed-form ``{theta : |D_{l,j}(theta)| < eta}`` as at most two intervals.

    With ``c = lambda omega_bar.l`` the set is
    ``-c +- (sqrt(mu|j|^2 - eta), sqrt(mu|j|^2 + eta))`` (a single interval
    around ``-c`` when ``mu|j|^2 <= eta``).
    """
    c = lam * float(np.dot(np.atleast_1d(omega_bar), np.atleast_1d(ell)))
    m = mu * float(np.dot(np.atleast_1d(j), np.atleast_1d(j)))
    hi = math.sqrt(m + eta)
    if m - eta <= 0:
        return [(-c - hi, -c + hi)]
    lo = math.sqrt(m - eta)
    return [(-c - hi, -c - lo), (-c + lo, -c + hi)]


def _window(nu, d, N, j0):
    j0 = np.atleast_1d(np.asarray(j0, int))
    center = np.concatenate([np.zeros(nu, int), j0])
    box = (N, int(np.max(np.abs(j0))) + N)
    return center, box_indices(nu, d, box, N=N, center=center)


def _runs(mask):
    """Contiguous True runs as ``(start, stop)`` index pairs (inclusive)."""
    if not np.any(mask):
        return []
    m = np.r_[False, mask, False].astype(np.int8)
    dm = np.diff(m)
    return list(zip(np.flatnonzero(dm == 1), np.flatnonzero(dm == -1) - 1))


def bad_theta_mask(pd, lam, u, j0, N, grid, tau1, red=None, method="screened"):
    """Boolean mask over ``grid``: ``||L_{N,j0}(theta)^-1||_0 > N^tau1 / 2``.

    ``L_{N,j0}(theta) = D(theta) + R2`` on ``{|l| <= N, |j - j0| <= N, j != 0}``.
    Since the block is Hermitian the inverse norm is ``1 / min |eig|``.
    ``method="dense"`` diagonalises at every grid point; ``"screened"``
    uses Weyl's bound ``|eig - D| <= ||R2||_0`` to decide most points from
    the diagonal alone and diagonalises only inside the ambiguous band;
    ``"bound"`` returns the Weyl candidate set, a superset of the bad set.
    """
    grid = np.asarray(grid, float)
    nu, d = pd.nu, pd.d
    _, idx = _window(nu, d, N, j0)
    red = red if red is not None else reduction_for(pd, lam, u, N)
    R = red.R2_block(idx).entries
    R = 0.5 * (R + R.conj().T)
    c = lam * (idx[:, :nu] @ np.asarray(pd.fd.omega_bar, float))
    m = red.mu * np.sum(idx[:, nu:].astype(float) ** 2, axis=1)
    eta = 2.0 * N ** (-tau1)

    def bad_at(th):
        ev = np.linalg.eigvalsh(R + np.diag(-(c + th) ** 2 + m))
        return np.min(np.abs(ev)) < eta

    if method == "dense":
        return np.array([bad_at(th) for th in grid], bool)
    if method not in ("screened", "bound"):
        raise ValueError(f"unknown method {method!r}")
    # L(theta) is block diagonal along the components of the pattern of R;
    # screen each block with its own ||R_b||_1 (>= ||R_b||_0, Hermitian)
    n_comp, labels = connected_components(csr_matrix(np.abs(R) > 0), directed=False)
    colsum = np.sum(np.abs(R), axis=0)
    r = np.zeros(n_comp)
    np.maximum.at(r, labels, colsum)
    a, b, lab = _intervals(grid, c, m, eta + r[labels], labels)
    cand = _cover(len(grid), a, b)
    if method == "bound":
        return cand
    mask = _mark(grid, c, m, eta - r[labels])
    order = np.argsort(lab, kind="stable")
    a, b, lab = a[order], b[order], lab[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]]) if len(lab) else []
    for s0, s1 in zip(starts, list(starts[1:]) + [len(lab)]):
        pts = np.unique(np.concatenate([np.arange(x, y) for x, y in zip(a[s0:s1], b[s0:s1])]))
        pts = pts[~mask[pts]]
        if not len(pts):
            continue
        sel = labels == lab[s0]
        Rb, cb, mb = R[np.ix_(sel, sel)], c[sel], m[sel]
        for i in pts:
            ev = np.linalg.eigvalsh(Rb + np.diag(-(cb + grid[i]) ** 2 + mb))
            mask[i] = np.min(np.abs(ev)) < eta
    return mask


def _intervals(grid, c, m, width, labels=None):
    """Index ranges ``[a, b)`` of grid points in ``{|-(c_i + theta)^2 + m_i| < width_i}``."""
    width = np.broadcast_to(np.asarray(width, float), np.shape(c))
    labels = np.zeros(len(c), int) if labels is None else np.asarray(labels)
    pos = width > 0
    c, m, width, labels = c[pos], m[pos], width[pos], labels[pos]
    hi = np.sqrt(m + width)
    lo = np.sqrt(np.maximum(m - width, 0.0))
    split = m - width > 0
    los = np.concatenate([-c - hi, (-c + lo)[split]])
    his = np.concatenate([np.where(split, -c - lo, -c + hi), (-c + hi)[split]])
    lab = np.concatenate([labels, labels[split]])
    a = np.searchsorted(grid, los, side="right")
    b = np.searchsorted(grid, his, side="left")
    ok = b > a
    return a[ok], b[ok], lab[ok]


def _cover(n, a, b):
    out = np.zeros(n + 1, np.int32)
    np.add.at(out, a, 1)
    np.add.at(out, b, -1)
    return np.cumsum(out)[:-1] > 0


def _mark(grid, c, m, width):
    """Grid points inside some open set ``{|-(c_i + theta)^2 + m_i| < width_i}``."""
    a, b, _ = _intervals(grid, c, m, width)
    return _cover(len(grid), a, b)


def reduction_for(pd, lam, u, N):
    """Reduction whose grid resolves phi-distances up to ``2N``."""
    u = u.resize((max(u.box[0], 1), max(u.box[1], 1)))
    return reduce(pd, lam, u, box=(max(N, u.box[0]), u.box[1]))


def bad_theta_set(pd, lam, u, j0, N, grid, tau1, red=None, method="screened"):
    """Bad theta as merged ``[lo, hi]`` intervals of grid points."""
    grid = np.asarray(grid, float)
    if len(grid) > 1 and np.max(np.diff(grid)) > N ** (-tau1) / 4 * (1 + 1e-9):
        raise DomainError("grid step exceeds N^-tau1 / 4")
    mask = bad_theta_mask(pd, lam, u, j0, N, grid, tau1, red=red, method=method)
    return [[float(grid[a]), float(grid[b])] for a, b in _runs(mask)]


def interval_measure(intervals, step):
    """Measure of the union, each grid point counted as one cell."""
    return float(sum(hi - lo + step for lo, hi in intervals))


def covering_count(intervals, N, tau1, step=0.0):
    """Number of intervals of length ``N^-tau1`` needed to cover the set."""
    h = N ** (-tau1)
    return int(sum(max(1, math.ceil((hi - lo + step) / h - 1e-12)) for lo, hi in intervals))


# -- chains and clusters ----------------------------------------------------
def _dist(a, b):
    return int(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _components(sites, radius, strict=False):
    n = len(sites)
    if n == 0:
        return np.zeros((0, 0), int), np.zeros(0, int), None
    sites = np.asarray(sites).reshape(n, -1)
    D = np.max(np.abs(sites[:, None, :] - sites[None, :, :]), axis=2)
    adj = (D < radius) if strict else (D <= radius)
    np.fill_diagonal(adj, False)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    return sites, labels, adj


def _longest_path(adj, members):
    """Exact longest simple path (in edges) inside a small component."""
    best = 0
    best_path = [members[0]]
    nbrs = {v: [w for w in members if adj[v, w]] for v in members}

    def dfs(v, seen, path):
        nonlocal best, best_path
        if len(path) - 1 > best:
            best, best_path = len(path) - 1, list(path)
        if best == len(members) - 1:
            return
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                path.append(w)
                dfs(w, seen, path)
                path.pop()
                seen.discard(w)

    for v in members:
        dfs(v, {v}, [v])
        if best == len(members) - 1:
            break
    return best, best_path


@dataclass(frozen=True)
class Chain:
    sites: tuple
    length: int
    exact: bool


def gamma_chains(sites, Gamma):
    """One maximal chain per connected component of the ``dist <= Gamma`` graph.

    Components with at most 20 sites get an exact longest path; larger
    ones report ``size - 1`` (an upper bound) with ``exact=False``.
    """
    if Gamma < 2:
        raise DomainError("Gamma must be at least 2")
    sites, labels, adj = _components(sites, Gamma)
    chains = []
    for lab in np.unique(labels):
        members = [int(i) for i in np.flatnonzero(labels == lab)]
        if len(members) <= EXACT_CHAIN_LIMIT:
            length, path = _longest_path(adj, members)
            chains.append(Chain(tuple(tuple(int(v) for v in sites[i]) for i in path),
                                length, True))
        else:
            chains.append(Chain(tuple(tuple(int(v) for v in sites[i]) for i in members),
                                len(members) - 1, False))
    return chains


def max_chain_length(sites, Gamma):
    ch = gamma_chains(sites, Gamma)
    return max((c.length for c in ch), default=0)


def section_count(sites, nu):
    """``K``: the largest number of sites sharing one ``j``."""
    sites = np.asarray(sites)
    if len(sites) == 0:
        return 0
    _, counts = np.unique(sites[:, nu:], axis=0, return_counts=True)
    return int(counts.max())


@dataclass(frozen=True)
class Cluster:
    sites: tuple
    diam: int

    @property
    def size(self):
        return len(self.sites)


def check_separation(bad_sites, N, C1):
    """Cluster by closure of ``dist < N^2``; check ``diam <= N^C1`` and
    pairwise distance ``>= N^2``.  Returns ``(ok, clusters)``."""
    sites, labels, _ = _components(bad_sites, N ** 2, strict=True)
    clusters = []
    for lab in np.unique(labels):
        mem = sites[labels == lab]
        clusters.append(Cluster(tuple(tuple(int(v) for v in s) for s in mem), _diam(mem)))
    ok = all(c.diam <= N ** C1 for c in clusters)
    for a, b in itertools.combinations(clusters, 2):
        dmin = np.min(np.max(np.abs(np.asarray(a.sites)[:, None, :]
                                    - np.asarray(b.sites)[None, :, :]), axis=2))
        ok &= bool(dmin >= N ** 2)
    return bool(ok), clusters


def weyl_check(A, Aprime):
    """``(max_p |eig_p(A) - eig_p(A')|, ||A - A'||_0)`` for symmetric blocks."""
    A = np.asarray(getattr(A, "entries", A))
    B = np.asarray(getattr(Aprime, "entries", Aprime))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DomainError("need square matrices of equal size")
    if A.size == 0:
        return 0.0, 0.0
    e1, e2 = np.linalg.eigvalsh(A), np.linalg.eigvalsh(B)
    return float(np.max(np.abs(e1 - e2))), float(np.linalg.norm(A - B, 2))


def diagnose(pd, lam, u, theta, N, j0=None, Gamma=None, C1=2.0, tau1=2.0,
             theta_range=None, red=None):
    """Diagnostic report for one ``(lambda, theta, N)``.

    Singular sites are taken in the window around ``j0`` (default: the
    first unit vector), chains use ``Gamma`` (default ``N``), and the bad
    theta intervals are scanned over ``theta_range`` (default
    ``[-2N, 2N]``).
    """
    nu, d = pd.nu, pd.d
    j0 = np.eye(d, dtype=int)[0] if j0 is None else np.atleast_1d(np.asarray(j0, int))
    if N <= 0:
        return {"lambda": float(lam), "theta": float(theta), "N": int(N),
                "j0": [int(v) for v in j0], "n_singular": 0, "max_chain_len": 0,
                "clusters": [], "separation_ok": True, "bad_theta_intervals": []}
    center, idx = _window(nu, d, N, j0)
    red = red if red is not None else reduction_for(pd, lam, u, N)
    op = ShiftedOperator.from_reduction(red, theta)
    sing = singular_sites(op, idx)
    Gamma = max(2, int(N)) if Gamma is None else Gamma
    ok, clusters = check_separation(sing, N, C1)
    lo, hi = theta_range if theta_range is not None else (-2.0 * N, 2.0 * N)
    grid = theta_grid(N, tau1, lo, hi)
    intervals = bad_theta_set(pd, lam, u, j0, N, grid, tau1, red=red)
    return {
        "lambda": float(lam), "theta": float(theta), "N": int(N),
        "j0": [int(v) for v in j0],
        "n_singular": int(len(sing)),
        "max_chain_len": max_chain_length(sing, Gamma) if len(sing) else 0,
        "clusters": [{"diam": c.diam, "size": c.size} for c in clusters],
        "separation_ok": ok,
        "bad_theta_intervals": intervals,
    }


__all__ = ["d_entry", "ShiftedOperator", "SiteClassification", "classify_sites",
           "is_N_good", "s_samples", "an_regular", "an_bad_sites", "singular_sites", "theta_grid",
           "diniz_intervals", "bad_theta_mask", "bad_theta_set", "reduction_for", "interval_measure",
           "covering_count", "gamma_chains", "Chain", "max_chain_length",
           "section_count", "check_separation", "Cluster", "weyl_check", "diagnose"]
