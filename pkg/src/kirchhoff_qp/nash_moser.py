"""Nash-Moser iteration for ``F(u) = 0`` at fixed ``lambda``.

Step ``n -> n + 1`` at scale ``N = N0^((3/2)^(n+1))``:

    h = -Pi_N Phi2 (L_N^-1 on E_N, identity on the complement) Phi1 F(u_n)

where ``Phi1 = B^-1 rho^-1 A^-1``, ``Phi2 = A B`` come from
:func:`~kirchhoff_qp.reduction.reduce` and ``L_N`` is the block of
``(omega.d)^2 - mu Delta + R2`` on ``E_N = {0 < |(l,j)| <= N, j != 0}``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .decay import DecayMatrix
from .errors import BadParameter, ConfigError, KirchhoffError, StepFailed
from .fourier import TorusFunction, project, s0_of, sobolev_norm
from .kirchhoff import residual
from .reduction import reduce

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ExponentSet:
    """Exponents of the scheme; ``frak_a = tau + delta s1``."""

    tau: float
    delta: float
    kappa1: float
    kappa2: float
    kappa3: float
    s0: float
    s1: float
    S: float
    sigma: float

    @property
    def frak_a(self):
        return self.tau + self.delta * self.s1

    @classmethod
    def greedy(cls, nu, d, delta=0.1, tau=1.0, sigma=None, margin=1.0):
        """Feasible exponents chosen in dependency order.

        ``s0``, ``sigma = 2 (nu + 1)`` and ``s1 = s0 + sigma + 1`` are fixed
        first; then ``kappa1``, ``kappa2`` exceed their lower bounds by
        ``margin``; ``kappa3`` depends on ``S``, so the last inequality is
        solved for ``S`` with ``kappa3`` substituted.
        """
        s0 = s0_of(nu, d)
        sigma = 2.0 * (nu + 1) if sigma is None else float(sigma)
        s1 = s0 + sigma + 1.0
        a = tau + delta * s1
        k1 = sigma + margin
        k2 = max(3 * a + 1.5 * (s1 - s0) + 3 + 2.25 * k1, 12 * a + 24) + margin
        # kappa3 = base + 3 delta (S - s1) + margin; final inequality becomes
        # (1 - 3 delta)(S - s1) > 2 sigma + 2 + 2a + (2/3)(base + margin) + k2
        base = 6 * a + 6 + 3 * sigma + 1.5 * k1
        need = 2 * sigma + 2 + 2 * a + (2.0 / 3.0) * (base + margin) + k2
        gap = (need + margin) / (1 - 3 * delta)
        S = s1 + gap
        k3 = base + 3 * delta * gap + margin
        return cls(tau, delta, k1, k2, k3, s0, s1, S, sigma)

    def to_dict(self):
        return asdict(self)


def check_exponents(es):
    """Evaluate the admissibility inequalities; returns ``(ok, violated)``."""
    v = []
    a = es.frak_a
    if not 0 < es.delta < 1.0 / 3.0:
        v.append("delta in (0, 1/3)")
    if not es.tau > 0:
        v.append("tau > 0")
    if not es.S > es.s1 > es.s0 + es.sigma:
        v.append("S > s1 > s0 + sigma")
    if not es.kappa1 > es.sigma:
        v.append("kappa1 > sigma")
    if not es.kappa2 > max(3 * a + 1.5 * (es.s1 - es.s0) + 3 + 2.25 * es.kappa1,
                           12 * a + 24):
        v.append("kappa2 > max{3a + 3/2 (s1 - s0) + 3 + 9/4 kappa1, 12a + 24}")
    if not es.kappa3 > 6 * a + 6 + 3 * es.delta * (es.S - es.s1) + 3 * es.sigma \
            + 1.5 * es.kappa1:
        v.append("kappa3 > 6a + 6 + 3 delta (S - s1) + 3 sigma + 3/2 kappa1")
    if not (1 - es.delta) * (es.S - es.s1) > 2 * es.sigma + 2 + 2 * a \
            + (2.0 / 3.0) * es.kappa3 + es.kappa2:
        v.append("(1 - delta)(S - s1) > 2 sigma + 2 + 2a + 2/3 kappa3 + kappa2")
    return (not v), v


def scale(N0, n):
    """``N_n = N0^((3/2)^n)``."""
    if N0 <= 1 or n < 0:
        raise ValueError("need N0 > 1 and n >= 0")
    return float(N0) ** (1.5 ** n)


@dataclass
class IterationState:
    """One entry of the solver trace."""

    n: int
    u: TorusFunction = field(repr=False)
    residual_s0: float
    step_norm_s1: float
    u_norm_S: float
    N_n: float
    condition_estimate: float = float("nan")
    wall_ms: float = 0.0
    warnings: list = field(default_factory=list)

    def record(self):
        """JSON-ready trace line."""
        return {"n": self.n, "N_n": self.N_n, "residual_s0": self.residual_s0,
                "step_norm_s1": self.step_norm_s1, "u_norm_S": self.u_norm_S,
                "condition_estimate": (None if math.isnan(self.condition_estimate)
                                       else self.condition_estimate),
                "wall_ms": self.wall_ms, "warnings": list(self.warnings)}


def _exceeds(value, N, exponent):
    """``value > N^exponent`` evaluated in logarithms (no overflow)."""
    if value <= 0:
        return False
    return math.log(value) > exponent * math.log(N)


def _surrogate_warnings(state, es, supported):
    w = []
    N = state.N_n
    if not supported:
        w.append("S1: support outside E_N")
    if state.n > 0 and _exceeds(state.step_norm_s1, N, -es.kappa1):
        w.append("S2: ||u_n - u_(n-1)||_s1 > N_n^-kappa1")
    if _exceeds(state.residual_s0, N, -es.kappa2):
        w.append("S3: residual > N_n^-kappa2")
    if _exceeds(state.u_norm_S, N, es.kappa3):
        w.append("S4: ||u_n||_S > N_n^kappa3")
    return w


def _condition(A):
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return math.inf, None
    return float(np.linalg.norm(A, 1) * np.linalg.norm(inv, 1)), inv


def build_truncated_L(pd, lam, u, N, box=None):
    """``(L_N, reduction)``: the E_N block of ``(omega.d)^2 - mu Delta + R2``.

    The reduction carries the handles ``phi1``/``phi2`` (and their
    inverses through ``apply_A``/``apply_A_inv``).
    """
    red = reduce(pd, lam, u, box)
    return red.L2_matrix(N=N), red


def newton_step(pd, lam, state, es, N0, box=None, cond_limit=COND_LIMIT):
    """One step from ``state``; returns the next :class:`IterationState`."""
    t0 = time.perf_counter()
    u = state.u
    box = tuple(box) if box is not None else u.box
    N = scale(N0, state.n + 1)
    try:
        LN, red = build_truncated_L(pd, lam, u, N, box)
    except KirchhoffError as e:
        raise StepFailed(f"reduction failed at step {state.n + 1}: {e}") from e
    cond, inv = _condition(LN.entries)
    if inv is None or cond > cond_limit:
        raise BadParameter(f"L_N condition {cond:.3e} > {cond_limit:.0e} at "
                           f"lambda={lam} (N={N:.2f})")
    F = residual(pd, lam, u, box)
    g = red.grid
    W = g.coeffs(red.phi1(red.field(F)))
    nu, d, K, Lx = u.nu, u.d, g.K, red.Lx
    idx = LN.rows
    lpos = tuple(idx[:, i] + K for i in range(nu))
    jflat = np.ravel_multi_index(tuple((idx[:, nu:] + Lx).T), (2 * Lx + 1,) * d)
    W[lpos + (jflat,)] = inv @ W[lpos + (jflat,)]
    H = red.phi2(g.values(W))
    h = -project(red.to_function(H, box), N)
    u_next = (u + h).resize(box).real_part()
    res = sobolev_norm(residual(pd, lam, u_next, box), s0_of(u.nu, u.d))
    new = IterationState(
        n=state.n + 1, u=u_next, residual_s0=res,
        step_norm_s1=sobolev_norm(h, es.s1), u_norm_S=sobolev_norm(u_next, es.S),
        N_n=N, condition_estimate=cond,
        wall_ms=1e3 * (time.perf_counter() - t0))
    supported = sobolev_norm(project(u_next, N, complement=True), 0) == 0
    new.warnings = _surrogate_warnings(new, es, supported)
    return new


def initial_state(pd, lam, box, es, N0):
    u0 = TorusFunction(pd.nu, pd.d, box)
    res = sobolev_norm(residual(pd, lam, u0, box), s0_of(pd.nu, pd.d))
    st = IterationState(n=0, u=u0, residual_s0=res, step_norm_s1=0.0,
                        u_norm_S=0.0, N_n=float(N0))
    st.warnings = _surrogate_warnings(st, es, True)
    return st


def solve(pd, lam, es=None, N0=8, max_steps=8, tol=1e-9, box=(16, 16),
          override=False, callback=None):
    """Iterate :func:`newton_step` from ``u0 = 0``.

    Returns ``(u, trace)``; stops when ``||F(u_n)||_s0 <= tol`` or after
    ``max_steps``.  :class:`StepFailed` and :class:`BadParameter`
    propagate with the partial trace attached as ``err.trace``.
    """
    es = es if es is not None else ExponentSet.greedy(pd.nu, pd.d)
    ok, violated = check_exponents(es)
    if not ok and not override:
        raise ConfigError("exponents violate: " + "; ".join(violated))
    box = tuple(box)
    state = initial_state(pd, lam, box, es, N0)
    trace = [state]
    if callback:
        callback(state)
    while state.residual_s0 > tol and state.n < max_steps:
        try:
            state = newton_step(pd, lam, state, es, N0, box)
        except (StepFailed, BadParameter) as e:
            e.trace = trace
            raise
        trace.append(state)
        if callback:
            callback(state)
    return state.u, trace


def converged(trace, tol):
    return trace[-1].residual_s0 <= tol


def perturb_lambda_invertibility(pd, u, N, lam, dlam, box=None):
    """Neumann-series check for ``L_N(lambda + dlambda)``.

    With ``A = L_N(lambda)^-1 (L_N(lambda + dlambda) - L_N(lambda))``, if
    ``||A||_0 < 1`` the perturbed block is invertible and
    ``||L_N(lambda + dlambda)^-1||_0 <= ||L_N(lambda)^-1||_0 / (1 - ||A||_0)``.
    The direct inverse norm is returned alongside for comparison.
    """
    L0, _ = build_truncated_L(pd, lam, u, N, box)
    L1, _ = build_truncated_L(pd, lam + dlam, u, N, box)
    inv0 = np.linalg.inv(L0.entries)
    A = inv0 @ (L1.entries - L0.entries)
    normA = float(np.linalg.norm(A, 2)) if A.size else 0.0
    n0 = float(np.linalg.norm(inv0, 2)) if A.size else 0.0
    out = {"norm_inv": n0, "norm_A": normA, "invertible": normA < 1,
           "neumann_bound": (n0 / (1 - normA)) if normA < 1 else math.inf}
    try:
        out["direct_norm_inv"] = float(np.linalg.norm(np.linalg.inv(L1.entries), 2))
    except np.linalg.LinAlgError:
        out["direct_norm_inv"] = math.inf
    return out


__all__ = ["ExponentSet", "check_exponents", "scale", "IterationState",
           "build_truncated_L", "newton_step", "solve", "initial_state",
           "perturb_lambda_invertibility", "converged", "DecayMatrix"]
