"""Small dense log-barrier interior-point solver.

Solves problems of the form::

    minimize    c^T x + 1/2 x^T Q x
    subject to  x^T P_i x + q_i^T x + r_i + sum_j a_ij x_j^3 <= 0
                lb <= x <= ub

with every ``P_i`` and ``Q`` positive semidefinite and cubic coefficients
``a_ij >= 0`` only on variables with ``lb_j >= 0`` (so each constraint is
convex on the feasible set).  Complex beamformers enter through
:func:`to_real` / :func:`hermitian_to_real`.

The method is the textbook primal barrier: centre with damped Newton steps,
multiply the barrier weight ``t = 1/mu`` by ``mu_factor`` and stop once the
duality-gap bound ``m / t`` drops below ``tol``.  Problems here have a few
dozen variables, so everything is dense numpy.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceFailure, InvalidArgument, NeedsPhaseOne

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_SLACK = 1e-9


# -- complex embedding ---------------------------------------------------
def to_real(p) -> np.ndarray:
    """Stack real and imaginary parts: ``[Re p; Im p]``."""
    p = np.asarray(p, dtype=complex)
    return np.concatenate([p.real, p.imag])


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def hermitian_to_real(A) -> np.ndarray:
    """Symmetric ``S`` with ``to_real(p) @ S @ to_real(p) == p^H A p``."""
    A = 0.5 * (np.asarray(A) + np.asarray(A).conj().T)
    Ar, Ai = A.real, A.imag
    return np.block([[Ar, -Ai], [Ai, Ar]])


def linear_to_real(b) -> np.ndarray:
    """``q`` with ``q @ to_real(p) == Re{b^H p}``."""
    return to_real(b)


# -- problem description --------------------------------------------------
@dataclass(eq=False)
class Constraint:
    """``x^T P x + q^T x + r + sum_j cubic_j x_j^3 <= 0``; ``P``/``cubic`` optional."""

    q: np.ndarray
    r: float = 0.0
    P: np.ndarray | None = None
    cubic: np.ndarray | None = None
    name: str = ""


@dataclass(eq=False)
class ConvexSubproblem:
    c: np.ndarray
    constraints: list = field(default_factory=list)
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    Q: np.ndarray | None = None
    const: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if np.any(self.lb >= self.ub):
            raise InvalidArgument("every variable needs lb < ub")
        m = len(self.constraints)
        self._P = np.zeros((m, n, n))
        self._q = np.zeros((m, n))
        self._r = np.zeros(m)
        self._C = np.zeros((m, n))
        for i, con in enumerate(self.constraints):
            self._q[i] = con.q
            self._r[i] = con.r
            if con.P is not None:
                self._P[i] = 0.5 * (con.P + con.P.T)
            if con.cubic is not None:
                cub = np.asarray(con.cubic, dtype=float)
                if np.any(cub < 0) or np.any((cub > 0) & (self.lb < 0)):
                    raise InvalidArgument(f"cubic terms of {con.name!r} need nonnegative coefficients and lb >= 0")
                self._C[i] = cub
        self._has_cubic = bool(np.any(self._C))
        if self.Q is not None:
            self.Q = 0.5 * (np.asarray(self.Q, dtype=float) + np.asarray(self.Q, dtype=float).T)
        self._lo = np.isfinite(self.lb)
        self._hi = np.isfinite(self.ub)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def n_inequalities(self) -> int:
        """Constraint count entering the duality-gap bound, bounds included."""
        return len(self.constraints) + int(self._lo.sum() + self._hi.sum())

    def check_convexity(self, tol=1e-9) -> None:
        """Raise if any quadratic form has a materially negative eigenvalue."""
        mats = list(self._P) + ([self.Q] if self.Q is not None else [])
        for i, M in enumerate(mats):
            if not np.any(M):
                continue
            ev = np.linalg.eigvalsh(M)
            if ev[0] < -tol * max(1.0, abs(ev[-1])):
                raise InvalidArgument(f"quadratic form {i} is not PSD (min eigenvalue {ev[0]:.3e})")

    # -- evaluation ------------------------------------------------------
    def objective(self, x) -> float:
        v = float(self.c @ x) + self.const
        if self.Q is not None:
            v += 0.5 * float(x @ self.Q @ x)
        return v

    def constraint_values(self, x) -> np.ndarray:
        Px = self._P @ x
        g = Px @ x + self._q @ x + self._r
        if self._has_cubic:
            g = g + self._C @ (x ** 3)
        return g

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        parts = [self.constraint_values(x), self.lb - x, x - self.ub]
        return float(max(np.max(v, initial=-np.inf) for v in parts))


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray          # one per constraint
    bound_duals: tuple         # (lower, upper) arrays, zero for infinite bounds
    kkt_residual: float
    stationarity: float
    complementarity: float
    max_violation: float
    newton_steps: int
    trace: list                # (outer iteration, mu, objective, max violation)


class _Barrier:
    """Barrier value/derivatives for one problem, backed by compiled kernels."""

    def __init__(self, prob: ConvexSubproblem):
        self.prob = prob
        n = prob.n
        self.has_q = prob.Q is not None
        Q = prob.Q if self.has_q else np.zeros((n, n))
        lo = np.flatnonzero(prob._lo)
        hi = np.flatnonzero(prob._hi)
        self.args = (np.ascontiguousarray(prob._P), prob._q, prob._r, prob._C, prob.c,
                     np.ascontiguousarray(Q), self.has_q, lo, prob.lb[lo].copy(), hi, prob.ub[hi].copy())

    def value(self, x, t):
        return _kernels.barrier_value(*self.args, np.asarray(x, dtype=float), float(t))

    def derivatives(self, x, t):
        return _kernels.derivatives(*self.args, np.asarray(x, dtype=float), float(t))


def _newton_direction(H, grad):
    return _kernels.newton_direction(np.ascontiguousarray(H), grad)


def _center(bar: _Barrier, x, t, newton_tol, max_steps):
    """Damped Newton on the barrier at weight t.  Returns (x, steps, ok)."""
    return _kernels.center(*bar.args, np.asarray(x, dtype=float), float(t), float(newton_tol), int(max_steps))


def solve(problem: ConvexSubproblem, start, tol: float = DEFAULT_TOL, *, mu0: float = 1.0,
          mu_factor: float = 10.0, slack: float = DEFAULT_SLACK, newton_tol: float = 1e-10,
          max_newton: int = 100, max_outer: int = 60, trace_path=None) -> SolveResult:
    """Minimise ``problem`` from a strictly feasible ``start``.

    Raises :class:`NeedsPhaseOne` when some inequality has slack below
    ``slack`` at ``start`` and :class:`ConvergenceFailure` (with the last
    iterate as ``.best``) when Newton centring does not converge.
    """
    x = np.array(start, dtype=float)
    if x.shape != (problem.n,):
        raise InvalidArgument(f"start has shape {x.shape}, expected ({problem.n},)")
    viol = problem.max_violation(x)
    if viol > -slack:
        raise NeedsPhaseOne(f"start point not strictly feasible (max violation {viol:.3e})", viol)

    bar = _Barrier(problem)
    m = max(problem.n_inequalities, 1)
    t = 1.0 / mu0
    trace = []
    steps = 0
    for outer in range(max_outer):
        x, k, ok = _center(bar, x, t, newton_tol, max_newton)
        steps += k
        trace.append((outer, 1.0 / t, problem.objective(x), problem.max_violation(x)))
        if not ok:
            raise ConvergenceFailure(f"Newton centring did not converge at mu={1.0 / t:.3e}",
                                     best=_result(problem, x, t, steps, trace))
        if m / t <= tol:
            break
        t *= mu_factor
    else:
        raise ConvergenceFailure("barrier iteration cap reached", best=_result(problem, x, t, steps, trace))
    if trace_path is not None:
        dump_trace(trace, trace_path)
    return _result(problem, x, t, steps, trace)


def _result(problem, x, t, steps, trace):
    """Package the iterate with Newton-corrected multiplier estimates.

    The plain barrier multipliers ``1/(t (-g))`` leave a first-order
    stationarity error near active constraints.  One more Newton direction
    ``dx`` gives the corrected estimate ``(1/(t(-g))) (1 + grad_g^T dx/(-g))``
    and the full step ``x + dx`` (taken when strictly feasible) leaves only a
    second-order residual.
    """
    bar = _Barrier(problem)
    grad, H, g, G = bar.derivatives(x, t)
    dx = _newton_direction(H, grad)
    lo, hi = problem._lo, problem._hi
    lam = (1.0 + (G @ dx) / (-g)) / (t * (-g))
    dl = x[lo] - problem.lb[lo]
    du = problem.ub[hi] - x[hi]
    lam_lo = np.zeros(problem.n)
    lam_hi = np.zeros(problem.n)
    lam_lo[lo] = (1.0 - dx[lo] / dl) / (t * dl)
    lam_hi[hi] = (1.0 + dx[hi] / du) / (t * du)
    xn = x + dx
    if bar.value(xn, t) < np.inf and problem.objective(xn) <= problem.objective(x) + 1e-12 * (1 + abs(problem.objective(x))):
        x = xn
    lam = np.maximum(lam, 0.0)
    lam_lo = np.maximum(lam_lo, 0.0)
    lam_hi = np.maximum(lam_hi, 0.0)
    g = problem.constraint_values(x)
    G = 2.0 * (problem._P @ x) + problem._q
    if problem._has_cubic:
        G = G + 3.0 * problem._C * x ** 2
    grad_f = problem.c.copy()
    if problem.Q is not None:
        grad_f = grad_f + problem.Q @ x
    r = grad_f + G.T @ lam - lam_lo + lam_hi
    stat = float(np.max(np.abs(r)))
    comp_parts = [np.abs(lam * g),
                  np.abs(lam_lo[lo] * (problem.lb[lo] - x[lo])),
                  np.abs(lam_hi[hi] * (x[hi] - problem.ub[hi]))]
    comp = float(max(np.max(v, initial=0.0) for v in comp_parts))
    return SolveResult(x=x, objective=problem.objective(x), duals=lam, bound_duals=(lam_lo, lam_hi),
                       kkt_residual=max(stat, comp), stationarity=stat, complementarity=comp,
                       max_violation=problem.max_violation(x), newton_steps=steps, trace=trace)


def dump_trace(trace, path) -> None:
    """Write the barrier iteration trace as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "mu", "objective", "max_violation"])
        for row in trace:
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])


def phase_one(problem: ConvexSubproblem, x0, margin: float = 1e-6, tol: float = 1e-9,
              max_outer: int = 60) -> np.ndarray:
    """Find a point with every inequality slack at least ``margin``.

    Minimises the largest constraint value ``s`` over ``g_i(x) <= s`` with
    the box kept as a barrier, stopping as soon as ``s < -margin``.  Raises
    :class:`NeedsPhaseOne` if the smallest achievable ``s`` is not negative.
    """
    n = problem.n
    x0 = np.array(x0, dtype=float)
    lb, ub = problem.lb, problem.ub
    # pull the start inside the box
    width = np.where(np.isfinite(ub - lb), ub - lb, np.inf)
    pad = np.minimum(1e-3 * np.where(np.isfinite(width), width, 1.0), 1e-3)
    x0 = np.clip(x0, lb + pad, ub - pad)
    if problem.max_violation(x0) < -margin and np.all(x0 - lb > margin) and np.all(ub - x0 > margin):
        return x0
    g0 = problem.constraint_values(x0)
    s0 = float(np.max(g0, initial=0.0)) + 1.0
    cons = []
    for i, con in enumerate(problem.constraints):
        q = np.append(problem._q[i], -1.0)
        P = np.zeros((n + 1, n + 1))
        P[:n, :n] = problem._P[i]
        cub = np.append(problem._C[i], 0.0)
        cons.append(Constraint(q=q, r=problem._r[i], P=P, cubic=cub, name=con.name))
    c = np.zeros(n + 1)
    c[-1] = 1.0
    aux = ConvexSubproblem(c=c, constraints=cons, lb=np.append(lb, -s0 - 1.0), ub=np.append(ub, np.inf))
    bar = _Barrier(aux)
    z = np.append(x0, s0)

    def done(z):
        return z[-1] < -margin and np.all(z[:n] - lb > margin) and np.all(ub - z[:n] > margin)

    t = 1.0
    m = aux.n_inequalities
    for _ in range(max_outer):
        z, _, _ = _center(bar, z, t, 1e-12, 100)
        if done(z):
            return z[:n]
        if m / t <= tol:
            break
        t *= 10.0
    raise NeedsPhaseOne(f"no strictly feasible point found (best max violation {z[-1]:.3e})", float(z[-1]))
