"""ADMM-based alternating optimisation for binary offloading.

The integer decisions ``m`` are relaxed to ``[0, 1]`` and tied to a copy
``m_tilde`` through ``m = m_tilde`` and ``m (1 - m_tilde) = 0``; the products
``z_b = m r_b`` and ``z_c = (1 - m) r_c`` are split off the same way.  Each
iteration updates, in turn, the AWMSE weights/receivers, the unconstrained
block ``(r_b, r_c, m_tilde)`` in closed form, the convex block
``(z_b, z_c, p, m)`` through :mod:`jcsmc.cvxcore`, and the scaled duals.

Rates in :class:`AdmmState` are in bit/s.  The penalty terms are evaluated
with rates expressed in ``rate_unit`` (``cfg.admm_rate_unit``, Mbit/s by
default), which is also the unit of the rate residuals inside the
constraint violation ``delta``.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import cvxcore
from .errors import InfeasibleSensing, InvalidArgument, ProblemTooLarge
from .partial import (_Layout, feasible_set, propose_decoding_order, solve_convex, solve_partial,
                      weighted_sum)
from .rates import DecodingOrder, sensing_sinr
from .scenario import ChannelRealization, ScenarioConfig
from .wmmse import WmmseState, mmse_state

DUMMY_THRESHOLD = 1e-6  # below this m_k (or 1 - m_k) the matching r is a dummy


@dataclass(frozen=True, eq=False)
class AdmmState:
    z_b: np.ndarray
    z_c: np.ndarray
    r_b: np.ndarray
    r_c: np.ndarray
    m: np.ndarray
    m_tilde: np.ndarray
    p: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray
    lambda4: np.ndarray
    rho: tuple = (1.0, 1.0, 0.1, 0.1)
    wmmse: WmmseState | None = None
    rate_unit: float = 1e6
    kkt_residual: float = float("nan")

    def __post_init__(self):
        if len(self.rho) != 4 or not all(r > 0 for r in self.rho):
            raise InvalidArgument("need four positive penalty parameters")
        if np.any(self.m < -1e-12) or np.any(self.m > 1 + 1e-12):
            raise InvalidArgument("relaxed decisions m must lie in [0, 1]")

    def residuals(self):
        """The four equality residuals, rates in ``rate_unit``."""
        u = self.rate_unit
        return (self.z_b / u - self.m * self.r_b / u,
                self.z_c / u - (1.0 - self.m) * self.r_c / u,
                self.m - self.m_tilde,
                self.m * (1.0 - self.m_tilde))


@dataclass
class BinarySolution:
    m_rounded: np.ndarray
    m: np.ndarray
    p: np.ndarray
    z_b: np.ndarray            # bit/s
    z_c: np.ndarray            # bit/s
    effective_rate: float      # bit/s with the rounded decisions
    objective: float           # ADMM sum w (z_b + z_c), bit/s
    trace: list
    effective_trace: list
    violation_trace: list
    iterations: int
    converged: bool
    order: DecodingOrder
    access: str = "noma"
    sensing_sinr_achieved: float = float("nan")
    lagrangian_trace: list = field(default_factory=list, repr=False)
    state: AdmmState | None = field(default=None, repr=False)
    admm_effective_rate: float = float("nan")  # before polishing
    polished: bool = False

    def to_record(self) -> dict:
        return {
            "effective_rate_bps": float(self.effective_rate),
            "admm_effective_rate_bps": float(self.admm_effective_rate),
            "polished": bool(self.polished),
            "objective_bps": float(self.objective),
            "m_rounded": [int(v) for v in self.m_rounded],
            "m": [float(v) for v in self.m],
            "z_b_bps": [float(v) for v in self.z_b],
            "z_c_bps": [float(v) for v in self.z_c],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "final_violation": float(self.violation_trace[-1]) if self.violation_trace else None,
            "decoding_order": list(self.order.positions),
            "access": self.access,
        }

    def dump_trace(self, path) -> None:
        """Per-iteration ``n, objective, effective rate, delta`` as CSV."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective_bps", "effective_rate_bps", "violation"])
            for n, (a, b, d) in enumerate(zip(self.trace, self.effective_trace, self.violation_trace), 1):
                w.writerow([n, repr(float(a)), repr(float(b)), repr(float(d))])


def round_decisions(m) -> np.ndarray:
    """``1`` where ``m > 0.5`` else ``0``."""
    return (np.asarray(m) > 0.5).astype(int)


def effective_rate(m, z_b, z_c, cfg) -> float:
    """Weighted rate after rounding: each user keeps only its chosen tier."""
    mb = round_decisions(m)
    return float(np.dot(cfg.user_weights, mb * z_b + (1 - mb) * z_c))


def constraint_violation(state: AdmmState) -> float:
    """Largest infinity norm among the four equality residuals."""
    return float(max(np.max(np.abs(r), initial=0.0) for r in state.residuals()))


def penalty(state: AdmmState) -> float:
    """Scaled-form penalty ``sum_i ||res_i + rho_i lambda_i||^2 / (2 rho_i)``."""
    lam = (state.lambda1, state.lambda2, state.lambda3, state.lambda4)
    return float(sum(np.sum((r + rho * l) ** 2) / (2.0 * rho)
                     for r, rho, l in zip(state.residuals(), state.rho, lam)))


def augmented_lagrangian(state: AdmmState, cfg: ScenarioConfig) -> float:
    """``-f(z) + Pi`` in ``rate_unit`` (the set indicator is zero on feasible iterates)."""
    return -weighted_sum(state.z_b, state.z_c, cfg) / state.rate_unit + penalty(state)


def initial_state(partial_solution, cfg: ScenarioConfig) -> AdmmState:
    """Warm start from a partial-offloading solution.

    ``z = r``, ``p = p``, ``m = r_b / (r_b + r_c)`` with ``0/0 -> 0.5``;
    ``m_tilde = m``, ``r = z`` and all duals zero.
    """
    rb = np.asarray(partial_solution.r_b, dtype=float)
    rc = np.asarray(partial_solution.r_c, dtype=float)
    tot = rb + rc
    m = np.where(tot > 0, rb / np.where(tot > 0, tot, 1.0), 0.5)
    K = rb.size
    zero = np.zeros(K)
    return AdmmState(z_b=rb.copy(), z_c=rc.copy(), r_b=rb.copy(), r_c=rc.copy(), m=m, m_tilde=m.copy(),
                     p=np.asarray(partial_solution.p, dtype=complex).copy(),
                     lambda1=zero.copy(), lambda2=zero.copy(), lambda3=zero.copy(), lambda4=zero.copy(),
                     rho=tuple(float(r) for r in cfg.admm_rho), wmmse=partial_solution.state,
                     rate_unit=float(cfg.admm_rate_unit))


def admm_update_wmmse(state: AdmmState, ch, cfg, order, access="noma") -> AdmmState:
    """Closed-form optimal weights and receivers at the current beamformer."""
    return replace(state, wmmse=mmse_state(state.p, order, ch, cfg, access))


def admm_update_r_mtilde(state: AdmmState, cfg=None) -> AdmmState:
    """Exact minimiser of the penalty over ``(r_b, r_c, m_tilde)``.

    ``r_b = (z_b + rho1 lambda1) / m`` unless ``m`` is below the dummy
    threshold, in which case ``r_b`` keeps its value (it does not enter the
    penalty then); likewise ``r_c`` with ``1 - m``.  For ``m_tilde`` the two
    coupled terms give, per user,
    ``m_tilde = [(m + rho3 l3)/rho3 + m (m + rho4 l4)/rho4] / (1/rho3 + m^2/rho4)``,
    which is ``(m^2 + m rho4 l4 + m + rho3 l3) / (m^2 + 1)`` when ``rho3 == rho4``.
    """
    rho1, rho2, rho3, rho4 = state.rho
    u = state.rate_unit
    m = state.m
    r_b = state.r_b.copy()
    r_c = state.r_c.copy()
    act_b = m > DUMMY_THRESHOLD
    act_c = (1.0 - m) > DUMMY_THRESHOLD
    r_b[act_b] = (state.z_b[act_b] / u + rho1 * state.lambda1[act_b]) / m[act_b] * u
    r_c[act_c] = (state.z_c[act_c] / u + rho2 * state.lambda2[act_c]) / (1.0 - m[act_c]) * u
    num = (m + rho3 * state.lambda3) / rho3 + m * (m + rho4 * state.lambda4) / rho4
    m_tilde = num / (1.0 / rho3 + m * m / rho4)
    return replace(state, r_b=r_b, r_c=r_c, m_tilde=m_tilde)


def _penalty_quadratic(state: AdmmState, layout: _Layout, K: int):
    """``(Q, c, const)`` with ``Pi = 1/2 x^T Q x + c^T x + const`` over the solver vector.

    Solver vector: [z_b (K) | z_c (K) | m (K) | Re p | Im p], rates in rate_unit.
    """
    n = layout.n
    u = state.rate_unit
    rho1, rho2, rho3, rho4 = state.rho
    Q = np.zeros((n, n))
    c = np.zeros(n)
    const = 0.0
    rb, rc = state.r_b / u, state.r_c / u

    def add(idx, coef, off, rho):
        nonlocal const
        a = np.asarray(coef, dtype=float)
        Q[np.ix_(idx, idx)] += np.outer(a, a) / rho
        c[idx] += off * a / rho
        const += off * off / (2.0 * rho)

    for k in range(K):
        zb, zc, mk = k, K + k, 2 * K + k
        add([zb, mk], [1.0, -rb[k]], rho1 * state.lambda1[k], rho1)
        add([zc, mk], [1.0, rc[k]], rho2 * state.lambda2[k] - rc[k], rho2)
        add([mk], [1.0], rho3 * state.lambda3[k] - state.m_tilde[k], rho3)
        add([mk], [1.0 - state.m_tilde[k]], rho4 * state.lambda4[k], rho4)
    return Q, c, const


def block3_problem(state: AdmmState, ch, cfg, order, access="noma"):
    """Convex ``(z_b, z_c, m, p)`` problem: ``min -f + Pi`` over the feasible set."""
    K = cfg.n_users
    layout = _Layout(list(range(K)), list(range(K)), cfg.n_antennas, rate_unit=state.rate_unit, n_extra=K)
    cons, lb, ub = feasible_set(state.wmmse, order, ch, cfg, layout, access)
    lb[2 * K:3 * K] = 0.0
    ub[2 * K:3 * K] = 1.0
    Q, c, const = _penalty_quadratic(state, layout, K)
    w = np.asarray(cfg.user_weights, dtype=float)
    c[:K] -= w
    c[K:2 * K] -= w
    return cvxcore.ConvexSubproblem(c=c, constraints=cons, lb=lb, ub=ub, Q=Q, const=const), layout


def admm_update_zpm(state: AdmmState, ch, cfg, order, access="noma") -> AdmmState:
    """Solve the convex block from the current (feasible) point."""
    prob, layout = block3_problem(state, ch, cfg, order, access)
    # an interior start needs m strictly inside the box
    m0 = np.clip(state.m, 1e-9, 1.0 - 1e-9)
    x0 = layout.pack(state.z_b, state.z_c, state.p, extra=m0)
    res = solve_convex(prob, x0, cfg.solver_tol)
    z_b, z_c, p, m = layout.unpack(res.x, cfg.n_users)
    return replace(state, z_b=z_b, z_c=z_c, p=p, m=np.clip(m, 0.0, 1.0), kkt_residual=res.kkt_residual)


def admm_update_duals(state: AdmmState) -> AdmmState:
    """Scaled dual ascent ``lambda_i += res_i / rho_i``."""
    r1, r2, r3, r4 = state.residuals()
    rho1, rho2, rho3, rho4 = state.rho
    return replace(state, lambda1=state.lambda1 + r1 / rho1, lambda2=state.lambda2 + r2 / rho2,
                   lambda3=state.lambda3 + r3 / rho3, lambda4=state.lambda4 + r4 / rho4)


def solve_binary(ch: ChannelRealization, cfg: ScenarioConfig, order: DecodingOrder | None = None,
                 *, access: str = "noma", warm_start=None) -> BinarySolution:
    """Run the ADMM iterations from the partial-offloading solution.

    Stops once the relative change of ``sum w (z_b + z_c)`` is below
    ``cfg.admm_tol`` and ``delta <= cfg.admm_tau``, or after
    ``cfg.admm_max_iter`` iterations.  Without convergence the iterate with
    the best effective rate is used and ``converged`` is False.  With
    ``cfg.binary_polish`` the rounded decisions are then re-solved by the
    partial solver on that split; ``p``, ``z_b``, ``z_c`` and
    ``effective_rate`` describe whichever of the two is better, while
    ``objective`` and the traces stay those of the ADMM run.
    ``warm_start`` may pass an already computed partial solution.
    """
    if order is None:
        order = propose_decoding_order(cfg)
    if warm_start is None:
        warm_start = solve_partial(ch, cfg, order, access=access)
    state = initial_state(warm_start, cfg)

    trace, eff_trace, viol_trace, lag_trace = [], [], [], []
    prev = None
    converged = False
    best = None
    n_iter = 0
    for n_iter in range(1, cfg.admm_max_iter + 1):
        lag = [augmented_lagrangian(state, cfg)]
        state = admm_update_wmmse(state, ch, cfg, order, access)
        state = admm_update_r_mtilde(state, cfg)
        lag.append(augmented_lagrangian(state, cfg))
        state = admm_update_zpm(state, ch, cfg, order, access)
        lag.append(augmented_lagrangian(state, cfg))
        state = admm_update_duals(state)
        lag_trace.append(tuple(lag))

        obj = weighted_sum(state.z_b, state.z_c, cfg)
        eff = effective_rate(state.m, state.z_b, state.z_c, cfg)
        delta = constraint_violation(state)
        trace.append(obj)
        eff_trace.append(eff)
        viol_trace.append(delta)
        if best is None or eff > best[0]:
            best = (eff, state)
        if prev is not None and abs(obj - prev) <= cfg.admm_tol * abs(prev) and delta <= cfg.admm_tau:
            converged = True
            break
        prev = obj

    final = state if converged else best[1]
    m_hat = round_decisions(final.m)
    eff = effective_rate(final.m, final.z_b, final.z_c, cfg)
    p, z_b, z_c = final.p, m_hat * final.z_b, (1 - m_hat) * final.z_c
    polished = False
    if cfg.binary_polish:
        pol = polish_decisions(m_hat, ch, cfg, order, access)
        if pol is not None and pol.objective >= eff:
            p, z_b, z_c, polished = pol.p, pol.r_b, pol.r_c, True
    return BinarySolution(
        m_rounded=m_hat, m=final.m.copy(), p=p, z_b=z_b, z_c=z_c,
        effective_rate=weighted_sum(z_b, z_c, cfg),
        objective=weighted_sum(final.z_b, final.z_c, cfg), trace=trace, effective_trace=eff_trace,
        violation_trace=viol_trace, iterations=n_iter, converged=converged, order=order, access=access,
        sensing_sinr_achieved=sensing_sinr(p, ch, cfg, access), lagrangian_trace=lag_trace,
        state=final, admm_effective_rate=eff, polished=polished)


def polish_decisions(m_hat, ch, cfg, order, access="noma"):
    """Partial solver restricted to the split given by rounded decisions.

    Users with ``m_hat = 1`` compute only at the BS, the rest only at the
    CS.  Returns None when the restricted run cannot start.
    """
    bs = [k for k in range(cfg.n_users) if m_hat[k] == 1]
    cs = [k for k in range(cfg.n_users) if m_hat[k] == 0]
    try:
        return solve_partial(ch, cfg, order, access=access, bs_users=bs, cs_users=cs)
    except InfeasibleSensing:
        return None


def exhaustive_binary_oracle(ch, cfg, order=None, access="noma", max_users: int = 12):
    """Best BS subset by running the partial solver on every split.

    Users in the subset may only compute at the BS, the rest only at the
    CS.  Returns ``(subset, best rate, solution)``.
    """
    K = cfg.n_users
    if K > max_users:
        raise ProblemTooLarge(f"exhaustive subset search refused for K={K} > {max_users}")
    if order is None:
        order = propose_decoding_order(cfg)
    best = None
    for size in range(K + 1):
        for subset in itertools.combinations(range(K), size):
            rest = [k for k in range(K) if k not in subset]
            sol = solve_partial(ch, cfg, order, access=access, bs_users=subset, cs_users=rest)
            if best is None or sol.objective > best[1]:
                best = (tuple(subset), sol.objective, sol)
    return best
