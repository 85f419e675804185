"""WMMSE-based alternating optimisation for partial offloading.

Each round fixes the AWMSE weights and receivers at their closed-form
optima for the current beamformer and then solves the resulting convex
problem jointly in the BS/CS computation rates and the beamformer.

Inside the convex solver rates are spectral efficiencies (rate / B) so the
problem data stay O(1); everything returned to callers is in bit/s.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import cvxcore
from .errors import ConvergenceFailure, InfeasibleSensing, InvalidArgument, NeedsPhaseOne, ProblemTooLarge
from .rates import (DecodingOrder, downlink_rate, sensing_sinr, uplink_rates)
from .scenario import ChannelRealization, ScenarioConfig, path_loss_linear, steering_vector
from .wmmse import RATE_WMMSE_CONSTANT, WmmseState, awmse_quadratics, fixed_point_residual, mmse_state

# start-point power shrink factors tried in turn, see initial_interior_point
_SHRINK_FACTORS = (0.999, 0.9999, 0.99999, 1 - 1e-6, 1 - 1e-7, 1 - 1e-8)
# longest extrapolation step of the accelerated alternation
_MAX_STEP = 16.0


@dataclass
class PartialSolution:
    p: np.ndarray
    r_b: np.ndarray           # bit/s
    r_c: np.ndarray           # bit/s
    objective: float          # weighted sum rate, bit/s
    trace: list
    iterations: int
    converged: bool
    sensing_sinr_achieved: float
    order: DecodingOrder
    access: str = "noma"
    state: WmmseState | None = field(default=None, repr=False)
    kkt_residual: float = float("nan")
    fixed_point_residual: float = float("nan")
    initial_sensing_sinr: float = float("nan")

    def to_record(self) -> dict:
        return {
            "objective_bps": float(self.objective),
            "r_b_bps": [float(v) for v in self.r_b],
            "r_c_bps": [float(v) for v in self.r_c],
            "p_real": [float(v) for v in self.p.real],
            "p_imag": [float(v) for v in self.p.imag],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "sensing_sinr_db": float(10 * math.log10(self.sensing_sinr_achieved)) if self.sensing_sinr_achieved > 0 else None,
            "decoding_order": list(self.order.positions),
            "access": self.access,
            "kkt_residual": float(self.kkt_residual),
            "fixed_point_residual": float(self.fixed_point_residual),
            "trace_bps": [float(v) for v in self.trace],
        }


def initialize_beamformer(ch: ChannelRealization | None, cfg: ScenarioConfig) -> np.ndarray:
    """Full-power beam steered at the target: ``sqrt(P_b) a(theta0)/||a||``."""
    a = steering_vector(cfg.target_angle, cfg.n_antennas, cfg.antenna_spacing_ratio)
    return math.sqrt(cfg.bs_power_budget) * a / np.linalg.norm(a)


def propose_decoding_order(cfg: ScenarioConfig) -> DecodingOrder:
    """Lower weight decoded first; equal weights: larger path loss first.

    Remaining ties keep ascending user index.
    """
    loss = [path_loss_linear(d) for d in cfg.user_distances]
    seq = sorted(range(cfg.n_users), key=lambda k: (cfg.user_weights[k], -loss[k], k))
    return DecodingOrder.from_sequence(seq)


@dataclass
class _Layout:
    """Index bookkeeping for the real vector [x_b | x_c | extra | Re p | Im p].

    Rates are stored in units of ``rate_unit`` bit/s; ``n_extra`` slots
    (the relaxed offloading decisions in binary mode) sit before ``p``.
    """

    bs_users: list
    cs_users: list
    n_antennas: int
    rate_unit: float
    n_extra: int = 0

    @property
    def n_rates(self):
        return len(self.bs_users) + len(self.cs_users)

    @property
    def p_offset(self):
        return self.n_rates + self.n_extra

    @property
    def n(self):
        return self.p_offset + 2 * self.n_antennas

    def pack(self, r_b, r_c, p, extra=()):
        """Rates in bit/s to the solver vector."""
        u = self.rate_unit
        return np.concatenate([np.asarray(r_b, dtype=float)[self.bs_users] / u,
                               np.asarray(r_c, dtype=float)[self.cs_users] / u,
                               np.asarray(extra, dtype=float), cvxcore.to_real(p)])

    def unpack(self, x, K):
        """Solver vector to ``(r_b, r_c, p, extra)`` with rates in bit/s."""
        r_b = np.zeros(K)
        r_c = np.zeros(K)
        nb = len(self.bs_users)
        r_b[self.bs_users] = x[:nb] * self.rate_unit
        r_c[self.cs_users] = x[nb:self.n_rates] * self.rate_unit
        return r_b, r_c, cvxcore.to_complex(x[self.p_offset:]), x[self.n_rates:self.p_offset].copy()


def _embed_quad(q, layout):
    """Real (P, q, r) of a complex quadratic form in the p block."""
    n, off = layout.n, layout.p_offset
    P = np.zeros((n, n))
    P[off:, off:] = cvxcore.hermitian_to_real(q.A)
    lin = np.zeros(n)
    lin[off:] = 2.0 * cvxcore.linear_to_real(q.b)
    return P, lin, q.const


def _power_constraint(layout, cfg):
    """(sum kappa (phi r_b)^3 + ||p||^2) / P_b - 1 <= 0."""
    n, off = layout.n, layout.p_offset
    P = np.zeros((n, n))
    idx = np.arange(off, n)
    P[idx, idx] = 1.0 / cfg.bs_power_budget
    cubic = np.zeros(n)
    nb = len(layout.bs_users)
    cubic[:nb] = cfg.cpu_power_factor * (cfg.cycles_per_bit * layout.rate_unit) ** 3 / cfg.bs_power_budget
    return cvxcore.Constraint(q=np.zeros(n), r=-1.0, P=P, cubic=cubic, name="power")


def sensing_threshold(cfg: ScenarioConfig) -> float:
    """Minimum virtual sensing rate ``log2(1 + gamma_min)``."""
    return math.log2(1.0 + cfg.sensing_sinr_min)


def feasible_set(state: WmmseState, order, ch, cfg, layout: _Layout, access="noma"):
    """Constraints and bounds of the convex set for fixed weights and receivers.

    Uplink causality per user, aggregate downlink causality, the sensing
    floor and the BS power budget, each as ``g(x) <= 0``.  Rate constraints
    are divided by ``B / rate_unit`` so every row is in bit/s/Hz.
    """
    c_const = RATE_WMMSE_CONSTANT
    users, cs, sens = awmse_quadratics(state, order, ch, cfg, access)
    n = layout.n
    nb = len(layout.bs_users)
    scale = layout.rate_unit / cfg.bandwidth
    cons = []
    for k in range(cfg.n_users):
        P, q, r = _embed_quad(users[k], layout)
        has = False
        if k in layout.bs_users:
            q[layout.bs_users.index(k)] += scale
            has = True
        if k in layout.cs_users:
            q[nb + layout.cs_users.index(k)] += scale
            has = True
        if has:
            cons.append(cvxcore.Constraint(q=q, r=r - c_const, P=P, name=f"uplink{k}"))
    if layout.cs_users:
        P, q, r = _embed_quad(cs, layout)
        q[nb:layout.n_rates] += scale
        cons.append(cvxcore.Constraint(q=q, r=r - c_const, P=P, name="downlink"))
    P, q, r = _embed_quad(sens, layout)
    cons.append(cvxcore.Constraint(q=q, r=r - c_const + sensing_threshold(cfg), P=P, name="sensing"))
    cons.append(_power_constraint(layout, cfg))
    lb = np.full(n, -np.inf)
    lb[:layout.n_rates] = 0.0
    ub = np.full(n, np.inf)
    return cons, lb, ub


def assemble_subproblem(state: WmmseState, order, ch, cfg, layout: _Layout, access="noma"):
    """Convex rate/beamformer problem for fixed weights and receivers."""
    cons, lb, ub = feasible_set(state, order, ch, cfg, layout, access)
    nb = len(layout.bs_users)
    w = np.asarray(cfg.user_weights)
    obj = np.zeros(layout.n)
    obj[:nb] = -w[layout.bs_users]
    obj[nb:layout.n_rates] = -w[layout.cs_users]
    return cvxcore.ConvexSubproblem(c=obj, constraints=cons, lb=lb, ub=ub)


def initial_interior_point(ch, cfg, order, layout, access="noma"):
    """Shrunk target beam with small positive rates; strictly feasible start.

    Tries power shrink factors 0.999, 0.9999, ... and raises
    :class:`InfeasibleSensing` when even the full-power beam misses the
    sensing floor, or when no shrink factor leaves strict slack.
    Returns ``(r_b, r_c, p, gamma0)`` with rates in bit/s.
    """
    p0 = initialize_beamformer(ch, cfg)
    gamma0 = sensing_sinr(p0, ch, cfg, access)
    if gamma0 < cfg.sensing_sinr_min:
        raise InfeasibleSensing(
            f"initial beam reaches gamma_s = {gamma0:.4g} < required {cfg.sensing_sinr_min:.4g}",
            achieved=gamma0, required=cfg.sensing_sinr_min)
    K, B = cfg.n_users, cfg.bandwidth
    nb, nc = len(layout.bs_users), len(layout.cs_users)
    for f in _SHRINK_FACTORS:
        p = math.sqrt(f) * p0
        if sensing_sinr(p, ch, cfg, access) <= cfg.sensing_sinr_min:
            continue
        Ru = uplink_rates(order, p, ch, cfg, access)
        Rd = downlink_rate(p, ch, cfg)
        # rates sized to leave slack in every rate and power constraint
        budget = (1.0 - f) * cfg.bs_power_budget / 2.0
        cap_b = (budget / max(nb, 1) / cfg.cpu_power_factor) ** (1 / 3) / cfg.cycles_per_bit
        r_b = np.zeros(K)
        r_c = np.zeros(K)
        for k in layout.bs_users:
            r_b[k] = min(0.25 * B * Ru[k], cap_b)
        for k in layout.cs_users:
            r_c[k] = min(0.25 * B * Ru[k], 0.5 * B * Rd / max(nc, 1))
        if np.any(r_b[layout.bs_users] <= 0) or np.any(r_c[layout.cs_users] <= 0):
            continue
        return r_b, r_c, p, gamma0
    raise InfeasibleSensing("sensing floor is met only at full power: borderline infeasible",
                            achieved=gamma0, required=cfg.sensing_sinr_min)


def solve_convex(prob, x, tol):
    """Barrier solve from ``x``, falling back to phase one if the start has no slack.

    When centring stalls on an ill-conditioned late barrier stage the last
    strictly feasible iterate is used; the outer loops only need a feasible
    point that does not lose objective, which they check themselves.
    """
    try:
        try:
            return cvxcore.solve(prob, x, tol=tol)
        except NeedsPhaseOne:
            return cvxcore.solve(prob, cvxcore.phase_one(prob, x), tol=tol)
    except ConvergenceFailure as exc:
        if exc.best is None or not prob.max_violation(exc.best.x) < 0:
            raise
        return exc.best


def weighted_sum(r_b, r_c, cfg) -> float:
    return float(np.dot(cfg.user_weights, np.asarray(r_b) + np.asarray(r_c)))


def interior_start(p, ch, cfg, order, layout, access="noma"):
    """Strictly feasible solver vector at beamformer ``p``, or None.

    Used to restart the alternation from an extrapolated beamformer; returns
    None when ``p`` violates the power budget or the sensing floor.
    """
    K, B = cfg.n_users, cfg.bandwidth
    spare = cfg.bs_power_budget - float(np.real(np.vdot(p, p)))
    if spare <= 0 or sensing_sinr(p, ch, cfg, access) <= cfg.sensing_sinr_min * (1 + 1e-9):
        return None
    Ru = uplink_rates(order, p, ch, cfg, access)
    Rd = downlink_rate(p, ch, cfg)
    nb, nc = len(layout.bs_users), len(layout.cs_users)
    cap_b = (spare / 2.0 / max(nb, 1) / cfg.cpu_power_factor) ** (1 / 3) / cfg.cycles_per_bit
    r_b = np.zeros(K)
    r_c = np.zeros(K)
    for k in layout.bs_users:
        r_b[k] = min(cap_b, 0.1 * B * Ru[k])
    for k in layout.cs_users:
        r_c[k] = min(0.25 * B * Ru[k], 0.5 * B * Rd / max(nc, 1))
    if np.any(r_b[layout.bs_users] <= 0) or np.any(r_c[layout.cs_users] <= 0):
        return None
    return p, layout.pack(r_b, r_c, p)


@dataclass
class _Iterate:
    p: np.ndarray
    x: np.ndarray
    objective: float
    state: WmmseState | None = None
    kkt: float = float("nan")


class _AoMap:
    """One alternation round ``p -> F(p)`` with a solve counter."""

    def __init__(self, ch, cfg, order, layout, access):
        self.ch, self.cfg, self.order, self.layout, self.access = ch, cfg, order, layout, access
        self.solves = 0

    def __call__(self, it: _Iterate) -> _Iterate:
        self.solves += 1
        cfg, K = self.cfg, self.cfg.n_users
        state = mmse_state(it.p, self.order, self.ch, cfg, self.access)
        prob = assemble_subproblem(state, self.order, self.ch, cfg, self.layout, self.access)
        res = solve_convex(prob, it.x, cfg.solver_tol)
        r_b, r_c, p, _ = self.layout.unpack(res.x, K)
        return _Iterate(p, res.x, weighted_sum(r_b, r_c, cfg), state, res.kkt_residual)


def _plain_loop(F, cur, cfg, trace):
    """Plain alternation; a round that does not improve is rejected."""
    prev = None if not trace else trace[-1]
    while F.solves < cfg.ao_max_iter:
        new = F(cur)
        if prev is not None and new.objective <= prev:
            # the current iterate is already a fixed point
            cur.state = new.state
            trace.append(prev)
            return cur, True
        cur = new
        trace.append(cur.objective)
        if prev is not None and abs(cur.objective - prev) <= cfg.ao_tol * abs(prev):
            return cur, True
        prev = cur.objective
    return cur, False


def _squarem_loop(F, cur, cfg, trace, start_of):
    """Squared extrapolation of the alternation map with a monotone guard.

    Each cycle takes two plain rounds ``p1 = F(p)``, ``p2 = F(p1)`` and tries
    ``p - 2 a r + a^2 v`` (``r = p1 - p``, ``v = p2 - p1 - r``), halving the
    step towards the plain one until ``F`` of the extrapolation beats ``p2``.
    The trace records the best objective after every solve.
    """
    best = cur.objective

    def step(it):
        nonlocal best
        out = F(it)
        best = max(best, out.objective)
        trace.append(best)
        return out

    while F.solves + 2 <= cfg.ao_max_iter:
        a = step(cur)
        b = step(a)
        r = cvxcore.to_real(a.p - cur.p)
        v = cvxcore.to_real(b.p - a.p) - r
        nv = float(np.linalg.norm(v))
        alpha = min(-float(np.linalg.norm(r)) / nv, -1.0) if nv > 0 else -1.0
        alpha = max(alpha, -_MAX_STEP)
        nxt = max((cur, a, b), key=lambda it: it.objective)
        # step lengths -alpha shrink towards the plain double step (alpha = -1)
        while F.solves < cfg.ao_max_iter:
            pe = cvxcore.to_complex(cvxcore.to_real(cur.p) - 2 * alpha * r + alpha ** 2 * v)
            restart = start_of(pe)
            if restart is not None:
                try:
                    c = step(_Iterate(*restart, -math.inf))
                except (NeedsPhaseOne, ConvergenceFailure):
                    c = None
                if c is not None and c.objective >= nxt.objective:
                    nxt = c
                    break
            if alpha >= -1.0 + 1e-9:
                break
            alpha = (alpha - 1.0) / 2.0
        done = abs(nxt.objective - cur.objective) <= cfg.ao_tol * abs(cur.objective)
        cur = nxt
        if done:
            return cur, True
    return cur, False


def solve_partial(ch: ChannelRealization, cfg: ScenarioConfig, order: DecodingOrder | None = None,
                  *, access: str = "noma", bs_users=None, cs_users=None,
                  start: tuple | None = None) -> PartialSolution:
    """Alternate weights, receivers and the convex rate/beamformer update.

    ``bs_users`` / ``cs_users`` restrict which users may compute at the BS
    or the CS (others have that rate pinned to zero); both default to all
    users.  ``start`` optionally supplies a strictly feasible
    ``(r_b, r_c, p)`` with rates in bit/s.

    With ``cfg.ao_acceleration == "none"`` each round is one solve and a
    round that does not improve the objective is rejected (the previous
    iterate stays feasible for the new round).  With ``"squarem"`` the
    rounds are extrapolated; ``iterations`` counts every convex solve.
    Either way the run stops when the relative objective change drops below
    ``cfg.ao_tol`` or after ``cfg.ao_max_iter`` solves, and the trace is
    nondecreasing.
    """
    K = cfg.n_users
    if order is None:
        order = propose_decoding_order(cfg)
    if len(order) != K:
        raise InvalidArgument("decoding order length does not match n_users")
    bs_users = list(range(K)) if bs_users is None else sorted(int(k) for k in bs_users)
    cs_users = list(range(K)) if cs_users is None else sorted(int(k) for k in cs_users)
    # solver works in bit/s/Hz
    layout = _Layout(bs_users, cs_users, cfg.n_antennas, rate_unit=cfg.bandwidth)

    if start is None:
        r_b, r_c, p, gamma0 = initial_interior_point(ch, cfg, order, layout, access)
    else:
        r_b, r_c, p = (np.asarray(v) for v in start)
        gamma0 = sensing_sinr(initialize_beamformer(ch, cfg), ch, cfg, access)

    F = _AoMap(ch, cfg, order, layout, access)
    cur = F(_Iterate(p, layout.pack(r_b, r_c, p), -math.inf))
    trace = [cur.objective]
    converged = False
    if cfg.ao_acceleration == "squarem":
        cur, converged = _squarem_loop(
            F, cur, cfg, trace, lambda pe: interior_start(pe, ch, cfg, order, layout, access))
    if not converged and F.solves < cfg.ao_max_iter:
        # plain rounds finish the run, so the returned state is the one the
        # last accepted solve used
        cur, converged = _plain_loop(F, cur, cfg, trace)

    r_b, r_c, p, _ = layout.unpack(cur.x, K)
    return PartialSolution(
        p=p, r_b=r_b, r_c=r_c, objective=trace[-1], trace=trace,
        iterations=F.solves, converged=converged, sensing_sinr_achieved=sensing_sinr(p, ch, cfg, access),
        order=order, access=access, state=cur.state, kkt_residual=cur.kkt,
        fixed_point_residual=fixed_point_residual(cur.state, p, order, ch, cfg, access),
        initial_sensing_sinr=gamma0)


def exhaustive_order_oracle(ch, cfg, access="noma", max_users: int = 5):
    """Best decoding order by running the AO for all K! orders."""
    if cfg.n_users > max_users:
        raise ProblemTooLarge(f"exhaustive order search refused for K={cfg.n_users} > {max_users}")
    best = None
    for seq in itertools.permutations(range(cfg.n_users)):
        order = DecodingOrder.from_sequence(seq)
        sol = solve_partial(ch, cfg, order, access=access)
        if best is None or sol.objective > best[1]:
            best = (order, sol.objective)
    return best
