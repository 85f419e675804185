"""MSE / augmented weighted MSE machinery for the three stream families.

Every rate constraint of the optimisation problems is rewritten through the
identity ``min_{weight, receiver} (weight * mse - log2 weight) = c - rate``
with ``c = 1/ln 2 + log2(ln 2)``.  For fixed weights and receivers the
augmented MSE of each stream is a convex quadratic in the beamformer, which
:func:`awmse_quadratics` exposes explicitly.

Streams are the K uplink users, the BS->CS link (``d``) and the virtual
sensing stream (``s``) whose noise is the clutter-plus-noise covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .linalg import hpd_solve
from .rates import interferers, sensing_covariance, uplink_interference_covariance
from .scenario import ChannelRealization, ScenarioConfig

LN2 = math.log(2.0)
RATE_WMMSE_CONSTANT = 1.0 / LN2 + math.log2(LN2)


@dataclass(frozen=True, eq=False)
class WmmseState:
    user_receivers: np.ndarray  # (K, N)
    cs_receiver: complex
    sensing_receiver: np.ndarray  # (N,)
    user_weights: np.ndarray  # (K,)
    cs_weight: float
    sensing_weight: float

    def __post_init__(self):
        ws = np.concatenate([np.atleast_1d(self.user_weights), [self.cs_weight, self.sensing_weight]])
        if not np.all(ws > 0):
            raise InvalidArgument("AWMSE weights must be strictly positive")

    @property
    def weights(self) -> np.ndarray:
        """All K+2 weights: users, then CS link, then sensing."""
        return np.concatenate([self.user_weights, [self.cs_weight, self.sensing_weight]])


@dataclass(frozen=True, eq=False)
class QuadForm:
    """``f(p) = p^H A p + 2 Re{b^H p} + const`` with Hermitian PSD ``A``."""

    A: np.ndarray
    b: np.ndarray
    const: float

    def __call__(self, p) -> float:
        p = np.asarray(p)
        return float(np.real(np.vdot(p, self.A @ p)) + 2.0 * np.real(np.vdot(self.b, p)) + self.const)


def _user_signal_covariance(k, order, p, ch, cfg, access):
    h = ch.uplink_channels[k]
    return cfg.user_tx_power * np.outer(h, h.conj()) + uplink_interference_covariance(k, order, p, ch, cfg, access)


def _sensing_signal_covariance(p, ch, cfg, access):
    v = ch.target_matrix @ p
    return np.outer(v, v.conj()) + sensing_covariance(p, ch, cfg, access)


def mmse_receivers(p, order, ch: ChannelRealization, cfg: ScenarioConfig, access="noma"):
    """MMSE receivers ``(W_u, w_d, w_s)`` at beamformer ``p``."""
    p = np.asarray(p, dtype=complex)
    K = cfg.n_users
    su = math.sqrt(cfg.user_tx_power)
    W = np.empty((K, cfg.n_antennas), dtype=complex)
    for k in range(K):
        C = _user_signal_covariance(k, order, p, ch, cfg, access)
        W[k] = su * hpd_solve(C, ch.uplink_channels[k])
    g = np.vdot(ch.bs_cs_channel, p)
    w_d = g / (abs(g) ** 2 + cfg.noise_power_cs)
    w_s = hpd_solve(_sensing_signal_covariance(p, ch, cfg, access), ch.target_matrix @ p)
    return W, complex(w_d), w_s


def mse(p, receivers, order, ch, cfg, access="noma"):
    """Direct quadratic-form MSEs ``(e_u, e_d, e_s)`` for arbitrary receivers."""
    p = np.asarray(p, dtype=complex)
    W, w_d, w_s = receivers
    su = math.sqrt(cfg.user_tx_power)
    e_u = np.empty(cfg.n_users)
    for k in range(cfg.n_users):
        w = W[k]
        C = _user_signal_covariance(k, order, p, ch, cfg, access)
        e_u[k] = np.real(np.vdot(w, C @ w)) - 2.0 * su * np.real(np.vdot(w, ch.uplink_channels[k])) + 1.0
    g = np.vdot(ch.bs_cs_channel, p)
    e_d = abs(w_d) ** 2 * (abs(g) ** 2 + cfg.noise_power_cs) - 2.0 * np.real(np.conj(w_d) * g) + 1.0
    C_s = _sensing_signal_covariance(p, ch, cfg, access)
    e_s = np.real(np.vdot(w_s, C_s @ w_s)) - 2.0 * np.real(np.vdot(w_s, ch.target_matrix @ p)) + 1.0
    return e_u, float(e_d), float(e_s)


def mmse_errors(p, order, ch, cfg, access="noma"):
    """Minimum MSEs in Woodbury form, each in (0, 1]."""
    p = np.asarray(p, dtype=complex)
    e_u = np.empty(cfg.n_users)
    for k in range(cfg.n_users):
        R = uplink_interference_covariance(k, order, p, ch, cfg, access)
        h = ch.uplink_channels[k]
        e_u[k] = 1.0 / (1.0 + cfg.user_tx_power * np.real(np.vdot(h, hpd_solve(R, h))))
    g = np.vdot(ch.bs_cs_channel, p)
    e_d = 1.0 / (1.0 + abs(g) ** 2 / cfg.noise_power_cs)
    v = ch.target_matrix @ p
    e_s = 1.0 / (1.0 + np.real(np.vdot(v, hpd_solve(sensing_covariance(p, ch, cfg, access), v))))
    return e_u, float(e_d), float(e_s)


def optimal_weights(p, order, ch, cfg, access="noma"):
    """``(e_mmse ln 2)^{-1}`` per stream."""
    e_u, e_d, e_s = mmse_errors(p, order, ch, cfg, access)
    return 1.0 / (e_u * LN2), 1.0 / (e_d * LN2), 1.0 / (e_s * LN2)


def mmse_state(p, order, ch, cfg, access="noma") -> WmmseState:
    """Closed-form optimal receivers and weights at ``p``."""
    W, w_d, w_s = mmse_receivers(p, order, ch, cfg, access)
    wu, wd, ws = optimal_weights(p, order, ch, cfg, access)
    return WmmseState(W, w_d, w_s, wu, wd, ws)


def awmse(p, state: WmmseState, order, ch, cfg, access="noma"):
    """Augmented weighted MSEs ``weight * e - log2 weight`` per stream."""
    e_u, e_d, e_s = mse(p, (state.user_receivers, state.cs_receiver, state.sensing_receiver),
                        order, ch, cfg, access)
    eps_u = state.user_weights * e_u - np.log2(state.user_weights)
    eps_d = state.cs_weight * e_d - math.log2(state.cs_weight)
    eps_s = state.sensing_weight * e_s - math.log2(state.sensing_weight)
    return eps_u, float(eps_d), float(eps_s)


def awmse_quadratics(state: WmmseState, order, ch, cfg, access="noma"):
    """Coefficients of every AWMSE as a quadratic function of ``p``.

    Returns ``(users, cs, sensing)`` where ``users`` is a list of K
    :class:`QuadForm` objects.
    """
    N, K = cfg.n_antennas, cfg.n_users
    Pu, s2 = cfg.user_tx_power, cfg.noise_power_bs
    su = math.sqrt(Pu)
    h = ch.uplink_channels
    G = ch.sensing_matrix
    zero = np.zeros(N, dtype=complex)

    users = []
    for k in range(K):
        w, om = state.user_receivers[k], state.user_weights[k]
        u = G.conj().T @ w
        idx = [k] + interferers(k, order, K, access)
        # w^H (P_u sum h h^H + s2 I) w without the beamformer-dependent echo
        base = Pu * np.sum(np.abs(h[idx].conj() @ w) ** 2) + s2 * np.real(np.vdot(w, w))
        const = om * (base - 2.0 * su * np.real(np.vdot(w, h[k])) + 1.0) - math.log2(om)
        users.append(QuadForm(om * np.outer(u, u.conj()), zero, float(const)))

    w_d, om = state.cs_receiver, state.cs_weight
    hd = ch.bs_cs_channel
    cs = QuadForm(om * abs(w_d) ** 2 * np.outer(hd, hd.conj()), -om * w_d * hd,
                  float(om * (abs(w_d) ** 2 * cfg.noise_power_cs + 1.0) - math.log2(om)))

    w_s, om = state.sensing_receiver, state.sensing_weight
    us = ch.target_matrix.conj().T @ w_s
    uc = ch.clutter_matrix.conj().T @ w_s
    base = s2 * np.real(np.vdot(w_s, w_s))
    if access == "sdma":
        base += Pu * np.sum(np.abs(h.conj() @ w_s) ** 2)
    sensing = QuadForm(om * (np.outer(us, us.conj()) + np.outer(uc, uc.conj())), -om * us,
                       float(om * (base + 1.0) - math.log2(om)))
    return users, cs, sensing


def fixed_point_residual(state: WmmseState, p, order, ch, cfg, access="noma") -> float:
    """Largest relative gap between ``state`` and the MMSE optimum at ``p``.

    Zero exactly when the weights and receivers are the closed-form optima
    for ``p``.
    """
    opt = mmse_state(p, order, ch, cfg, access)

    def rel(a, b):
        a, b = np.atleast_1d(a), np.atleast_1d(b)
        scale = max(float(np.linalg.norm(b)), 1e-300)
        return float(np.linalg.norm(a - b)) / scale

    gaps = [rel(state.user_weights, opt.user_weights),
            rel(state.cs_weight, opt.cs_weight),
            rel(state.sensing_weight, opt.sensing_weight),
            rel(state.sensing_receiver, opt.sensing_receiver)]
    gaps += [rel(state.user_receivers[k], opt.user_receivers[k]) for k in range(cfg.n_users)]
    if abs(opt.cs_receiver) > 0:
        gaps.append(rel(state.cs_receiver, opt.cs_receiver))
    return max(gaps)
