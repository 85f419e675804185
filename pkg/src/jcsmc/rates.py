"""Closed-form communication and sensing rates.

Rates are spectral efficiencies in bit/s/Hz.  Two multiple-access schemes
are modelled:

``"noma"``
    Uplink users are decoded by SIC in a given order; user ``k`` sees only
    users decoded after it, and the sensing echo is processed after all
    user streams have been cancelled.
``"sdma"``
    Each user is decoded treating every other user as interference, and the
    sensing receiver also suffers from all user signals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSensing, InvalidArgument
from .linalg import hpd_quad_inv, hpd_solve
from .scenario import ChannelRealization, ScenarioConfig

ACCESS_SCHEMES = ("noma", "sdma")


@dataclass(frozen=True)
class DecodingOrder:
    """SIC order; ``positions[k]`` is the 0-based decode slot of user k."""

    positions: tuple

    def __post_init__(self):
        pos = tuple(int(v) for v in self.positions)
        if sorted(pos) != list(range(len(pos))):
            raise InvalidArgument(f"decoding order must be a permutation of 0..K-1, got {pos}")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def identity(cls, K: int) -> "DecodingOrder":
        return cls(tuple(range(K)))

    @classmethod
    def from_sequence(cls, users) -> "DecodingOrder":
        """Build from the list of users in the order they are decoded."""
        users = list(users)
        pos = [0] * len(users)
        for slot, k in enumerate(users):
            pos[k] = slot
        return cls(tuple(pos))

    @property
    def sequence(self) -> tuple:
        return tuple(int(k) for k in np.argsort(self.positions))

    def __len__(self):
        return len(self.positions)


def _check_access(access):
    if access not in ACCESS_SCHEMES:
        raise InvalidArgument(f"unknown access scheme {access!r}")


def _check_user(k, K):
    if not (0 <= k < K):
        raise InvalidArgument(f"user index {k} out of range for K={K}")


def interferers(k: int, order: DecodingOrder | None, K: int, access: str = "noma") -> list:
    """Users whose signals remain as interference when decoding user k."""
    _check_access(access)
    _check_user(k, K)
    if access == "sdma":
        return [i for i in range(K) if i != k]
    pos = order.positions
    return [i for i in range(K) if pos[i] > pos[k]]


def uplink_interference_covariance(k, order, p, ch: ChannelRealization, cfg: ScenarioConfig,
                                   access="noma") -> np.ndarray:
    N = cfg.n_antennas
    h = ch.uplink_channels
    idx = interferers(k, order, cfg.n_users, access)
    R = cfg.noise_power_bs * np.eye(N, dtype=complex)
    if idx:
        Hi = h[idx]
        R += cfg.user_tx_power * (Hi.T @ Hi.conj())
    g = ch.sensing_matrix @ np.asarray(p)
    R += np.outer(g, g.conj())
    return R


def noma_interference_covariance(k, order, p, ch, cfg):
    """Residual-user + echo + noise covariance seen when decoding user k."""
    return uplink_interference_covariance(k, order, p, ch, cfg, "noma")


def sdma_interference_covariance(k, p, ch, cfg):
    return uplink_interference_covariance(k, None, p, ch, cfg, "sdma")


def uplink_rate(k, order, p, ch, cfg, access="noma") -> float:
    R = uplink_interference_covariance(k, order, p, ch, cfg, access)
    h = ch.uplink_channels[k]
    return float(np.log2(1.0 + cfg.user_tx_power * hpd_quad_inv(R, h)))


def noma_uplink_rate(k, order, p, ch, cfg) -> float:
    """``log2(1 + P_u h^H R^{-1} h)`` with the MMSE-SIC covariance."""
    return uplink_rate(k, order, p, ch, cfg, "noma")


def sdma_uplink_rate(k, p, ch, cfg) -> float:
    return uplink_rate(k, None, p, ch, cfg, "sdma")


def uplink_rates(order, p, ch, cfg, access="noma") -> np.ndarray:
    return np.array([uplink_rate(k, order, p, ch, cfg, access) for k in range(cfg.n_users)])


def downlink_rate(p, ch, cfg) -> float:
    """BS to CS rate ``log2(1 + |h_d^H p|^2 / sigma_d^2)``."""
    g = np.vdot(ch.bs_cs_channel, p)
    return float(np.log2(1.0 + abs(g) ** 2 / cfg.noise_power_cs))


def sensing_covariance(p, ch, cfg, access="noma") -> np.ndarray:
    _check_access(access)
    N = cfg.n_antennas
    g = ch.clutter_matrix @ np.asarray(p)
    R = np.outer(g, g.conj()) + cfg.noise_power_bs * np.eye(N, dtype=complex)
    if access == "sdma":
        h = ch.uplink_channels
        R += cfg.user_tx_power * (h.T @ h.conj())
    return R


def clutter_covariance(p, ch, cfg) -> np.ndarray:
    """Clutter-plus-noise covariance ``H_c p p^H H_c^H + sigma_u^2 I``."""
    return sensing_covariance(p, ch, cfg, "noma")


def sdma_clutter_covariance(p, ch, cfg) -> np.ndarray:
    return sensing_covariance(p, ch, cfg, "sdma")


def mvdr_receiver(p, ch, cfg, access="noma") -> np.ndarray:
    """Distortionless receiver normalised so that ``w^H H_s p = 1``."""
    v = ch.target_matrix @ np.asarray(p)
    if not np.any(np.abs(v) > 0):
        raise DegenerateSensing("H_s p = 0: the target is not illuminated")
    x = hpd_solve(sensing_covariance(p, ch, cfg, access), v)
    return x / np.vdot(v, x)


def sensing_sinr(p, ch, cfg, access="noma") -> float:
    """MVDR output SINR ``p^H H_s^H R_c^{-1} H_s p``."""
    v = ch.target_matrix @ np.asarray(p)
    return hpd_quad_inv(sensing_covariance(p, ch, cfg, access), v)


def sdma_sensing_sinr(p, ch, cfg) -> float:
    return sensing_sinr(p, ch, cfg, "sdma")


def sensing_sinr_ratio(w, p, ch, cfg, access="noma") -> float:
    """SINR of an arbitrary receiver ``w``."""
    v = ch.target_matrix @ np.asarray(p)
    R = sensing_covariance(p, ch, cfg, access)
    den = float(np.real(np.vdot(w, R @ w)))
    return abs(np.vdot(w, v)) ** 2 / den


def sensing_rate(p, ch, cfg, access="noma") -> float:
    """Rate of the equivalent virtual sensing stream, ``log2(1 + gamma_s)``."""
    return float(np.log2(1.0 + sensing_sinr(p, ch, cfg, access)))
