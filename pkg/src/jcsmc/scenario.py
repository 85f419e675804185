"""Physical scenario, parameters and channel generation.

All quantities are stored in linear SI units (watts, meters, hertz,
radians).  The config file loader accepts dB/dBm spellings of the power
fields and converts them on the way in.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, InvalidArgument

# Stream identifiers mixed into the RNG key so every random component of a
# draw has its own generator.  User channels get one stream per user index,
# which keeps the first K users identical when K grows.
_STREAM_USER = 1
_STREAM_CS_LINK = 2
_STREAM_REFLECTION = 3


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x):
    return 10.0 * np.log10(x) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Every physical, computing and algorithm parameter of one scenario.

    Defaults reproduce the simulation setup: 8-antenna half-wavelength ULA,
    3 users at 60 m, a target at 0 deg and four clutters at +-30/+-60 deg,
    all at 50 m; -80 dBm noise, 30 MHz, 3000 cycles/bit, kappa = 1e-26.
    """

    n_antennas: int = 8
    n_users: int = 3
    clutter_angles: tuple = tuple(np.deg2rad([-60.0, -30.0, 30.0, 60.0]))
    target_angle: float = 0.0
    user_distances: tuple = (60.0, 60.0, 60.0)
    sensing_distances: tuple = (50.0,) * 5
    reflection_magnitudes: tuple = (1.0,) * 5
    user_tx_power: float = 0.1
    bs_power_budget: float = 1.0
    noise_power_bs: float = 1e-11
    noise_power_cs: float = 1e-11
    bandwidth: float = 30e6
    cycles_per_bit: float = 3e3
    cpu_power_factor: float = 1e-26
    user_weights: tuple = (1.0, 1.0, 1.0)
    antenna_spacing_ratio: float = 0.5
    sensing_sinr_min: float = 1e3
    seed: int = 0
    cs_distance: float = 80.0

    # WMMSE alternating optimization (partial offloading)
    ao_tol: float = 1e-4
    ao_max_iter: int = 300
    # "squarem" extrapolates the AO map (every solve counts as an iteration);
    # "none" runs the plain alternation
    ao_acceleration: str = "squarem"
    # ADMM (binary offloading); penalties and residuals act on rates expressed in
    # units of `admm_rate_unit` bit/s so the default rho and tau are well scaled
    admm_rho: tuple = (1.0, 1.0, 0.1, 0.1)
    admm_tau: float = 1e-3
    admm_tol: float = 1e-4
    admm_max_iter: int = 300
    admm_rate_unit: float = 1e6
    # re-optimise rates and beamformer for the rounded decisions after ADMM
    binary_polish: bool = True
    # inner convex solver
    solver_tol: float = 1e-7

    def __post_init__(self):
        # normalise sequences to float tuples so configs hash and compare
        for name in ("clutter_angles", "user_distances", "sensing_distances",
                     "reflection_magnitudes", "user_weights", "admm_rho"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    @property
    def n_clutters(self) -> int:
        return len(self.clutter_angles)

    @property
    def sensing_angles(self) -> np.ndarray:
        """Target angle followed by the clutter angles."""
        return np.array((self.target_angle,) + self.clutter_angles)

    @property
    def sensing_sinr_min_db(self) -> float:
        return float(linear_to_db(self.sensing_sinr_min)) if self.sensing_sinr_min > 0 else -math.inf

    def validate(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ConfigError(f"n_antennas must be a positive integer, got {self.n_antennas}")
        if int(self.n_users) != self.n_users or self.n_users < 1:
            raise ConfigError(f"n_users must be a positive integer, got {self.n_users}")
        K, M = self.n_users, self.n_clutters
        if len(self.user_distances) != K:
            raise ConfigError(f"need {K} user distances, got {len(self.user_distances)}")
        if len(self.user_weights) != K:
            raise ConfigError(f"need {K} user weights, got {len(self.user_weights)}")
        if len(self.sensing_distances) != M + 1:
            raise ConfigError(f"need {M + 1} sensing distances (target first), got {len(self.sensing_distances)}")
        if len(self.reflection_magnitudes) != M + 1:
            raise ConfigError(f"need {M + 1} reflection magnitudes, got {len(self.reflection_magnitudes)}")
        positive = {
            "user_distances": min(self.user_distances),
            "sensing_distances": min(self.sensing_distances),
            "user_weights": min(self.user_weights),
            "user_tx_power": self.user_tx_power,
            "bs_power_budget": self.bs_power_budget,
            "noise_power_bs": self.noise_power_bs,
            "noise_power_cs": self.noise_power_cs,
            "bandwidth": self.bandwidth,
            "cycles_per_bit": self.cycles_per_bit,
            "cpu_power_factor": self.cpu_power_factor,
            "antenna_spacing_ratio": self.antenna_spacing_ratio,
            "cs_distance": self.cs_distance,
            "admm_rate_unit": self.admm_rate_unit,
            "solver_tol": self.solver_tol,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if min(self.reflection_magnitudes) < 0:
            raise ConfigError("reflection magnitudes must be nonnegative")
        if not self.sensing_sinr_min >= 0:
            raise ConfigError(f"sensing_sinr_min must be >= 0, got {self.sensing_sinr_min}")
        if len(self.admm_rho) != 4 or min(self.admm_rho) <= 0:
            raise ConfigError("admm_rho needs four positive penalty parameters")
        if self.ao_acceleration not in ("none", "squarem"):
            raise ConfigError(f"ao_acceleration must be 'none' or 'squarem', got {self.ao_acceleration!r}")
        if self.ao_max_iter < 1 or self.admm_max_iter < 1:
            raise ConfigError("iteration caps must be >= 1")

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with changes; resizing users keeps per-user lists consistent."""
        K = changes.get("n_users", self.n_users)
        if K != self.n_users:
            for name in ("user_distances", "user_weights"):
                if name not in changes:
                    old = getattr(self, name)
                    changes[name] = tuple(old[k % len(old)] for k in range(K))
        return dataclasses.replace(self, **changes)

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        out["clutter_angles_deg"] = [float(np.rad2deg(a)) for a in self.clutter_angles]
        out["target_angle_deg"] = float(np.rad2deg(self.target_angle))
        del out["clutter_angles"], out["target_angle"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        # unit-suffixed spellings; suffix stripped after conversion
        conversions = {
            "_dbm": dbm_to_watts,
            "_db": db_to_linear,
            "_deg": np.deg2rad,
        }
        kwargs = {}
        for key, value in data.items():
            target, conv = key, None
            for suffix, fn in conversions.items():
                if key.endswith(suffix) and key[: -len(suffix)] in known:
                    target, conv = key[: -len(suffix)], fn
                    break
            if target not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if target in kwargs:
                raise ConfigError(f"config key {target!r} given twice")
            if conv is not None:
                arr = conv(value)
                value = arr.tolist() if np.ndim(arr) else float(arr)
            kwargs[target] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of all channels; arrays are read-only."""

    uplink_channels: np.ndarray   # (K, N) rows h_{u,k}
    bs_cs_channel: np.ndarray     # (N,)
    reflection_factors: np.ndarray  # (M+1,) target first
    target_matrix: np.ndarray     # (N, N)
    clutter_matrix: np.ndarray    # (N, N)
    draw_index: int = 0
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("uplink_channels", "bs_cs_channel", "reflection_factors",
                     "target_matrix", "clutter_matrix"):
            arr = np.array(getattr(self, name), dtype=complex)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def sensing_matrix(self) -> np.ndarray:
        """H_s + H_c, the total echo response."""
        return self.target_matrix + self.clutter_matrix


def steering_vector(theta: float, n: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA response ``exp(j 2 pi (d/lambda) i sin(theta))`` for i = 0..n-1."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"steering vector needs n >= 1, got {n}")
    i = np.arange(int(n))
    return np.exp(2j * np.pi * spacing_ratio * i * np.sin(theta))


def path_loss_db(distance: float, round_trip: bool = False) -> float:
    if not distance > 0:
        raise InvalidArgument(f"distance must be positive, got {distance}")
    d = 2.0 * distance if round_trip else distance
    return 30.0 + 30.0 * math.log10(d)


def path_loss_linear(distance: float, round_trip: bool = False) -> float:
    """Linear path loss from ``30 + 30 log10(D)`` dB, D doubled for echoes."""
    return 10.0 ** (path_loss_db(distance, round_trip) / 10.0)


def _rng(seed: int, draw_index: int, stream: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(draw_index), stream, int(index)))
    return np.random.Generator(np.random.Philox(ss))


def _cscg(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def echo_matrix(beta: complex, theta: float, n: int, spacing_ratio: float) -> np.ndarray:
    """``beta a(theta) a(theta)^T`` (plain transpose, monostatic echo)."""
    a = steering_vector(theta, n, spacing_ratio)
    return beta * np.outer(a, a)


def build_realization(config: ScenarioConfig, uplink_small_scale, cs_small_scale,
                      reflection_phases, draw_index: int = 0) -> ChannelRealization:
    """Assemble a realization from given small-scale fading and phases."""
    N = config.n_antennas
    g = np.asarray(uplink_small_scale, dtype=complex).reshape(config.n_users, N)
    L_u = np.array([path_loss_linear(d) for d in config.user_distances])
    h_u = g / np.sqrt(L_u)[:, None]
    h_d = np.asarray(cs_small_scale, dtype=complex) / math.sqrt(path_loss_linear(config.cs_distance))
    L_s = np.array([path_loss_linear(d, round_trip=True) for d in config.sensing_distances])
    beta = np.asarray(config.reflection_magnitudes) * np.exp(1j * np.asarray(reflection_phases)) / np.sqrt(L_s)
    angles = config.sensing_angles
    H_s = echo_matrix(beta[0], angles[0], N, config.antenna_spacing_ratio)
    H_c = np.zeros((N, N), dtype=complex)
    for m in range(1, len(angles)):
        H_c += echo_matrix(beta[m], angles[m], N, config.antenna_spacing_ratio)
    return ChannelRealization(h_u, h_d, beta, H_s, H_c, draw_index=int(draw_index))


def sample_channels(config: ScenarioConfig, draw_index: int = 0) -> ChannelRealization:
    """Rayleigh user and BS-CS links, line-of-sight echoes with random phase.

    Deterministic in ``(config.seed, draw_index)``; each user, the CS link and
    each reflection factor use an independent keyed Philox stream.
    """
    N = config.n_antennas
    g = np.stack([_cscg(_rng(config.seed, draw_index, _STREAM_USER, k), N)
                  for k in range(config.n_users)])
    g_d = _cscg(_rng(config.seed, draw_index, _STREAM_CS_LINK), N)
    phases = np.array([_rng(config.seed, draw_index, _STREAM_REFLECTION, m).uniform(0.0, 2 * np.pi)
                       for m in range(config.n_clutters + 1)])
    return build_realization(config, g, g_d, phases, draw_index)
