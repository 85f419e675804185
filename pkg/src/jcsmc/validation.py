"""Closed-form identity and solver self-checks.

Each check returns a :class:`Check` holding the worst error seen and the
tolerance it is held to; the CLI ``validate`` command prints them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import cvxcore
from .rates import (DecodingOrder, mvdr_receiver, sensing_sinr, sensing_sinr_ratio, uplink_rate,
                    uplink_rates)
from .scenario import ScenarioConfig, sample_channels
from .wmmse import RATE_WMMSE_CONSTANT, awmse, mmse_errors, mmse_receivers, mmse_state, mse


@dataclass
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: worst {self.error:.3e} (tol {self.tol:.0e})"


def random_instances(n: int, seed: int = 0, cfg: ScenarioConfig | None = None):
    """``n`` (config, channel, beamformer, order) tuples with random power and order."""
    cfg = ScenarioConfig(seed=seed) if cfg is None else cfg
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        ch = sample_channels(cfg, i)
        p = rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas)
        p *= math.sqrt(cfg.bs_power_budget * rng.uniform(0.05, 1.0)) / np.linalg.norm(p)
        order = DecodingOrder.from_sequence(rng.permutation(cfg.n_users))
        out.append((cfg, ch, p, order))
    return out


def identity_checks(n: int = 200, seed: int = 0) -> list:
    """Rate/MSE/MVDR identities and decoding-order invariance on ``n`` instances."""
    worst = dict(rate_mse=0.0, woodbury=0.0, wmmse=0.0, mvdr=0.0, order=0.0)
    for cfg, ch, p, order in random_instances(n, seed):
        K = cfg.n_users
        e_u, e_d, e_s = mmse_errors(p, order, ch, cfg)
        for k in range(K):
            worst["rate_mse"] = max(worst["rate_mse"], abs(uplink_rate(k, order, p, ch, cfg) + math.log2(e_u[k])))
        d_u, d_d, d_s = mse(p, mmse_receivers(p, order, ch, cfg), order, ch, cfg)
        direct = np.concatenate([d_u, [d_d, d_s]])
        wood = np.concatenate([e_u, [e_d, e_s]])
        worst["woodbury"] = max(worst["woodbury"], float(np.max(np.abs(direct - wood))))
        st = mmse_state(p, order, ch, cfg)
        eps_u, _, _ = awmse(p, st, order, ch, cfg)
        rates = uplink_rates(order, p, ch, cfg)
        worst["wmmse"] = max(worst["wmmse"], float(np.max(np.abs(eps_u - (RATE_WMMSE_CONSTANT - rates)))))
        w = mvdr_receiver(p, ch, cfg)
        q = sensing_sinr(p, ch, cfg)
        worst["mvdr"] = max(worst["mvdr"], abs(sensing_sinr_ratio(w, p, ch, cfg) - q) / q)
        sums = [float(np.sum(uplink_rates(DecodingOrder.from_sequence(s), p, ch, cfg)))
                for s in itertools.permutations(range(K))]
        worst["order"] = max(worst["order"], (max(sums) - min(sums)) / max(sums))
    return [
        Check("uplink rate equals -log2 of the MMSE", worst["rate_mse"], 1e-10),
        Check("Woodbury MSE equals direct MSE", worst["woodbury"], 1e-10),
        Check("AWMSE at the optimum equals c - R", worst["wmmse"], 1e-9),
        Check("MVDR quadratic form equals ratio form (relative)", worst["mvdr"], 1e-9),
        Check("uplink sum rate invariant to decoding order (relative)", worst["order"], 1e-9),
    ]


def solver_examples() -> list:
    """Two closed-form optima of the barrier solver."""
    # max r  s.t.  kappa (phi r)^3 <= P, solved in units of 1e6 bit/s
    P, kappa, phi, u = 1.0, 1e-26, 3e3, 1e6
    prob = cvxcore.ConvexSubproblem(
        c=np.array([-1.0]), lb=np.array([0.0]),
        constraints=[cvxcore.Constraint(q=np.zeros(1), r=-1.0, cubic=np.array([kappa * (phi * u) ** 3 / P]))])
    res = cvxcore.solve(prob, np.array([0.01]), tol=1e-12)
    exact = (P / kappa) ** (1 / 3) / phi
    err_cubic = abs(res.x[0] * u - exact) / exact
    # min (x - 3)^2 / 2  s.t.  x <= 2
    prob = cvxcore.ConvexSubproblem(c=np.array([-3.0]), Q=np.array([[1.0]]), const=4.5,
                                    constraints=[cvxcore.Constraint(q=np.array([1.0]), r=-2.0)])
    res = cvxcore.solve(prob, np.array([0.0]), tol=1e-12)
    return [Check("cubic power budget optimum (P/kappa)^(1/3)/phi (relative)", err_cubic, 1e-8),
            Check("bounded quadratic optimum x* = 2", abs(res.x[0] - 2.0), 1e-8)]
