"""Benchmark schemes, Monte Carlo sweeps, feasibility study and beampatterns.

Every CSV written here starts with a ``# schema_version=N`` line followed by
the column header.  Floats are written with ``repr`` and rows are emitted in
(value, trial, scheme) order, so a rerun with the same SweepSpec reproduces the
file byte for byte.  Wall times are kept on :class:`SweepRow` but left out
of the CSV unless explicitly requested, since they never repeat.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binary import BinarySolution, solve_binary
from .errors import ConvergenceFailure, DegeneratePattern, InfeasibleSensing, InvalidArgument, NumericalFailure
from .partial import PartialSolution, initialize_beamformer, propose_decoding_order, solve_partial
from .rates import mvdr_receiver, sensing_sinr
from .scenario import ScenarioConfig, db_to_linear, dbm_to_watts, sample_channels, steering_vector

SCHEMA_VERSION = 1
SCHEMES = ("noma-partial", "noma-binary", "sdma-partial", "sdma-binary", "bs-only", "cs-only")
PARAMETERS = {"sinr_db": "gamma_db", "power_dbm": "power_dbm", "users": "n_users"}


def achieved_rate(sol) -> float:
    """Weighted computation rate of a solution in bit/s."""
    if isinstance(sol, BinarySolution):
        return float(sol.effective_rate)
    return float(sol.objective)


def run_benchmark(scheme: str, ch, cfg: ScenarioConfig, order=None, *, warm_start=None):
    """Run one scheme on one channel draw.

    BS-only and CS-only are the partial solver with the CS or BS rates
    pinned to zero; SDMA variants use the SDMA covariances throughout.
    ``warm_start`` optionally passes the partial solution the binary
    schemes start from.
    """
    if scheme not in SCHEMES:
        raise InvalidArgument(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    if order is None:
        order = propose_decoding_order(cfg)
    if scheme == "bs-only":
        return solve_partial(ch, cfg, order, cs_users=[])
    if scheme == "cs-only":
        return solve_partial(ch, cfg, order, bs_users=[])
    access, mode = scheme.split("-")
    if mode == "partial":
        return solve_partial(ch, cfg, order, access=access)
    return solve_binary(ch, cfg, order, access=access, warm_start=warm_start)


# -- sweeps ---------------------------------------------------------------
@dataclass(frozen=True)
class SweepSpec:
    parameter: str                 # "sinr_db", "power_dbm" or "users"
    values: tuple
    trials: int = 1
    schemes: tuple = ("noma-partial",)
    seed: int = 0
    out: str | None = None
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.parameter not in PARAMETERS:
            raise InvalidArgument(f"unknown sweep parameter {self.parameter!r}")
        if not self.values:
            raise InvalidArgument("sweep grid is empty")
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise InvalidArgument(f"unknown scheme {s!r}")

    def config_for(self, value) -> ScenarioConfig:
        cfg = self.config.replace(seed=int(self.seed))
        if self.parameter == "sinr_db":
            return cfg.replace(sensing_sinr_min=float(db_to_linear(value)))
        if self.parameter == "power_dbm":
            return cfg.replace(bs_power_budget=float(dbm_to_watts(value)))
        if int(value) != value or value < 1:
            raise InvalidArgument(f"user count must be a positive integer, got {value}")
        return cfg.replace(n_users=int(value))


@dataclass
class SweepRow:
    scheme: str
    value: float
    trial: int
    rate: float | None        # bit/s, None when infeasible or failed
    feasible: bool
    iterations: int
    wall_time: float
    status: str = "ok"        # ok | not-converged | infeasible | failed: <reason>


def _run_pair(spec: SweepSpec, value, trial: int) -> list:
    """All schemes of one (value, trial) pair; rows in scheme order."""
    cfg = spec.config_for(value)
    ch = sample_channels(cfg, trial)
    order = propose_decoding_order(cfg)
    partial_cache = {}
    rows = []
    for scheme in spec.schemes:
        t0 = time.perf_counter()
        try:
            access, _, mode = scheme.partition("-")
            warm = partial_cache.get(access) if mode == "binary" else None
            sol = run_benchmark(scheme, ch, cfg, order, warm_start=warm)
            if mode == "partial":
                partial_cache[access] = sol
            status = "ok" if sol.converged else "not-converged"
            rows.append(SweepRow(scheme, value, trial, achieved_rate(sol), True, sol.iterations,
                                 time.perf_counter() - t0, status))
        except InfeasibleSensing:
            rows.append(SweepRow(scheme, value, trial, None, False, 0, time.perf_counter() - t0, "infeasible"))
        except (ConvergenceFailure, NumericalFailure, np.linalg.LinAlgError) as exc:
            reason = " ".join(str(exc).split()).replace(",", ";")
            rows.append(SweepRow(scheme, value, trial, None, False, 0, time.perf_counter() - t0,
                                 f"failed: {reason}"))
    return rows


def _pair_args(spec):
    return [(spec, v, t) for v in spec.values for t in range(spec.trials)]


def _run_pair_star(args):
    return _run_pair(*args)


def run_sweep(spec: SweepSpec, *, with_timing: bool = False) -> list:
    """Run every (value, trial, scheme) and write the CSV if ``spec.out`` is set.

    Channel draw ``trial`` is the same for every value and scheme.  Pairs
    may run in a process pool (``spec.workers``); rows are always
    collected in grid order.
    """
    pairs = _pair_args(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_run_pair_star, pairs))
    else:
        chunks = [_run_pair(*p) for p in pairs]
    rows = [r for chunk in chunks for r in chunk]
    if spec.out is not None:
        write_sweep_csv(rows, spec.parameter, spec.out, with_timing=with_timing)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_sweep_csv(rows, parameter: str, path, *, with_timing: bool = False) -> None:
    header = ["scheme", PARAMETERS[parameter], "trial", "rate_bps", "feasible", "iterations", "status"]
    if with_timing:
        header.append("wall_time_s")
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            value = int(r.value) if parameter == "users" else r.value
            line = [r.scheme, _fmt(value), _fmt(r.trial), _fmt(r.rate), _fmt(r.feasible),
                    _fmt(r.iterations), r.status]
            if with_timing:
                line.append(_fmt(r.wall_time))
            w.writerow(line)


def read_sweep_csv(path) -> list:
    """Rows of a sweep CSV as dicts; checks the schema version."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# schema_version={SCHEMA_VERSION}":
            raise InvalidArgument(f"{path}: unsupported CSV schema line {first!r}")
        return list(csv.DictReader(fh))


def common_feasible_means(rows, schemes=None) -> dict:
    """Mean rate per (value, scheme) over trials feasible for every scheme.

    Returns ``{value: {scheme: mean or nan, "_count": n}}``.
    """
    schemes = tuple(schemes) if schemes is not None else tuple(dict.fromkeys(r.scheme for r in rows))
    table = {}
    for r in rows:
        table.setdefault(r.value, {}).setdefault(r.trial, {})[r.scheme] = r
    out = {}
    for value, trials in table.items():
        keep = [t for t, by in trials.items()
                if all(s in by and by[s].feasible and by[s].rate is not None for s in schemes)]
        entry = {s: (float(np.mean([trials[t][s].rate for t in keep])) if keep else math.nan)
                 for s in schemes}
        entry["_count"] = len(keep)
        out[value] = entry
    return out


# -- feasibility ------------------------------------------------------------
def feasible_start(ch, cfg: ScenarioConfig, access: str = "noma") -> bool:
    """Whether the full-power target beam meets the sensing floor."""
    return sensing_sinr(initialize_beamformer(ch, cfg), ch, cfg, access) >= cfg.sensing_sinr_min


def feasibility_study(cfg: ScenarioConfig, gamma_grid_db, trials: int, *, user_counts=None,
                      accesses=("noma", "sdma"), out=None) -> list:
    """Empirical probability that a sensing-feasible start exists.

    One channel draw per trial and user count is shared by all accesses and
    thresholds.  Returns rows ``(scheme, gamma_db, K, probability)``.
    """
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    user_counts = (cfg.n_users,) if user_counts is None else tuple(int(k) for k in user_counts)
    rows = []
    for K in user_counts:
        base = cfg.replace(n_users=K)
        # the start SINR does not depend on the threshold: compute it once
        gains = {a: np.empty(trials) for a in accesses}
        for t in range(trials):
            ch = sample_channels(base, t)
            p0 = initialize_beamformer(ch, base)
            for a in accesses:
                gains[a][t] = sensing_sinr(p0, ch, base, a)
        for a in accesses:
            for g in gamma_grid_db:
                prob = float(np.mean(gains[a] >= db_to_linear(g)))
                rows.append((a, float(g), K, prob))
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(f"# schema_version={SCHEMA_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scheme", "gamma_db", "n_users", "probability"])
            for a, g, K, prob in rows:
                w.writerow([a, _fmt(g), K, _fmt(prob)])
    return rows


# -- beampattern ------------------------------------------------------------
def beampattern_grid() -> np.ndarray:
    """The 101 angles ``-pi/2 : pi/100 : pi/2``."""
    return -np.pi / 2 + np.pi / 100 * np.arange(101)


def beampattern(p, w_s, ch, cfg: ScenarioConfig, angles=None):
    """Normalised transmit-receive pattern ``|w^H a a^T p|^2 / max``.

    Returns ``(angles, pattern)`` with ``max(pattern) == 1``.
    """
    angles = beampattern_grid() if angles is None else np.asarray(angles, dtype=float)
    p = np.asarray(p, dtype=complex)
    w_s = np.asarray(w_s, dtype=complex)
    vals = np.empty(angles.size)
    for i, th in enumerate(angles):
        a = steering_vector(th, cfg.n_antennas, cfg.antenna_spacing_ratio)
        vals[i] = abs(np.vdot(w_s, a) * (a @ p)) ** 2
    peak = vals.max()
    if not peak > 0:
        raise DegeneratePattern("beampattern vanishes on the whole angle grid")
    return angles, vals / peak


def solved_beampattern(sol: PartialSolution, ch, cfg: ScenarioConfig):
    """Pattern of a solved instance with its MVDR sensing receiver."""
    w = mvdr_receiver(sol.p, ch, cfg, sol.access)
    return beampattern(sol.p, w, ch, cfg)


def write_beampattern_csv(angles, pattern, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["angle_rad", "angle_deg", "pattern", "pattern_db"])
        for th, v in zip(angles, pattern):
            db = 10 * math.log10(v) if v > 0 else -math.inf
            w.writerow([_fmt(th), _fmt(math.degrees(th)), _fmt(v), _fmt(db)])


def write_solution_csv(sol, path) -> None:
    """One header line plus one data row summarising a single solve."""
    rec = sol.to_record()
    keys = [k for k, v in rec.items() if not isinstance(v, list)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        w.writerow([_fmt(rec[k]) if not isinstance(rec[k], str) else rec[k] for k in keys])


def parse_grid(text: str) -> tuple:
    """``start:step:stop`` inclusive of ``stop`` (within rounding); or a comma list."""
    text = text.strip()
    if "," in text or ":" not in text:
        return tuple(float(v) for v in text.split(",") if v.strip())
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidArgument(f"grid must be start:step:stop, got {text!r}")
    start, step, stop = (float(v) for v in parts)
    if step == 0 or (stop - start) / step < 0:
        raise InvalidArgument(f"grid {text!r} is empty")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(n))


def ensure_parent(path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
