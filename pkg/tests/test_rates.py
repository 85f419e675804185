import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcsmc.errors import DegenerateSensing, InvalidArgument
from jcsmc.rates import (DecodingOrder, downlink_rate, interferers, mvdr_receiver, sdma_sensing_sinr,
                         sdma_uplink_rate, sensing_sinr, sensing_sinr_ratio, uplink_rate, uplink_rates)
from jcsmc.scenario import ScenarioConfig, sample_channels


def _beam(seed, cfg, power=0.5):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas)
    return math.sqrt(power) * p / np.linalg.norm(p)


def test_decoding_order_round_trip():
    o = DecodingOrder.from_sequence([2, 0, 1])
    assert o.sequence == (2, 0, 1)
    assert o.positions == (1, 2, 0)
    with pytest.raises(InvalidArgument):
        DecodingOrder((0, 0, 1))


def test_interferers_follow_order():
    o = DecodingOrder.from_sequence([2, 0, 1])
    assert sorted(interferers(2, o, 3)) == [0, 1]
    assert interferers(1, o, 3) == []
    assert sorted(interferers(1, o, 3, "sdma")) == [0, 2]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), draw=st.integers(0, 50))
def test_sum_rate_order_invariant(seed, draw):
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, draw)
    p = _beam(seed, cfg)
    sums = [uplink_rates(DecodingOrder.from_sequence(s), p, ch, cfg).sum()
            for s in itertools.permutations(range(3))]
    assert max(sums) - min(sums) <= 1e-9 * max(sums)


def test_last_decoded_user_closed_form():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 1)
    p = _beam(1, cfg)
    o = DecodingOrder.identity(3)
    k = o.sequence[-1]
    g = ch.sensing_matrix @ p
    R = np.outer(g, g.conj()) + cfg.noise_power_bs * np.eye(8)
    h = ch.uplink_channels[k]
    expect = math.log2(1 + cfg.user_tx_power * np.real(np.vdot(h, np.linalg.solve(R, h))))
    assert uplink_rate(k, o, p, ch, cfg) == pytest.approx(expect, rel=1e-10)


def test_sdma_rate_not_above_best_noma_position():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 2)
    p = _beam(2, cfg)
    for k in range(3):
        last = DecodingOrder.from_sequence([j for j in range(3) if j != k] + [k])
        assert sdma_uplink_rate(k, p, ch, cfg) <= uplink_rate(k, last, p, ch, cfg) + 1e-12


def test_downlink_rate_closed_form():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 0)
    hd = ch.bs_cs_channel
    p = hd / np.linalg.norm(hd)
    expect = math.log2(1 + np.linalg.norm(hd) ** 2 / cfg.noise_power_cs)
    assert downlink_rate(p, ch, cfg) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_mvdr_is_distortionless_and_optimal(seed):
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, seed % 20)
    p = _beam(seed, cfg)
    w = mvdr_receiver(p, ch, cfg)
    assert abs(np.vdot(w, ch.target_matrix @ p) - 1) < 1e-9
    best = sensing_sinr(p, ch, cfg)
    assert sensing_sinr_ratio(w, p, ch, cfg) == pytest.approx(best, rel=1e-9)
    rng = np.random.default_rng(seed)
    other = w + 0.1 * np.linalg.norm(w) * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
    assert sensing_sinr_ratio(other, p, ch, cfg) <= best * (1 + 1e-12)


def test_sdma_sensing_below_noma():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 3)
    p = _beam(3, cfg, 1.0)
    assert sdma_sensing_sinr(p, ch, cfg) < sensing_sinr(p, ch, cfg)


def test_single_user_sdma_equals_noma():
    cfg = ScenarioConfig().replace(n_users=1)
    ch = sample_channels(cfg, 0)
    p = _beam(0, cfg)
    o = DecodingOrder.identity(1)
    assert uplink_rate(0, o, p, ch, cfg) == pytest.approx(sdma_uplink_rate(0, p, ch, cfg), rel=1e-12)


def test_zero_beam_is_degenerate():
    cfg = ScenarioConfig()
    ch = sample_channels(cfg, 0)
    with pytest.raises(DegenerateSensing):
        mvdr_receiver(np.zeros(8, dtype=complex), ch, cfg)
