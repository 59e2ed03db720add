import math

import pytest

from oamtopo.channel import LinkConfig
from oamtopo.geometry import Family, validate
from oamtopo.metrics import total_se
from oamtopo.optimizer import (OptimizerConfig, TopologyParams, alternating_optimize, capacity,
                               generate_candidates, initial_params, optimize_radii)
from oamtopo.transceiver import TransceiverPlan

LINK = LinkConfig()


def structures(cands):
    return {c.structure for c in cands}


def test_first_round_cuca_candidates_for_16():
    cfg = OptimizerConfig(budget=16)
    got = structures(generate_candidates(Family.CUCA, initial_params(Family.CUCA, cfg), cfg, LINK, True))
    assert {(1, 16), (2, 8), (4, 4), (2, 4), (1, 8), (1, 4)} <= got
    assert all(N * K <= 16 and K % 2 == 0 and K >= 4 for N, K in got)


def test_neighbourhood_reaches_three_rings_from_two():
    cfg = OptimizerConfig(budget=16)
    cur = TopologyParams(Family.CUCA, 2, 8, (2.0, 1.0))
    assert (3, 4) in structures(generate_candidates(Family.CUCA, cur, cfg, LINK))


def test_budget_four_single_structure():
    cfg = OptimizerConfig(budget=4)
    start = initial_params(Family.CUCA, cfg)
    assert structures(generate_candidates(Family.CUCA, start, cfg, LINK, True)) == {(1, 4)}
    assert generate_candidates(Family.FUCA, initial_params(Family.FUCA, cfg), cfg, LINK, True) == []


def test_fuca_candidates_need_two_subarrays():
    cfg = OptimizerConfig(budget=32)
    got = structures(generate_candidates(Family.FUCA, initial_params(Family.FUCA, cfg), cfg, LINK, True))
    assert got and all(N >= 2 for N, _ in got)


def test_one_ring_radius_search_beats_every_grid_point():
    cfg = OptimizerConfig(budget=8, resolution=0.1)
    cand = TopologyParams(Family.CUCA, 1, 8, (2.0,))
    best, c = optimize_radii(cand, cfg, LINK)
    for i in range(1, 21):
        trial = capacity(TopologyParams(Family.CUCA, 1, 8, (0.1 * i,)), LINK, cfg)
        if trial is not None:
            assert c >= trial
    assert c == pytest.approx(capacity(best, LINK, cfg))


def test_fuca_split_search_covers_reference_radii():
    cfg = OptimizerConfig(budget=16)
    cand = TopologyParams(Family.FUCA, 4, 4, (1.2, 0.8))
    at_reference = capacity(cand, LINK, cfg)
    assert at_reference is not None and at_reference > 0
    best, c = optimize_radii(cand, cfg, LINK)
    assert c >= at_reference
    total = sum(best.radii)
    assert total == pytest.approx(2.0)


def test_single_point_grid_keeps_initial_radii():
    cfg = OptimizerConfig(budget=8, resolution=2.0)
    cand = TopologyParams(Family.CUCA, 1, 8, (2.0,))
    best, _ = optimize_radii(cand, cfg, LINK)
    assert best.radii == (2.0,)


def test_infinite_epsilon_stops_after_one_round():
    res = alternating_optimize(OptimizerConfig(budget=8, epsilon=math.inf, resolution=0.25), LINK)
    per_family = {}
    for t in res.trace:
        per_family[t.family] = per_family.get(t.family, 0) + 1
    assert all(n == 1 for n in per_family.values())
    assert set(res.stop_reasons.values()) <= {"converged", "exhausted"}


def test_budget_four_returns_uca4():
    res = alternating_optimize(OptimizerConfig(budget=4, resolution=0.1), LINK)
    assert res.params.structure == (1, 4)
    assert res.stop_reasons["FUCA"] == "exhausted"


def test_budget_eight_result_is_valid_and_monotone():
    cfg = OptimizerConfig(budget=8, resolution=0.1)
    res = alternating_optimize(cfg, LINK)
    caps = [t.capacity for t in res.trace]
    assert all(b >= a for a, b in zip(caps, caps[1:]))
    assert "max_iterations" not in res.stop_reasons.values()
    top = res.params.build(LINK.spacing, cfg.aperture)
    assert validate(top, LINK.spacing, cfg.aperture, cfg.budget).ok
    plan = TransceiverPlan.for_link(top, top, LINK)
    assert plan.total_power <= LINK.power_budget + 1e-12
    assert res.capacity == pytest.approx(total_se(top, top, LINK).total)
    assert (res.rx_positions[:, :2] == res.tx_positions[:, :2]).all()
    doc = res.to_dict()
    assert {"family", "N", "K", "radii", "capacity_bps", "trace", "positions"} <= set(doc)


def test_tie_break_prefers_fewer_rings():
    from oamtopo.optimizer import _rank_key
    a = (TopologyParams(Family.CUCA, 2, 4, (2.0, 1.0)), 5.0)
    b = (TopologyParams(Family.CUCA, 1, 8, (2.0,)), 5.0)
    c = (TopologyParams(Family.CUCA, 1, 4, (2.0,)), 5.0)
    assert min([a, b, c], key=_rank_key)[0].structure == (1, 8)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(epsilon=0)
    with pytest.raises(ValueError):
        OptimizerConfig(resolution=-1)
