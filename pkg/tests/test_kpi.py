import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbirl.kpi import (KpiConfig, pearson, rank_demos, rank_reward, rank_rewards,
                       t_cc, t_min, t_std, trajectory_return)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_t_min_examples():
    assert t_min([2.0, 3.0, 1.5, 4.0]) == 1.5
    assert t_min([7.0, 7.0, 7.0, 7.0]) == 7.0


def test_t_std_examples():
    assert t_std([2, 2, 2, 2]) == 0.0
    assert t_std([1, 1, 3, 3]) == pytest.approx(1.0, abs=1e-12)
    x = [0.5, 1.25, 2.0, 9.0]
    assert t_std(np.array(x) + 4.2) == pytest.approx(t_std(x), abs=1e-9)


def test_t_cc_examples():
    assert t_cc([0.5, 2.0, 0.9, 3.0], 1.0) == 2
    assert t_cc([1.0, 1.0, 1.0, 1.0], 1.0) == 0  # boundary is strict
    assert t_cc([2.0, 3.0], 1.0) == 0
    with pytest.raises(ValueError):
        t_cc([1.0], 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=2, max_size=8), st.randoms())
def test_kpis_permutation_invariant(xs, rnd):
    perm = list(xs)
    rnd.shuffle(perm)
    assert t_min(perm) == t_min(sorted(xs))
    assert t_std(perm) == pytest.approx(t_std(xs), rel=1e-9, abs=1e-9)
    assert t_cc(perm, 1.0) == t_cc(xs, 1.0)


def _state(ip):
    return np.array([1.0] * 4 + list(ip) + [0.5] * 4)


def test_rank_reward_hand_evaluated():
    cfg = KpiConfig(congestion_threshold_mbps=1.0, alpha=1.0, beta=0.5, gamma=1.0)
    assert rank_reward(_state([2, 2, 2, 2]), cfg) == pytest.approx(2.0, abs=1e-12)
    # one congested cell lowers the reward through every term
    busy = rank_reward(_state([2, 2, 2, 0.5]), cfg)
    assert busy < 2.0
    zero = KpiConfig(alpha=0.0, beta=0.0, gamma=0.0)
    assert rank_reward(_state([3, 1, 4, 1]), zero) == 0.0


def test_rank_rewards_matches_scalar(kpi_cfg):
    rng = np.random.default_rng(3)
    states = rng.uniform(0, 5, size=(40, 12))
    vec = rank_rewards(states, kpi_cfg)
    for i in range(40):
        assert vec[i] == pytest.approx(rank_reward(states[i], kpi_cfg), abs=1e-12)


def test_trajectory_return_additivity(kpi_cfg):
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 5, size=(10, 12))
    b = rng.uniform(0, 5, size=(7, 12))
    both = np.concatenate([a, b])
    assert trajectory_return(both, kpi_cfg) == pytest.approx(
        trajectory_return(a, kpi_cfg) + trajectory_return(b, kpi_cfg), abs=1e-9)
    one = a[:1]
    assert trajectory_return(one, kpi_cfg) == pytest.approx(
        rank_reward(a[0], kpi_cfg), abs=1e-12)
    rep = np.repeat(a[:1], 168, axis=0)
    assert trajectory_return(rep, kpi_cfg) == pytest.approx(
        168 * rank_reward(a[0], kpi_cfg), abs=1e-9)


class _FakeTraj:
    def __init__(self, states):
        self.states = np.asarray(states)


def _traj_with_return(r):
    # single state with throughput row summing to the desired reward
    return _FakeTraj(_state([r, r, r, r]))


def test_rank_demos_order_and_ties(kpi_cfg):
    trajs = [_traj_with_return(5), _traj_with_return(2), _traj_with_return(9)]
    ranked, ties = rank_demos(trajs, kpi_cfg)
    assert [t is x for t, x in zip(ranked, [trajs[1], trajs[0], trajs[2]])] == [True] * 3
    assert not ties

    same = [_traj_with_return(3), _traj_with_return(3), _traj_with_return(3)]
    ranked, ties = rank_demos(same, kpi_cfg)
    assert ties
    assert all(r is s for r, s in zip(ranked, same))  # insertion order kept

    with pytest.raises(ValueError):
        rank_demos(same[:1], kpi_cfg)


def test_rank_demos_sorted_property(kpi_cfg):
    rng = np.random.default_rng(7)
    trajs = [_FakeTraj(rng.uniform(0, 5, size=(12, 12))) for _ in range(100)]
    ranked, _ = rank_demos(trajs, kpi_cfg)
    rets = [trajectory_return(t, kpi_cfg) for t in ranked]
    assert all(rets[i] <= rets[i + 1] for i in range(len(rets) - 1))
    assert {id(t) for t in ranked} == {id(t) for t in trajs}


def test_pearson_exact_cases():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_undefined_for_constants():
    assert math.isnan(pearson([1, 1, 1], [1, 2, 3]))
    assert math.isnan(pearson([4, 5, 6], [2, 2, 2]))
    with pytest.raises(ValueError):
        pearson([1], [2])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=2, max_size=30))
def test_pearson_bounded_and_affine(xs):
    a = np.asarray(xs)
    b = np.arange(len(a), dtype=float)
    r = pearson(a, b)
    if not math.isnan(r):
        assert -1.0 <= r <= 1.0
    if a.std() > 1e-9:
        assert pearson(a, 2.5 * a + 3.0) == pytest.approx(1.0, abs=1e-9)
        assert pearson(a, -0.5 * a + 1.0) == pytest.approx(-1.0, abs=1e-9)
