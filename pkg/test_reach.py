"""Tests for the greedy row allocation and interval value iteration."""
import numpy as np
import pytest

from verification.components import find_bsccs, find_components
from verification.exceptions import ConvergenceError
from verification.reachability import extremal_product_mcs, greedy_allocation, max_reach

# ── Greedy allocation ───────────────────────────────────────────────────────


def test_greedy_serves_highest_value_first():
    p = greedy_allocation([0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.0, 1.0, 0.5])
    assert p == pytest.approx([0.1, 0.5, 0.4])
    assert p.sum() == pytest.approx(1.0)


def test_greedy_saturated_successor_gets_exact_upper_bound():
    p = greedy_allocation([0.0, 0.0], [0.25, 1.0], [1.0, 0.0])
    assert p[0] == 0.25
    assert p[1] == pytest.approx(0.75)


def test_greedy_tie_rank_breaks_equal_values():
    assert greedy_allocation([0, 0], [1, 1], [1, 1], tie_rank=[1, 0]).tolist() == [0, 1]
    assert greedy_allocation([0, 0], [1, 1], [1, 1]).tolist() == [1, 0]


def test_greedy_point_valued_row_is_unchanged():
    p = greedy_allocation([0.25, 0.75], [0.25, 0.75], [0.0, 1.0])
    assert p.tolist() == [0.25, 0.75]


# ── Maximal reachability ────────────────────────────────────────────────────


@pytest.fixture
def fork_product(make_product):
    """State 0 forks into two absorbing states."""
    edges = {
        (0, 1): (0.2, 0.6),
        (0, 2): (0.4, 0.8),
        (1, 1): (1.0, 1.0),
        (2, 2): (1.0, 1.0),
    }
    return make_product(3, edges, [(set(), {1})])


@pytest.fixture
def lazy_product(make_product):
    """State 0 lingers half the time, then splits evenly."""
    edges = {
        (0, 0): (0.5, 0.5),
        (0, 1): (0.25, 0.25),
        (0, 2): (0.25, 0.25),
        (1, 1): (1.0, 1.0),
        (2, 2): (1.0, 1.0),
    }
    return make_product(3, edges, [(set(), {1})])


@pytest.mark.parametrize("target, expected", [({1}, 0.6), ({2}, 0.8)])
def test_max_reach_fork(fork_product, target, expected):
    value, mc = max_reach(fork_product, target)
    assert value.values[0] == pytest.approx(expected)
    assert mc.max_row_error() < 1e-12


def test_max_reach_keeps_target_and_unreachable_values(fork_product):
    value, _ = max_reach(fork_product, {1})
    assert value.values[1] == 1.0
    assert value.values[2] == 0.0


def test_max_reach_iterates_inside_cycles(lazy_product):
    value, _ = max_reach(lazy_product, {1})
    assert value.values[0] == pytest.approx(0.5, abs=1e-8)
    assert value.iterations > 1


def test_max_reach_raises_when_sweeps_run_out(lazy_product):
    with pytest.raises(ConvergenceError) as info:
        max_reach(lazy_product, {1}, max_iters=1)
    assert info.value.iterations == 1


def test_induced_chain_prefers_target_on_equal_values(make_product):
    """A self-loop worth as much as the target must not absorb the mass."""
    edges = {(0, 0): (0.0, 1.0), (0, 1): (0.0, 1.0), (1, 1): (1.0, 1.0)}
    product = make_product(2, edges, [(set(), {1})])
    value, mc = max_reach(product, {1})
    assert value.values[0] == 1.0
    succ, probs = mc.successors(0)
    assert succ.tolist() == [1]
    assert probs.tolist() == [1.0]


def test_extremal_chains_bound_fork(fork_product):
    components = find_components(fork_product, find_bsccs(fork_product))
    upper, lower = extremal_product_mcs(fork_product, components)
    assert upper.value.values[0] == pytest.approx(0.6)
    assert 1.0 - lower.value.values[0] == pytest.approx(0.2)
    for chain in (upper, lower):
        assert chain.mc.max_row_error() < 1e-12


def test_extremal_chains_on_drifting_loop(loop_product):
    """Every state may win or lose, so both bounds span [0, 1]."""
    components = find_components(loop_product, find_bsccs(loop_product))
    upper, lower = extremal_product_mcs(loop_product, components)
    assert np.allclose(upper.value.values, 1.0)
    assert np.allclose(lower.value.values, 1.0)
