"""Tests for SCC decomposition and BSCC / component analysis."""
import numpy as np
import pytest

from verification.components import (
    ProductGraph,
    at_permanent,
    at_question,
    can_confine,
    find_bsccs,
    find_components,
    tarjan_scc,
)


def as_sets(arrays):
    return [set(a.tolist()) for a in arrays]


def mask_set(mask):
    return set(np.flatnonzero(mask).tolist())


# ── Tarjan ──────────────────────────────────────────────────────────────────


def test_tarjan_emits_sinks_first():
    # 0 ⇄ 1 → 2 ↺
    indptr = np.array([0, 1, 3, 4])
    indices = np.array([1, 0, 2, 2])
    assert as_sets(tarjan_scc(indptr, indices)) == [{2}, {0, 1}]


def test_tarjan_respects_node_mask():
    indptr = np.array([0, 1, 3, 4])
    indices = np.array([1, 0, 2, 2])
    nodes = np.array([True, False, True])
    assert as_sets(tarjan_scc(indptr, indices, nodes)) == [{0}, {2}]


def test_tarjan_long_chain_is_iterative():
    n = 5000
    indptr = np.arange(n + 1)
    indices = np.minimum(np.arange(n) + 1, n - 1)
    components = tarjan_scc(indptr, indices)
    assert len(components) == n
    assert components[0].tolist() == [n - 1]


# ── Reachability fixpoints ──────────────────────────────────────────────────


def test_can_confine(loop_product):
    assert can_confine(loop_product, 1, {0, 1})
    assert not can_confine(loop_product, 0, {0})


def test_at_question_forced_reach(loop_product):
    # Q1 may keep all its mass on Q0, so only Q2 itself surely reaches Q2
    assert at_question(loop_product, {2}, {0, 1, 2}) == {2}
    assert at_question(loop_product, {1}, {0, 1, 2}) == {0, 1}


def test_at_permanent_possible_reach(loop_product):
    assert at_permanent(loop_product, {2}, {0, 1, 2}) == {0, 1, 2}
    assert at_permanent(loop_product, {2}, {0, 2}) == {2}


def test_optional_exit_does_not_force_reach(make_product):
    product = make_product(
        2, {(0, 0): (0.5, 1.0), (0, 1): (0.0, 0.5), (1, 1): (1.0, 1.0)}, [(set(), {1})]
    )
    graph = ProductGraph(product)
    assert mask_set(graph.at_question(graph.mask([1]), graph.mask([0, 1]))) == {1}


# ── BSCC candidates ─────────────────────────────────────────────────────────


def test_drifting_loop_potential_bsccs(loop_product):
    """Both induced behaviours show up as potential, never permanent, BSCCs."""
    sets = find_bsccs(loop_product)
    assert as_sets(sets.acc_potential) == [{0, 1}]
    nonacc = {frozenset(s) for s in as_sets(sets.nonacc_potential)}
    assert nonacc == {frozenset({2}), frozenset({0, 1, 2})}
    assert sets.acc_permanent == []
    assert sets.nonacc_permanent == []


def test_absorbing_accepting_state_is_permanent(make_product):
    product = make_product(2, {(0, 1): (1.0, 1.0), (1, 1): (1.0, 1.0)}, [(set(), {1})])
    sets = find_bsccs(product)
    assert as_sets(sets.acc_permanent) == [{1}]
    assert sets.acc_potential == []
    assert sets.nonacc_potential == [] and sets.nonacc_permanent == []


def test_rejecting_loop_through_fin_state(make_product):
    edges = {(0, 1): (1.0, 1.0), (1, 0): (1.0, 1.0)}
    product = make_product(2, edges, [({1}, {0})])
    sets = find_bsccs(product)
    assert as_sets(sets.nonacc_permanent) == [{0, 1}]
    assert sets.acc_potential == [] and sets.acc_permanent == []


def test_self_loop_with_optional_exit_is_potential(make_product):
    edges = {(0, 0): (0.0, 1.0), (0, 1): (0.0, 1.0), (1, 1): (1.0, 1.0)}
    product = make_product(2, edges, [(set(), {0})])
    sets = find_bsccs(product)
    assert as_sets(sets.acc_potential) == [{0}]
    assert as_sets(sets.nonacc_permanent) == [{1}]


def test_candidates_are_not_duplicated(loop_product):
    sets = find_bsccs(loop_product)
    for group in sets:
        keys = [frozenset(s.tolist()) for s in group]
        assert len(keys) == len(set(keys))


# ── Components ──────────────────────────────────────────────────────────────


def test_drifting_loop_components_are_potential_only(loop_product):
    components = find_components(loop_product, find_bsccs(loop_product))
    assert mask_set(components.wc_largest) == {0, 1, 2}
    assert not components.wc_permanent.any()
    assert not components.lc_permanent.any()
    assert mask_set(components.potential) == {0, 1, 2}


def test_permanent_winning_component(make_product):
    product = make_product(2, {(0, 1): (1.0, 1.0), (1, 1): (1.0, 1.0)}, [(set(), {1})])
    components = find_components(product, find_bsccs(product))
    assert mask_set(components.wc_permanent) == {0, 1}
    assert not components.wc_potential.any()
    assert not components.lc_largest.any()


def test_split_between_two_sinks(make_product):
    """State 0 always ends in a sink; which one is up to the adversary."""
    edges = {
        (0, 1): (0.25, 0.75),
        (0, 2): (0.25, 0.75),
        (1, 1): (1.0, 1.0),
        (2, 2): (1.0, 1.0),
    }
    product = make_product(3, edges, [(set(), {1})])
    components = find_components(product, find_bsccs(product))
    assert mask_set(components.wc_permanent) == {1}
    assert mask_set(components.lc_permanent) == {2}
    assert not components.wc_largest[0]
    assert not components.lc_largest[0]


def test_mass_split_across_same_status_bsccs(make_product):
    """Union pass: state 0 wins surely although no single BSCC is reached surely."""
    edges = {
        (0, 1): (0.25, 0.75),
        (0, 2): (0.25, 0.75),
        (1, 1): (1.0, 1.0),
        (2, 2): (1.0, 1.0),
    }
    product = make_product(3, edges, [(set(), {1, 2})])
    components = find_components(product, find_bsccs(product))
    assert mask_set(components.wc_permanent) == {0, 1, 2}


def test_owners_point_to_potential_bsccs(loop_product):
    components = find_components(loop_product, find_bsccs(loop_product))
    n_potential = len(components.potential_bsccs)
    for q in np.flatnonzero(components.potential).tolist():
        owners = components.owners[q]
        assert owners
        assert all(0 <= b < n_potential for b in owners)


@pytest.mark.parametrize("n", [1, 3])
def test_single_absorbing_chain_has_no_potential_states(make_product, n):
    edges = {(q, q): (1.0, 1.0) for q in range(n)}
    product = make_product(n, edges, [(set(), set(range(n)))])
    components = find_components(product, find_bsccs(product))
    assert not components.potential.any()
    assert components.wc_permanent.all()
