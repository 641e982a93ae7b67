"""
Ground-truth checks: the engine against brute-force vertex chains, plus the
simulation and quadrature helpers.
"""
import numpy as np
import pytest
from conftest import build_imc, build_product, random_lattice_rows, random_pair
from scipy import sparse

from verification.disturbances import Triangular
from verification.exceptions import OracleError
from verification.geometry import Rect, align_partition_to_labels
from verification.oracles import (
    MAX_STATES,
    enumerate_vertex_mcs,
    locate,
    mc_acceptance,
    mc_exact_reach,
    quadrature_mass,
    simulate,
    vertex_bounds,
    vertex_components,
    vertex_rows,
)
from verification.reachability import InducedMC, extremal_product_mcs
from verification.systems import make_model
from verification import verifier
from verification.verifier import analyse_product

OK_BOUNDS = 1e-6
COMPONENT_MASKS = ("wc_largest", "wc_permanent", "lc_largest", "lc_permanent")


def random_product(rng, n, point_valued=False):
    edges = random_lattice_rows(rng, n, point_valued=point_valued)
    return build_product(n, edges, [random_pair(rng, n)])


def random_products(seed, n_instances, n_pairs=1):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        n = int(rng.integers(2, 5))
        edges = random_lattice_rows(rng, n)
        yield build_product(n, edges, [random_pair(rng, n) for _ in range(n_pairs)])


def random_automaton_products(seed, n_instances, dra):
    """Products of one- or two-cell IMCs with `dra`, kept small enough to enumerate."""
    rng = np.random.default_rng(seed)
    produced = 0
    while produced < n_instances:
        n = int(rng.integers(1, 3))
        props = [{"A"} if rng.random() < 0.5 else set() for _ in range(n)]
        imc = build_imc(n, random_lattice_rows(rng, n), props)
        product = verifier.build_product(imc, dra)
        if product.reachable_from_initial().sum() > MAX_STATES:
            continue
        produced += 1
        yield product


def engine_bounds(product, tol=1e-9):
    """(p_min, p_max) from every product state, plus the component sets."""
    pruned, graph, components = analyse_product(product)
    upper, lower = extremal_product_mcs(pruned, components, tol, 100_000, graph)
    initial = pruned.initial
    return 1.0 - lower.value.values[initial], upper.value.values[initial], components


def chain(dense):
    return InducedMC(sparse.csr_matrix(np.asarray(dense, dtype=float)))


def line_model(A, offset, noise_mode, half_width=0.0):
    noise = {"kind": "triangular", "mode": noise_mode, "half_width": half_width}
    return make_model("linear", {"A": [[A]], "offset": [offset]}, [[0.0, 1.0]], [noise])


# ── Vertex enumeration ──────────────────────────────────────────────────────


def test_vertex_rows_of_free_row():
    rows = vertex_rows([0.0, 0.0], [1.0, 1.0])
    assert [r.tolist() for r in rows] == [[0.0, 1.0], [1.0, 0.0]]


def test_vertex_rows_of_point_row():
    rows = vertex_rows([0.25, 0.75], [0.25, 0.75])
    assert [r.tolist() for r in rows] == [[0.25, 0.75]]


def test_vertex_rows_are_feasible_extreme_points():
    lower, upper = np.array([0.25, 0.25, 0.0]), np.array([0.5, 0.5, 0.5])
    rows = vertex_rows(lower, upper)
    assert len(rows) == 4
    for row in rows:
        assert row.sum() == pytest.approx(1.0)
        assert np.all((lower <= row) & (row <= upper))


def test_vertex_rows_of_half_capped_row():
    """Mass 1 over four entries capped at 1/2: any two entries take 1/2."""
    rows = vertex_rows(np.zeros(4), np.full(4, 0.5))
    assert len(rows) == 6
    assert all(sorted(r.tolist()) == [0.0, 0.0, 0.5, 0.5] for r in rows)


def test_vertex_rows_of_infeasible_row_is_empty():
    assert vertex_rows([0.0, 0.0], [0.25, 0.5]) == []


def test_enumeration_rejects_large_products(make_product):
    product = make_product(7, {(q, q): (1.0, 1.0) for q in range(7)}, [(set(), {0})])
    with pytest.raises(OracleError):
        list(enumerate_vertex_mcs(product))


def test_enumeration_rejects_off_lattice_bounds(make_product):
    edges = {(0, 0): (0.3, 0.7), (0, 1): (0.3, 0.7), (1, 1): (1.0, 1.0)}
    product = make_product(2, edges, [(set(), {0})])
    with pytest.raises(OracleError):
        list(enumerate_vertex_mcs(product))


def test_enumeration_respects_chain_limit(loop_product):
    with pytest.raises(OracleError):
        list(enumerate_vertex_mcs(loop_product, max_mcs=1))


# ── Exact chain solves ──────────────────────────────────────────────────────


def test_exact_reach_with_self_loop():
    mc = chain([[0.5, 0.25, 0.25], [0, 1, 0], [0, 0, 1]])
    assert mc_exact_reach(mc, [1]) == pytest.approx([0.5, 1.0, 0.0])


def test_acceptance_of_two_sink_chain(make_product):
    product = make_product(
        3,
        {(0, 1): (0.25, 0.75), (0, 2): (0.25, 0.75), (1, 1): (1, 1), (2, 2): (1, 1)},
        [(set(), {1})],
    )
    win, lose = mc_acceptance(chain([[0, 0.75, 0.25], [0, 1, 0], [0, 0, 1]]), product)
    assert win == pytest.approx([0.75, 1.0, 0.0])
    assert lose == pytest.approx([0.25, 0.0, 1.0])


def test_vertex_bounds_of_fork(make_product):
    product = make_product(
        3,
        {(0, 1): (0.25, 0.75), (0, 2): (0.25, 0.75), (1, 1): (1, 1), (2, 2): (1, 1)},
        [(set(), {1})],
    )
    p_min, p_max = vertex_bounds(product)
    assert p_min == pytest.approx([0.25, 1.0, 0.0])
    assert p_max == pytest.approx([0.75, 1.0, 0.0])


# ── Engine against vertex chains ────────────────────────────────────────────


def check_against_vertex_chains(products):
    """Bounds and component masks equal the extremes over vertex chains."""
    for product in products:
        pruned, _, components = analyse_product(product)
        p_min, p_max, _ = engine_bounds(product)
        o_min, o_max = vertex_bounds(pruned)
        assert p_min == pytest.approx(o_min, abs=OK_BOUNDS)
        assert p_max == pytest.approx(o_max, abs=OK_BOUNDS)

        oracle = vertex_components(pruned)
        for name in COMPONENT_MASKS:
            assert getattr(components, name).tolist() == oracle[name].tolist(), name


def test_bounds_match_vertex_chains():
    check_against_vertex_chains(random_products(seed=1, n_instances=5))


def test_bounds_match_vertex_chains_with_two_pairs():
    check_against_vertex_chains(random_products(seed=5, n_instances=5, n_pairs=2))


@pytest.mark.parametrize("automaton", ["phi1_dra", "eventually_always_dra"])
def test_bounds_match_vertex_chains_on_automaton_products(request, automaton):
    dra = request.getfixturevalue(automaton)
    check_against_vertex_chains(random_automaton_products(6, 10, dra))


@pytest.mark.slow
def test_bounds_match_vertex_chains_sweep(phi1_dra, eventually_always_dra):
    check_against_vertex_chains(random_products(seed=2, n_instances=200))
    check_against_vertex_chains(random_products(seed=7, n_instances=300, n_pairs=2))
    for seed, dra in ((8, phi1_dra), (9, eventually_always_dra)):
        check_against_vertex_chains(random_automaton_products(seed, 100, dra))


def test_point_valued_bounds_are_exact():
    """With a single induced chain both bounds equal its acceptance probability."""
    rng = np.random.default_rng(3)
    for _ in range(50):
        product = random_product(rng, int(rng.integers(2, 6)), point_valued=True)
        p_min, p_max, _ = engine_bounds(product, tol=1e-12)
        (mc,) = list(enumerate_vertex_mcs(product))
        win, _ = mc_acceptance(mc, product)
        assert p_min == pytest.approx(win, abs=1e-9)
        assert p_max == pytest.approx(win, abs=1e-9)


def test_vertex_chains_end_in_some_bscc():
    rng = np.random.default_rng(4)
    for _ in range(5):
        product = random_product(rng, 4)
        for mc in enumerate_vertex_mcs(product):
            win, lose = mc_acceptance(mc, product)
            assert win + lose == pytest.approx(np.ones(product.n_states), abs=1e-9)


# ── Simulation ──────────────────────────────────────────────────────────────


def test_simulation_is_reproducible():
    model = line_model(0.5, 0.25, 0.0, half_width=0.1)
    first = simulate(model, [0.9], 10, rng_seed=3, n_traj=4)
    assert first.shape == (4, 11, 1)
    assert np.array_equal(first, simulate(model, [0.9], 10, rng_seed=3, n_traj=4))
    assert not np.array_equal(first, simulate(model, [0.9], 10, rng_seed=4, n_traj=4))


def test_noise_free_simulation_follows_nominal_map():
    model = line_model(0.5, 0.25, 0.0)
    states = simulate(model, [0.9], 2)
    assert states[0, :, 0] == pytest.approx([0.9, 0.7, 0.6])


def test_simulation_sticks_to_clipped_boundary():
    model = line_model(1.0, 0.0, 0.3)
    states = simulate(model, [0.5], 3)
    assert states[0, :, 0] == pytest.approx([0.5, 0.8, 1.0, 1.0])


def test_simulation_rejects_start_outside_domain():
    with pytest.raises(OracleError):
        simulate(line_model(0.5, 0.25, 0.0), [1.5], 3)


def test_locate_uses_half_open_cells():
    partition = align_partition_to_labels(Rect((0.0,), (1.0,)), [], [4])
    found = locate(partition, [[0.0], [0.25], [0.99], [1.0], [1.5]])
    assert found.tolist() == [0, 1, 3, 3, -1]


# ── Quadrature ──────────────────────────────────────────────────────────────


def test_quadrature_of_full_support():
    mass = quadrature_mass(Triangular(0.0, 0.5), 0, -1.0, 1.0, 0.0)
    assert mass == pytest.approx(1.0)


def test_quadrature_of_shifted_half():
    assert quadrature_mass(Triangular(0.0, 0.5), 0, 0.2, 1.0, 0.2) == pytest.approx(0.5)


def test_quadrature_of_point_mass():
    dist = Triangular(0.25, 0.0)
    assert quadrature_mass(dist, 0, 0.0, 0.5, 0.0) == 1.0
    assert quadrature_mass(dist, 0, 0.3, 0.5, 0.0) == 0.0
