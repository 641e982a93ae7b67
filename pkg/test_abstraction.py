"""Tests for disturbances, system models and the IMC abstraction."""
import numpy as np
import pytest

from verification.abstraction import (
    build_imc,
    optimal_shifts,
    reach_overapprox,
    shifted_mass,
    transition_bounds,
    update_imc,
)
from verification.disturbances import (
    DisturbanceSpec,
    Triangular,
    TruncatedGaussian,
    make_disturbance,
)
from verification.exceptions import ConfigError, ModelError
from verification.geometry import Rect, align_partition_to_labels
from verification.oracles import empirical_transitions, quadrature_mass
from verification.refinement import select_and_split
from verification.systems import LinearModel, MonotoneModel, make_model

BISTABLE_NOISE = {
    "kind": "truncated_gaussian",
    "mean": -0.3,
    "variance": 0.1,
    "low": -0.4,
    "high": -0.2,
}


def bistable(boundary_clipping=True):
    domain = [[0.0, 4.0], [0.0, 4.0]]
    return make_model(
        "bistable_switch",
        {"a": 1.3, "b": 0.25, "dt": 0.05},
        domain,
        [BISTABLE_NOISE, BISTABLE_NOISE],
        boundary_clipping,
    )


def grid(model, counts):
    return align_partition_to_labels(model.domain, [], counts)


# ── Disturbances ────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "dist",
    [
        TruncatedGaussian(mean=-0.3, variance=0.1, support_low=-0.4, support_high=-0.2),
        Triangular(centre=0.1, half_width=0.5),
    ],
)
def test_cdf_matches_quadrature(dist):
    intervals = [
        (-1.0, 1.0),
        (dist.mode - 0.05, dist.mode + 0.02),
        (dist.low, dist.mode),
    ]
    for a, b in intervals:
        expected = quadrature_mass(dist, 0, a, b, 0.0)
        assert float(dist.cdf(b) - dist.cdf(a)) == pytest.approx(expected, abs=1e-8)


def test_sampling_stays_in_support():
    dist = TruncatedGaussian(
        mean=-0.3, variance=0.1, support_low=-0.4, support_high=-0.2
    )
    samples = dist.sample(np.random.default_rng(0), 1000)
    assert samples.min() >= -0.4
    assert samples.max() <= -0.2


def test_degenerate_disturbance_is_point_mass():
    dist = Triangular(centre=0.25, half_width=0.0)
    assert dist.is_degenerate
    assert float(dist.cdf(0.25)) == 1.0
    assert float(dist.cdf(0.2)) == 0.0
    assert np.all(dist.sample(np.random.default_rng(1), 5) == 0.25)


def test_asymmetric_support_rejected():
    with pytest.raises(ModelError):
        make_disturbance(
            {
                "kind": "truncated_gaussian",
                "mean": 0.0,
                "variance": 1.0,
                "low": -1,
                "high": 2,
            }
        )


def test_unknown_disturbance_kind_rejected():
    with pytest.raises(ModelError):
        make_disturbance({"kind": "cauchy"})


# ── Models ──────────────────────────────────────────────────────────────────


def test_bistable_nominal_step():
    model = bistable()
    x = np.array([1.0, 2.0])
    expected = [1.0 + (-1.3 * 1.0 + 2.0) * 0.05, 2.0 + (0.5 - 0.25 * 2.0) * 0.05]
    assert model.nominal(x) == pytest.approx(expected)


def test_reach_overapprox_contains_images():
    model = bistable()
    rect = Rect((0.5, 1.0), (1.0, 1.5))
    reach = reach_overapprox(model, rect)
    rng = np.random.default_rng(3)
    points = rng.uniform(rect.lower, rect.upper, size=(200, 2))
    images = model.nominal(points)
    assert np.all(images >= np.array(reach.lower) - 1e-12)
    assert np.all(images <= np.array(reach.upper) + 1e-12)


def test_linear_decomposition_splits_signs():
    noise = DisturbanceSpec((Triangular(0.0, 0.1), Triangular(0.0, 0.1)))
    model = LinearModel(
        Rect((0.0, 0.0), (1.0, 1.0)), noise, A=[[0.5, -0.2], [0.1, 0.3]]
    )
    reach = reach_overapprox(model, Rect((0.0, 0.0), (1.0, 1.0)))
    assert reach.lower == pytest.approx((-0.2, 0.0))
    assert reach.upper == pytest.approx((0.5, 0.4))


def test_inconsistent_decomposition_raises():
    noise = DisturbanceSpec((Triangular(0.0, 0.1),))
    model = MonotoneModel(Rect((0.0,), (1.0,)), noise, map=lambda x: -x)
    with pytest.raises(ModelError):
        build_imc(model, grid(model, [2]))


def test_make_model_unknown_family():
    with pytest.raises(ConfigError):
        make_model(
            "chaotic",
            {},
            [[0.0, 1.0]],
            [{"kind": "triangular", "mode": 0, "half_width": 0.1}],
        )


def test_make_model_bad_parameters():
    with pytest.raises(ConfigError):
        make_model(
            "bistable_switch",
            {"gain": 2.0},
            [[0.0, 4.0], [0.0, 4.0]],
            [BISTABLE_NOISE, BISTABLE_NOISE],
        )


def test_bistable_rejects_negative_domain():
    with pytest.raises(ModelError):
        make_model(
            "bistable_switch",
            {},
            [[-1.0, 4.0], [0.0, 4.0]],
            [BISTABLE_NOISE, BISTABLE_NOISE],
        )


# ── Shifts ──────────────────────────────────────────────────────────────────


@pytest.mark.parametrize("family", ["gaussian", "triangular"])
def test_optimal_shifts_beat_grid_search(family):
    """The closed-form shifts attain the extreme masses over the reach interval."""
    rng = np.random.default_rng(11)
    for _ in range(100):
        centre = rng.uniform(-0.5, 0.5)
        half = rng.uniform(0.05, 0.5)
        if family == "gaussian":
            variance = rng.uniform(0.01, 0.5)
            dist = TruncatedGaussian(centre, variance, centre - half, centre + half)
        else:
            dist = Triangular(centre, half)
        a, b = np.sort(rng.uniform(-1.0, 1.0, size=2))
        r_lo, r_hi = np.sort(rng.uniform(-1.0, 1.0, size=2))
        s_max, s_min = optimal_shifts((a + b) / 2 - dist.mode, r_lo, r_hi)
        shifts = np.linspace(r_lo, r_hi, int((r_hi - r_lo) / 1e-3) + 2)
        masses = shifted_mass(dist, a, b, shifts)
        assert shifted_mass(dist, a, b, s_max) >= masses.max() - 1e-6
        assert shifted_mass(dist, a, b, s_min) <= masses.min() + 1e-6


def test_optimal_shifts_tie_takes_lower_endpoint():
    assert optimal_shifts(0.5, 0.0, 1.0) == (0.5, 0.0)


# ── IMC construction ────────────────────────────────────────────────────────


def test_build_imc_rows_feasible():
    model = bistable()
    imc = build_imc(model, grid(model, [4, 4]))
    assert imc.n_states == 16
    assert np.all(imc.lower.data <= imc.upper.data)
    assert np.all(np.asarray(imc.lower.sum(axis=1)) <= 1 + 1e-9)
    assert np.all(np.asarray(imc.upper.sum(axis=1)) >= 1 - 1e-9)


def test_single_cell_imc_is_trivial():
    model = bistable()
    imc = build_imc(model, grid(model, [1, 1]))
    assert imc.n_states == 1
    assert imc.lower.toarray().tolist() == [[1.0]]
    assert imc.upper.toarray().tolist() == [[1.0]]


def test_transition_bounds_match_imc_entries():
    model = bistable()
    partition = grid(model, [4, 4])
    imc = build_imc(model, partition)
    rows, cols, lo, hi = imc.triplets()
    cells = partition.cells
    for k in range(0, rows.size, max(rows.size // 10, 1)):
        j, ell = int(rows[k]), int(cols[k])
        lower, upper = transition_bounds(model, cells[j], cells[ell])
        assert lower == pytest.approx(lo[k], abs=1e-12)
        assert upper == pytest.approx(hi[k], abs=1e-12)


def test_thread_count_does_not_change_bounds():
    model = bistable()
    partition = grid(model, [12, 12])
    assert build_imc(model, partition, threads=1).same_bounds(
        build_imc(model, partition, threads=2)
    )


def test_update_matches_full_rebuild():
    model = bistable()
    partition = grid(model, [4, 4])
    imc = build_imc(model, partition)
    scores = np.zeros(partition.n_cells)
    scores[[1, 6, 11]] = 1.0
    split = select_and_split(partition, scores, theta=0.5)
    updated = update_imc(imc, model, split.partition, split.changed)
    assert updated.n_states == 19
    assert updated.same_bounds(build_imc(model, split.partition))


def test_update_without_changes_returns_same_imc():
    model = bistable()
    partition = grid(model, [2, 2])
    imc = build_imc(model, partition)
    assert update_imc(imc, model, partition, []) is imc


def test_mass_leaving_unclipped_domain_is_infeasible():
    noise = {"kind": "triangular", "mode": 0.3, "half_width": 0.1}
    model = make_model("linear", {"A": [[1.0]]}, [[0.0, 1.0]], [noise], False)
    with pytest.raises(ModelError):
        build_imc(model, grid(model, [4]))


def test_clipped_domain_keeps_rows_feasible():
    noise = {"kind": "triangular", "mode": 0.3, "half_width": 0.1}
    model = make_model("linear", {"A": [[1.0]]}, [[0.0, 1.0]], [noise], True)
    imc = build_imc(model, grid(model, [4]))
    _, lo, hi = imc.row(3)
    assert lo.tolist() == [1.0]
    assert hi.tolist() == [1.0]


@pytest.mark.slow
def test_empirical_transitions_within_bounds():
    """Monte Carlo frequencies stay inside the interval bounds (4 sigma)."""
    model = bistable()
    partition = grid(model, [8, 8])
    imc = build_imc(model, partition)
    lower, upper = imc.lower.toarray(), imc.upper.toarray()
    rng = np.random.default_rng(2024)
    n_samples = 10_000
    for _ in range(50):
        j = int(rng.integers(partition.n_cells))
        cell = partition.cells[j]
        for _ in range(20):
            x = rng.uniform(cell.lower, cell.upper)
            freq = empirical_transitions(model, partition, x, n_samples, rng)
            for ell in rng.choice(partition.n_cells, size=5, replace=False):
                lo, hi = lower[j, ell], upper[j, ell]
                sigma = np.sqrt(0.25 / n_samples)
                assert lo - 4 * sigma <= freq[ell] <= hi + 4 * sigma

