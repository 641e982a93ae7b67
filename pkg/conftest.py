"""
pytest configuration for imcverify.

Shared fixtures: hand-built product IMCs, the checked-in automata and small
run-configs written to a temporary directory.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from verification.chains import IMC, ProductIMC, aligned_bounds
from verification.hoa import load_dra

CONFIGS = Path(__file__).resolve().parent / "configs"
AUTOMATA = CONFIGS / "automata"


def build_product(n, edges, pairs, initial=None):
    """
    Product with one automaton state per IMC state.

    `edges` maps (source, target) to (lower, upper); `pairs` lists
    (E, F) state sets of the Rabin pairs.
    """
    rows, cols, lo, hi = zip(*[(r, c, a, b) for (r, c), (a, b) in edges.items()])
    lower, upper = aligned_bounds(n, rows, cols, lo, hi)
    in_fin = np.zeros((n, len(pairs)), dtype=bool)
    in_inf = np.zeros((n, len(pairs)), dtype=bool)
    for i, (fin, inf) in enumerate(pairs):
        in_fin[sorted(fin), i] = True
        in_inf[sorted(inf), i] = True
    return ProductIMC(
        lower=lower,
        upper=upper,
        pairs=np.column_stack([np.arange(n), np.zeros(n, dtype=np.int64)]),
        in_fin=in_fin,
        in_inf=in_inf,
        initial=(
            np.arange(n, dtype=np.int64) if initial is None else np.asarray(initial)
        ),
        n_cells=n,
        n_automaton_states=1,
        cell_props=tuple(frozenset() for _ in range(n)),
    )


def build_imc(n, edges, props):
    rows, cols, lo, hi = zip(*[(r, c, a, b) for (r, c), (a, b) in edges.items()])
    return IMC.from_triplets(n, rows, cols, lo, hi, [frozenset(p) for p in props])


def random_lattice_rows(rng, n, lattice=4, max_successors=3, point_valued=False):
    """
    Random feasible rows on the 1/`lattice` grid.

    Each row spreads `lattice` quanta over 1..`max_successors` successors and
    widens the result into an interval (unless `point_valued`).
    """
    edges = {}
    for r in range(n):
        k = int(rng.integers(1, min(max_successors, n) + 1))
        succ = rng.choice(n, size=k, replace=False)
        quanta = np.bincount(rng.integers(0, k, size=lattice), minlength=k)
        for c, m in zip(succ.tolist(), quanta.tolist()):
            p = m / lattice
            if point_valued:
                lo = hi = p
            else:
                lo = max(p - rng.integers(0, 2) / lattice, 0.0)
                hi = min(p + rng.integers(0, 3) / lattice, 1.0)
            if hi > 0:
                edges[(r, c)] = (lo, hi)
    return edges


def random_pair(rng, n):
    states = rng.permutation(n)
    cut = int(rng.integers(0, n))
    fin = set(states[:cut][: int(rng.integers(0, cut + 1))].tolist())
    inf = set(states[cut:].tolist())
    return fin, inf


# ── Fixtures ────────────────────────────────────────────────────────────────


@pytest.fixture
def make_product():
    return build_product


@pytest.fixture
def make_imc():
    return build_imc


@pytest.fixture
def loop_product():
    """
    Q0 → Q1 surely; Q1 returns to Q0 or drifts to Q2; Q2 may loop or return.

    One induced chain has BSCCs {Q0, Q1} (accepting) and {Q2} (rejecting);
    another merges all three into a single rejecting BSCC.
    """
    edges = {
        (0, 1): (1.0, 1.0),
        (1, 0): (0.5, 1.0),
        (1, 2): (0.0, 0.5),
        (2, 2): (0.0, 1.0),
        (2, 0): (0.0, 1.0),
    }
    return build_product(3, edges, [({2}, {0})])


@pytest.fixture
def three_cell_imc():
    """Cell 0 (A) and cell 1 absorb; cell 2 (A) splits between them."""
    edges = {
        (0, 0): (1.0, 1.0),
        (1, 1): (1.0, 1.0),
        (2, 0): (0.2, 0.5),
        (2, 1): (0.5, 0.8),
    }
    return build_imc(3, edges, [{"A"}, set(), {"A"}])


@pytest.fixture
def phi1_dra():
    return load_dra(AUTOMATA / "phi1.hoa")


@pytest.fixture
def eventually_always_dra():
    return load_dra(AUTOMATA / "eventually_always.hoa")


@pytest.fixture
def accept_all_dra():
    return load_dra(AUTOMATA / "accept_all.hoa")


@pytest.fixture
def linear_config(tmp_path):
    """A 1-D contraction on [0, 1] checked against the accept-all automaton."""

    def write(**blocks):
        doc = {
            "model": {
                "family": "linear",
                "parameters": {"A": [[0.5]], "offset": [0.25]},
                "domain": [[0.0, 1.0]],
                "disturbance": [{"kind": "triangular", "mode": 0.0, "half_width": 0.1}],
            },
            "labels": [{"lower": [0.0], "upper": [0.5], "props": ["A"]}],
            "partition": {"grid": [4]},
            "spec": {
                "dra": str(AUTOMATA / "accept_all.hoa"),
                "comparison": ">=",
                "p_sat": 0.5,
            },
            "refinement": {"v_stop": 0.0, "max_rounds": 2, "max_cells": 100},
            "output": {"out_dir": "out", "plot": True},
            "simulate": {"x0": [0.9], "horizon": 5, "n_traj": 2},
        }
        for name, block in blocks.items():
            if block is None:
                doc.pop(name, None)
            elif isinstance(block, dict) and isinstance(doc.get(name), dict):
                doc[name] = {**doc[name], **block}
            else:
                doc[name] = block
        path = tmp_path / "run.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return write
