"""Tests for automaton parsing, formatting and stepping."""
import numpy as np
import pytest

from verification.automata import DRA, Edge, Guard, RabinPair, step
from verification.exceptions import (
    APMismatchError,
    ConfigError,
    HoaError,
    IncompletenessError,
    NondeterminismError,
    UnsupportedAcceptanceError,
)
from verification.hoa import (
    format_dra_json,
    format_hoa,
    load_dra,
    parse_dra_json,
    parse_guard,
    parse_hoa,
)

HEADER = """HOA: v1
States: {states}
Start: 0
AP: 1 "A"
Acceptance: {acceptance}
--BODY--
"""


def hoa(body, states=1, acceptance="1 Inf(0)"):
    return HEADER.format(states=states, acceptance=acceptance) + body + "--END--\n"


# ── Guards ──────────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "text, expected",
    [
        ("t", [True, True, True, True]),
        ("f", [False, False, False, False]),
        ("0", [False, True, False, True]),
        ("!0 & 1", [False, False, True, False]),
        ("0 | 1", [False, True, True, True]),
        ("!(0 | 1)", [True, False, False, False]),
    ],
)
def test_guard_evaluation(text, expected):
    guard = parse_guard(text)
    assert [guard.evaluate(mask) for mask in range(4)] == expected


def test_guard_str_reparses_to_same_function():
    guard = parse_guard("!(0 & 1) | 0 & !1")
    again = parse_guard(str(guard))
    masks = range(4)
    assert [again.evaluate(m) for m in masks] == [guard.evaluate(m) for m in masks]


def test_guard_rejects_named_aps():
    with pytest.raises(HoaError):
        parse_guard("a & 0")


# ── HOA fixtures ────────────────────────────────────────────────────────────


def test_phi1_fixture(phi1_dra):
    assert phi1_dra.n_states == 5
    assert phi1_dra.ap_names == ("A",)
    assert phi1_dra.rabin_pairs == (
        RabinPair(fin=frozenset({4}), inf=frozenset({0, 1, 2, 3})),
    )
    assert step(phi1_dra, 0, {"A"}) == 0
    assert step(phi1_dra, 0, set()) == 1
    assert step(phi1_dra, 2, set()) == 4
    assert step(phi1_dra, 4, {"A"}) == 4


def test_accept_all_fixture(accept_all_dra):
    pair = RabinPair(fin=frozenset(), inf=frozenset({0}))
    assert accept_all_dra.rabin_pairs == (pair,)
    assert accept_all_dra.is_accepting({0})


def test_eventually_always_acceptance(eventually_always_dra):
    assert eventually_always_dra.is_accepting({1})
    assert not eventually_always_dra.is_accepting({1, 2})
    assert not eventually_always_dra.is_accepting({0})


def test_step_rejects_unknown_proposition(phi1_dra):
    with pytest.raises(APMismatchError):
        phi1_dra.step(0, {"B"})


def test_multiple_rabin_pairs():
    text = hoa(
        "State: 0 {0}\n[0] 1\n[!0] 0\nState: 1 {1}\n[t] 1\n",
        states=2,
        acceptance="2 (Fin(0) & Inf(1)) | Inf(0)",
    )
    dra = parse_hoa(text)
    assert dra.rabin_pairs == (
        RabinPair(fin=frozenset({0}), inf=frozenset({1})),
        RabinPair(fin=frozenset(), inf=frozenset({0})),
    )


def test_missing_fin_means_empty_set():
    dra = parse_hoa(hoa("State: 0 {0}\n[t] 0\n"))
    assert dra.rabin_pairs[0].fin == frozenset()


# ── HOA errors ──────────────────────────────────────────────────────────────


def test_nondeterministic_automaton_rejected():
    with pytest.raises(NondeterminismError):
        parse_hoa(hoa("State: 0 {0}\n[t] 0\n[0] 0\n"))


def test_incomplete_automaton_rejected():
    with pytest.raises(IncompletenessError):
        parse_hoa(hoa("State: 0 {0}\n[0] 0\n"))


def test_transition_based_marks_rejected():
    with pytest.raises(UnsupportedAcceptanceError):
        parse_hoa(hoa("State: 0\n[t] 0 {0}\n"))


def test_non_rabin_acceptance_rejected():
    with pytest.raises(UnsupportedAcceptanceError):
        parse_hoa(hoa("State: 0 {0 1}\n[t] 0\n", acceptance="2 Inf(0) & Inf(1)"))


def test_implicit_labels_rejected():
    with pytest.raises(HoaError):
        parse_hoa(hoa("State: 0 {0}\n0\n"))


def test_missing_header_rejected():
    with pytest.raises(HoaError):
        parse_hoa("States: 1\n--BODY--\n--END--\n")


def test_guard_over_undeclared_ap_rejected():
    with pytest.raises(HoaError):
        parse_hoa(hoa("State: 0 {0}\n[1] 0\n[!1] 0\n"))


def test_load_dra_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_dra(tmp_path / "missing.hoa")


def test_load_dra_rejects_undecodable_file(tmp_path):
    path = tmp_path / "binary.hoa"
    path.write_bytes(b"\xff\xfeHOA: v1\n")
    with pytest.raises(ConfigError, match="not UTF-8"):
        load_dra(path)


# ── Round trips ─────────────────────────────────────────────────────────────


def test_hoa_round_trip_preserves_behaviour(phi1_dra):
    again = parse_hoa(format_hoa(phi1_dra))
    assert np.array_equal(again.table, phi1_dra.table)
    assert again.rabin_pairs == phi1_dra.rabin_pairs
    assert again.initial == phi1_dra.initial
    assert again.state_names == phi1_dra.state_names


def test_json_round_trip_preserves_behaviour(eventually_always_dra):
    again = parse_dra_json(format_dra_json(eventually_always_dra))
    assert np.array_equal(again.table, eventually_always_dra.table)
    assert again.rabin_pairs == eventually_always_dra.rabin_pairs


def test_json_automaton_loaded_by_suffix(tmp_path, phi1_dra):
    path = tmp_path / "phi1.json"
    path.write_text(format_dra_json(phi1_dra), encoding="utf-8")
    assert np.array_equal(load_dra(path).table, phi1_dra.table)


def test_malformed_json_automaton():
    with pytest.raises(HoaError):
        parse_dra_json('{"states": [{"edges": [{"guard": "t"}]}]}')


def test_dra_requires_rabin_pair():
    with pytest.raises(HoaError):
        DRA(
            ap_names=("A",),
            initial=0,
            edges=((Edge(Guard.true(), 0),),),
            rabin_pairs=(),
        )
