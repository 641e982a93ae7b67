"""Tests for the imcverify management commands, run records and admin."""
import json
from io import StringIO
from unittest.mock import patch

import pytest
from django.contrib import admin
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import Client

from verification.abstraction import build_imc
from verification.admin import VerificationRunAdmin
from verification.exceptions import ConvergenceError
from verification.models import CommandName, RefinementRound, RunStatus, VerificationRun
from verification.outputs import imc_to_json, read_imc, write_imc
from verification.runconfig import load_run_config

# ── Helpers ─────────────────────────────────────────────────────────────────


def run_command(name, config, *args):
    """Call a verification command and return (stdout, stderr)."""
    out = StringIO()
    err = StringIO()
    call_command(name, "--config", str(config), *args, stdout=out, stderr=err)
    return out.getvalue(), err.getvalue()


def read_lines(path):
    return path.read_text(encoding="utf-8").splitlines()


NEVER_DECIDED = {"comparison": ">", "p_sat": 1.0}


# ── Scaffold sanity tests ────────────────────────────────────────────────────


@pytest.mark.django_db
def test_admin_page_requires_auth():
    """Admin page redirects unauthenticated users."""
    response = Client().get("/admin/")
    assert response.status_code == 302


# ── abstract ────────────────────────────────────────────────────────────────


def test_abstract_writes_imc(linear_config, tmp_path):
    """abstract writes an interchange file with one state per cell."""
    out, _ = run_command("abstract", linear_config())
    doc = json.loads((tmp_path / "out" / "imc.json").read_text(encoding="utf-8"))
    assert doc["format"] == "imc-triplets"
    assert doc["n_states"] == 4
    assert doc["props"] == [["A"], ["A"], [], []]
    assert len(doc["cells"]) == 4
    assert "Wrote 4-state IMC" in out


def test_abstract_out_dir_flag_overrides_config(linear_config, tmp_path):
    """--out-dir takes precedence over output.out_dir."""
    run_command("abstract", linear_config(), "--out-dir", str(tmp_path / "elsewhere"))
    assert (tmp_path / "elsewhere" / "imc.json").is_file()
    assert not (tmp_path / "out").exists()


def test_abstract_is_independent_of_thread_count(linear_config, tmp_path):
    """The same run-config gives byte-identical IMCs for any worker count."""
    config = linear_config(partition={"grid": [200]})
    for name, threads in (("one", "1"), ("two", "2")):
        run_command(
            "abstract", config, "--out-dir", str(tmp_path / name), "--threads", threads
        )
    assert (tmp_path / "one" / "imc.json").read_bytes() == (
        tmp_path / "two" / "imc.json"
    ).read_bytes()


def test_verify_and_refine_are_independent_of_thread_count(linear_config, tmp_path):
    """Result and round tables are byte-identical for any worker count."""
    config = linear_config(
        partition={"grid": [50]},
        spec=NEVER_DECIDED,
        refinement={"strategy": "all_undecided", "max_rounds": 2},
    )
    for name, threads in (("one", "1"), ("two", "2")):
        out_dir = str(tmp_path / name)
        run_command("verify", config, "--out-dir", out_dir, "--threads", threads)
        with pytest.raises(CommandError):
            run_command("refine", config, "--out-dir", out_dir, "--threads", threads)
    tables = ["results.csv", "rounds.csv"] + [f"round_{k}.csv" for k in range(3)]
    for table in tables:
        one = (tmp_path / "one" / table).read_bytes()
        assert one == (tmp_path / "two" / table).read_bytes(), table


def test_imc_file_round_trip_is_byte_identical(linear_config, tmp_path):
    """Reading an IMC file and writing it back reproduces it exactly."""
    config = load_run_config(linear_config())
    imc = build_imc(config.build_model(), config.build_partition())
    first = write_imc(tmp_path / "first.json", imc)
    again = read_imc(first)
    assert again.same_bounds(imc)
    assert imc_to_json(again) == first.read_text(encoding="utf-8")


# ── verify ──────────────────────────────────────────────────────────────────


def test_verify_all_satisfied(linear_config, tmp_path):
    """An always-true property decides every cell as yes."""
    out, _ = run_command("verify", linear_config())
    lines = read_lines(tmp_path / "out" / "results.csv")
    assert lines[0] == "cell_id,lo_0,hi_0,p_min,p_max,class"
    assert len(lines) == 5
    assert all(line.endswith(",1,1,yes") for line in lines[1:])
    svg = (tmp_path / "out" / "partition.svg").read_text(encoding="utf-8")
    assert svg.count("<rect ") == 4
    assert "#28a745" in svg
    assert "#ffc107" not in svg
    assert "Satisfies=4" in out
    assert "Uncertain volume: 0.000000" in out


def test_verify_without_plot(linear_config, tmp_path):
    """output.plot=false skips the SVG."""
    run_command("verify", linear_config(output={"plot": False}))
    assert (tmp_path / "out" / "results.csv").is_file()
    assert not (tmp_path / "out" / "partition.svg").exists()


def test_verify_loaded_imc_matches_fresh_abstraction(linear_config, tmp_path):
    """Verifying a stored IMC gives the same results as abstracting again."""
    run_command("abstract", linear_config())
    run_command("verify", linear_config(output={"out_dir": "fresh"}))
    loaded = linear_config(output={"out_dir": "loaded"}, imc="out/imc.json")
    run_command("verify", loaded)
    assert read_lines(tmp_path / "fresh" / "results.csv") == read_lines(
        tmp_path / "loaded" / "results.csv"
    )


def test_verify_convergence_failure_exit_code(linear_config):
    """Value iteration running out of sweeps exits with code 3."""
    failure = ConvergenceError("did not converge", residual=0.1, iterations=1)
    with patch(
        "verification.management.commands.verify.verify", side_effect=failure
    ):
        with pytest.raises(CommandError) as info:
            run_command("verify", linear_config())
    assert info.value.returncode == 3


# ── Config errors ───────────────────────────────────────────────────────────


def test_missing_config_exit_code(tmp_path):
    """A run-config that does not exist exits with code 2."""
    with pytest.raises(CommandError) as info:
        run_command("verify", tmp_path / "nope.json")
    assert info.value.returncode == 2


def test_invalid_config_lists_every_problem(linear_config):
    """Validation reports all bad fields at once."""
    config = linear_config(
        partition={"grid": [4, 4]}, spec={"p_sat": 2.0}, extra={"x": 1}
    )
    with pytest.raises(CommandError) as info:
        run_command("verify", config)
    message = str(info.value)
    assert info.value.returncode == 2
    assert "extra: unknown block" in message
    assert "spec.p_sat" in message
    assert "partition.grid" in message


def test_missing_automaton_file(linear_config, tmp_path):
    config = linear_config(spec={"dra": str(tmp_path / "missing.hoa")})
    with pytest.raises(CommandError) as info:
        run_command("verify", config)
    assert info.value.returncode == 2
    assert "spec.dra: file not found" in str(info.value)


def test_undecodable_automaton_file(linear_config, tmp_path):
    """An automaton that is not UTF-8 text is a config error, not a crash."""
    path = tmp_path / "binary.hoa"
    path.write_bytes(b"\xff\xfe\x00\x01")
    with pytest.raises(CommandError) as info:
        run_command("verify", linear_config(spec={"dra": str(path)}))
    assert info.value.returncode == 2
    assert "not UTF-8" in str(info.value)


# ── refine ──────────────────────────────────────────────────────────────────


def test_refine_converged(linear_config, tmp_path):
    """Meeting v_stop in round 0 ends cleanly."""
    out, _ = run_command("refine", linear_config(refinement={"v_stop": 1.0}))
    assert "round=0 cells=4" in out
    assert "Converged" in out
    summary_path = tmp_path / "out" / "summary.json"
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    assert summary["status"] == "converged"
    assert summary["rounds"] == 1
    assert (tmp_path / "out" / "round_0.csv").is_file()
    assert (tmp_path / "out" / "round_0.svg").is_file()


def test_refine_budget_exit_code(linear_config, tmp_path):
    """Running out of rounds writes every output and exits with code 4."""
    config = linear_config(
        spec=NEVER_DECIDED,
        refinement={"strategy": "all_undecided", "max_rounds": 1},
    )
    with pytest.raises(CommandError) as info:
        run_command("refine", config)
    assert info.value.returncode == 4
    out_dir = tmp_path / "out"
    assert read_lines(out_dir / "rounds.csv") == [
        "round,cells,uncertain_volume,yes,no,undecided",
        "0,4,1,0,0,4",
        "1,8,1,0,0,8",
    ]
    assert len(read_lines(out_dir / "round_1.csv")) == 9
    summary = json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))
    assert summary["status"] == "max_rounds"
    assert summary["soundness_violations"] == 0


def test_refine_stalls_without_scores(linear_config, tmp_path):
    """Nothing worth splitting is a budget outcome too."""
    with pytest.raises(CommandError) as info:
        run_command("refine", linear_config(spec=NEVER_DECIDED))
    assert info.value.returncode == 4
    summary_path = tmp_path / "out" / "summary.json"
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    assert summary["status"] == "stalled"


# ── simulate ────────────────────────────────────────────────────────────────


def test_simulate_is_reproducible(linear_config, tmp_path):
    """The same seed reproduces trajectories; another seed does not."""
    config = linear_config()
    run_command("simulate", config, "--out-dir", str(tmp_path / "a"), "--seed", "7")
    run_command("simulate", config, "--out-dir", str(tmp_path / "b"), "--seed", "7")
    run_command("simulate", config, "--out-dir", str(tmp_path / "c"), "--seed", "8")
    a = read_lines(tmp_path / "a" / "trajectories.csv")
    assert a[0] == "traj,step,x_0"
    assert len(a) == 1 + 2 * 6
    assert a[1] == "0,0,0.90000000000000002"
    assert a == read_lines(tmp_path / "b" / "trajectories.csv")
    assert a != read_lines(tmp_path / "c" / "trajectories.csv")


def test_simulate_flags_override_block(linear_config, tmp_path):
    run_command("simulate", linear_config(), "--horizon", "2", "--n-traj", "3")
    assert len(read_lines(tmp_path / "out" / "trajectories.csv")) == 1 + 3 * 3


def test_simulate_requires_block(linear_config):
    with pytest.raises(CommandError) as info:
        run_command("simulate", linear_config(simulate=None))
    assert info.value.returncode == 2


# ── Run records ─────────────────────────────────────────────────────────────


@pytest.mark.django_db
def test_record_stores_run_and_rounds(linear_config):
    """--record keeps the run and one row per refinement round."""
    config = linear_config(
        spec=NEVER_DECIDED,
        refinement={"strategy": "all_undecided", "max_rounds": 1},
    )
    with pytest.raises(CommandError):
        run_command("refine", config, "--record")
    run = VerificationRun.objects.get()
    assert run.command == CommandName.REFINE
    assert run.status == RunStatus.MAX_ROUNDS
    assert run.n_cells == 8
    assert run.uncertain_volume == 1.0
    assert run.finished_at is not None
    rounds = list(RefinementRound.objects.filter(run=run))
    assert [r.index for r in rounds] == [0, 1]
    assert [r.n_undecided for r in rounds] == [4, 8]


@pytest.mark.django_db
def test_record_marks_failed_runs(linear_config):
    config = linear_config(partition={"grid": [0]})
    with pytest.raises(CommandError):
        run_command("verify", config, "--record")
    run = VerificationRun.objects.get()
    assert run.status == RunStatus.FAILED
    assert "partition.grid" in run.message


@pytest.mark.django_db
def test_no_record_without_flag(linear_config):
    run_command("verify", linear_config())
    assert not VerificationRun.objects.exists()


# ── Admin ───────────────────────────────────────────────────────────────────


@pytest.mark.django_db
def test_status_badge_colors():
    """Badges are green for success, amber for budgets, red for failures."""
    model_admin = VerificationRunAdmin(VerificationRun, admin.site)
    expected = {
        RunStatus.CONVERGED: "#28a745",
        RunStatus.STALLED: "#ffc107",
        RunStatus.FAILED: "#dc3545",
    }
    for status, color in expected.items():
        run = VerificationRun.objects.create(
            command=CommandName.REFINE, config_path="run.json", status=status
        )
        badge = model_admin.status_badge(run)
        assert color in badge
        assert run.get_status_display() in badge


@pytest.mark.django_db
def test_run_str():
    run = VerificationRun.objects.create(
        command=CommandName.VERIFY, config_path="configs/run.json"
    )
    assert str(run) == "verify configs/run.json (Running)"
