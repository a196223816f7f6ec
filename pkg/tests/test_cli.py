import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinjunction.bath import BathSpec, corr_xxz_hp
from spinjunction.cli import main
from spinjunction.config import RunSpec, parse_override
from spinjunction.errors import ValidationError
from spinjunction.pipeline import THREADS_ENV, default_threads, run, sweep, sweep_points


def assert_hygiene(summary):
    """Solver checks every steady solve must pass."""
    assert summary["residual"] < 1e-10
    assert summary["trace_error"] < 1e-12
    assert summary["min_eigenvalue"] >= -1e-6


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def quick(mode, **overrides):
    spec = RunSpec(mode=mode).with_overrides({"numerics.T": 1.0, **overrides})
    return spec


finite = st.floats(0.001, 5.0, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(finite, finite, st.floats(-1, 1), st.integers(0, 2**31), st.sampled_from(["steady", "born", "oracle"]),
       st.one_of(st.none(), st.integers(1, 4)))
def test_config_round_trip(jz, gamma, delta, seed, mode, nmax):
    spec = RunSpec(mode=mode, seed=seed).with_overrides(
        {"lead.Jz": jz, "junction.gamma": gamma, "junction.Delta": delta, "oracle.max_excitations": nmax})
    again = RunSpec.from_json(spec.to_json())
    assert again == spec


def test_override_parsing():
    assert parse_override("lead.Jz=0.9") == ("lead.Jz", 0.9)
    assert parse_override("numerics.generator=lindblad-local") == ("numerics.generator", "lindblad-local")
    assert parse_override("lead.beta=null") == ("lead.beta", None)
    assert parse_override("sweep.grid={\"lead.Jz\": [0.5, 1.0]}")[1] == {"lead.Jz": [0.5, 1.0]}
    with pytest.raises(ValidationError):
        parse_override("lead.Jz")


def test_validation_lists_every_bad_field():
    with pytest.raises(ValidationError) as err:
        RunSpec.from_dict({"mode": "nope", "lead": {"J": -1.0, "colour": 3}, "numerics": {"dt": "x"}})
    fields = set(err.value.fields)
    assert {"mode", "lead.J", "lead.colour", "numerics.dt"} <= fields


def test_unknown_override_key_rejected():
    with pytest.raises(ValidationError):
        RunSpec().with_overrides({"lead.Jzz": 1.0})


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["steady", "--out", str(tmp_path / "a")]) == 0
    assert_hygiene(json.loads(capsys.readouterr().out)["summary"])
    assert main(["steady", "--out", str(tmp_path / "b"), "--override", "junction.gamma=-1"]) == 2
    assert "junction.gamma" in capsys.readouterr().err
    assert main(["steady", "--config", str(tmp_path / "missing.json")]) == 2
    # uncoupled junction: the steady state is not unique
    assert main(["steady", "--out", str(tmp_path / "c"), "--override", "junction.gamma=0"]) == 3


def test_cli_reads_config_and_flags_win(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"mode": "born", "seed": 4, "lead": {"Jz": 0.5}}))
    assert main(["steady", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    echoed = json.loads((tmp_path / "o" / "runspec.json").read_text())
    assert echoed["mode"] == "steady" and echoed["seed"] == 9 and echoed["lead"]["Jz"] == 0.5
    capsys.readouterr()


def test_correlations_csv_matches_closed_form(tmp_path):
    spec = quick("correlations", **{"lead.Jz": 0.7, "numerics.T": 5.0})
    bundle = run(spec, tmp_path)
    data = np.loadtxt(tmp_path / "correlation_L.csv", delimiter=",", skiprows=1)
    expected = corr_xxz_hp(data[:, 0], BathSpec(1.0, 0.7))
    assert np.max(np.abs(data[:, 1] + 1j * data[:, 2] - expected)) < 1e-14
    names = {a["file"] for a in bundle.artifacts}
    assert {"correlation_L.csv", "correlation_R.csv", "runspec.json"} <= names


def test_runs_are_deterministic(tmp_path):
    spec = quick("born", **{"lead.Jz": 0.9})
    a = manifest(run(spec, tmp_path / "a") and tmp_path / "a")
    b = manifest(run(spec, tmp_path / "b") and tmp_path / "b")
    assert a["artifacts"] == b["artifacts"]


def test_manifest_records_checksums_and_steps(tmp_path):
    bundle = run(quick("kubo"), tmp_path)
    m = manifest(tmp_path)
    assert m["steps"] == bundle.steps == 100
    for art in m["artifacts"]:
        assert len(art["sha256"]) == 64
        assert (tmp_path / art["file"]).exists()


@pytest.mark.parametrize("mode", ["steady", "spectral", "rectify"])
def test_steady_based_modes_are_hygienic(tmp_path, mode):
    bundle = run(quick(mode, **{"lead.Jz": 0.9}), tmp_path)
    if mode == "steady":
        assert_hygiene(bundle.summary)
    elif mode == "spectral":
        assert bundle.summary["I_from_A0"] == pytest.approx(bundle.summary["I_steady"], rel=1e-3)
    else:
        assert bundle.summary["R"] > 0


def test_generator_choice(tmp_path):
    g = run(quick("steady", **{"numerics.generator": "redfield-global"}), tmp_path / "g").summary
    loc = run(quick("steady", **{"numerics.generator": "lindblad-local"}), tmp_path / "l").summary
    for s in (g, loc):
        assert_hygiene(s)
    assert g["I"] != loc["I"]


def test_oracle_mode_writes_heat_maps(tmp_path):
    spec = quick("oracle", **{"oracle.N_L": 3, "oracle.N_R": 3, "oracle.compare_absorbers": True,
                              "oracle.trajectories": 4, "oracle.max_excitations": 2, "numerics.T": 0.2,
                              "junction.gamma": 0.3})
    run(spec, tmp_path)
    for tag in ("closed", "absorbing"):
        assert (tmp_path / f"bond_currents_{tag}.csv").exists()
        assert (tmp_path / f"current_oracle_{tag}.csv").exists()


def test_single_point_sweep_equals_direct_run(tmp_path):
    direct = run(quick("steady", **{"lead.Jz": 0.6}), tmp_path / "d").summary
    sweep = run(quick("sweep", **{"sweep.points": [{"lead.Jz": 0.6}]}), tmp_path / "s")
    point = json.loads((tmp_path / "s" / "point_0000" / "steady.json").read_text())
    assert point["I"] == direct["I"]
    assert sweep.summary == {"points": 1, "failed": 0}


def test_grid_sweep_expands_cartesian_product():
    spec = quick("sweep", **{"sweep.grid": {"lead.Jz": [0.3, 0.6], "junction.J_S": [0.01, 0.02, 0.03]}})
    pts = sweep_points(spec)
    assert len(pts) == 6
    assert {(p["lead.Jz"], p["junction.J_S"]) for p in pts} == {(a, b) for a in (0.3, 0.6) for b in (0.01, 0.02, 0.03)}


def test_paired_delta_sweep_reports_rectification(tmp_path):
    spec = quick("sweep", **{"sweep.grid": {"lead.Jz": [0.9]}, "sweep.paired_delta": True})
    bundle = run(spec, tmp_path)
    assert bundle.summary["points"] == 2
    (entry,) = bundle.summary["rectification"]
    assert entry["lead.Jz"] == 0.9
    assert 0 < entry["R"] <= 1


def test_failed_point_is_recorded_and_others_complete(tmp_path):
    spec = quick("sweep", **{"sweep.points": [{"lead.Jz": 0.5}, {"junction.gamma": 0.0}, {"lead.Jz": 0.7}]})
    bundle = run(spec, tmp_path)
    assert bundle.summary == {"points": 3, "failed": 1}
    (failure,) = manifest(tmp_path)["failures"]
    assert failure["point"] == 1 and "DegenerateSteadyState" in failure["error"]
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(rows) == 4


def test_parallel_sweep_matches_sequential(tmp_path):
    spec = quick("sweep", **{"sweep.grid": {"lead.Jz": [0.3, 0.6, 0.9]}})
    run(spec, tmp_path / "seq", threads=1)
    run(spec, tmp_path / "par", threads=2)
    assert (tmp_path / "seq" / "sweep.csv").read_text() == (tmp_path / "par" / "sweep.csv").read_text()


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_threads() == 3
    assert default_threads(1) == 1
    monkeypatch.delenv(THREADS_ENV)
    assert default_threads() == 1


def test_interaction_grid_shows_the_two_rectification_regimes(tmp_path):
    """Interacting leads favour one direction and an interacting junction the other."""
    spec = RunSpec().with_overrides({"lead.Jz": 0.0, "junction.Delta": 0.01,
                                     "sweep.grid": {"lead.Jz": [0.0, 0.9], "junction.Jz_sys": [0.0, 0.9]},
                                     "sweep.paired_delta": True})
    bundle = sweep(spec, tmp_path, threads=1)
    assert bundle.summary["points"] == 8
    R = {(e["lead.Jz"], e["junction.Jz_sys"]): e["R"] for e in bundle.summary["rectification"]}
    assert abs(R[(0.0, 0.0)]) < 1e-8
    assert R[(0.9, 0.0)] > 0 > R[(0.0, 0.9)]
