"""Experiment plans, the output tree, reproducibility, and failure handling."""
from __future__ import annotations

import json

import pytest

import normsim.experiments as experiments
from normsim.config import ConfigError, InjectionConfig, SimConfig
from normsim.engine import run_simulation
from normsim.experiments import (
    Condition,
    ExperimentPlan,
    RunFailure,
    RunRecord,
    analyze_experiment_dir,
    execute_run,
    load_condition_records,
    load_plan,
    run_experiment,
    run_paths,
)
from normsim.metrics import run_summary_dict


def tiny_base(**overrides):
    base = dict(n_agents_initial=8, n_steps=12, snapshot_step=6)
    base.update(overrides)
    return SimConfig(**base)


def tiny_plan(tmp_path, **overrides):
    settings = dict(
        base=tiny_base(),
        conditions=(
            Condition("ctl"),
            Condition(
                "inj",
                overrides={"injection": {"period": 4, "duration": 2, "magnitude": 5.0}},
                injection_baseline="ctl",
            ),
        ),
        runs_per_condition=4,
        output_dir=str(tmp_path / "out"),
    )
    settings.update(overrides)
    plan = ExperimentPlan(**settings)
    plan.validate()
    return plan


# --- plan validation ----------------------------------------------------------


@pytest.mark.parametrize(
    "breakage",
    [
        {"runs_per_condition": 0},
        {"workers": 0},
        {"conditions": ()},
        {"conditions": (Condition("a"), Condition("a"))},
        {"conditions": (Condition("bad label"),)},
        {"conditions": (Condition("a", injection_baseline="missing"),)},
        {"conditions": (Condition("a", injection_baseline="a"),)},
        {"conditions": (Condition("a", overrides={"metabolism": -1.0}),)},
        {"conditions": (Condition("a", overrides={"not_a_knob": 1}),)},
    ],
)
def test_plan_validation_rejects(tmp_path, breakage):
    with pytest.raises(ConfigError):
        tiny_plan(tmp_path, **breakage)


def test_plan_from_dict_rejects_unknown_fields():
    with pytest.raises(ConfigError, match="unknown plan"):
        ExperimentPlan.from_dict({"conditions": [{"label": "a"}], "cadence": 3})
    with pytest.raises(ConfigError, match="unknown condition"):
        ExperimentPlan.from_dict({"conditions": [{"label": "a", "seed": 1}]})
    with pytest.raises(ConfigError, match="label"):
        ExperimentPlan.from_dict({"conditions": [{"overrides": {}}]})


def test_load_plan_json_and_toml(tmp_path):
    data = {
        "base": {"n_agents_initial": 8, "n_steps": 12, "snapshot_step": 6},
        "conditions": [
            {"label": "ctl"},
            {"label": "hot", "overrides": {"sanction_damage_D": 1.0}},
        ],
        "runs_per_condition": 3,
        "output_dir": "results",
    }
    json_path = tmp_path / "plan.json"
    json_path.write_text(json.dumps(data))
    plan = load_plan(json_path)
    assert plan.runs_per_condition == 3
    assert plan.conditions[1].overrides == {"sanction_damage_D": 1.0}
    assert plan.condition_config(plan.conditions[1]).sanction_damage_D == 1.0

    toml_path = tmp_path / "plan.toml"
    toml_path.write_text(
        "runs_per_condition = 3\noutput_dir = 'results'\n"
        "[base]\nn_agents_initial = 8\nn_steps = 12\nsnapshot_step = 6\n"
        "[[conditions]]\nlabel = 'ctl'\n"
        "[[conditions]]\nlabel = 'hot'\n[conditions.overrides]\nsanction_damage_D = 1.0\n"
    )
    assert load_plan(toml_path) == plan


def test_load_plan_malformed(tmp_path):
    bad = tmp_path / "plan.json"
    bad.write_text("[]")
    with pytest.raises(ConfigError, match="table"):
        load_plan(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        load_plan(tmp_path / "nope.json")


# --- run records ---------------------------------------------------------------


def test_run_record_round_trips_through_summary_json():
    result = run_simulation(tiny_base(), 0)
    record = RunRecord.from_result(result)
    rebuilt = RunRecord.from_json_dict(
        json.loads(json.dumps(run_summary_dict(result)))
    )
    assert rebuilt == record
    assert record.snapshots.keys() == {6, 12}


# --- execute_run ----------------------------------------------------------------


def test_execute_run_writes_the_file_pair(tmp_path):
    record = execute_run(tiny_base(), 2, tmp_path, "ctl")
    csv_path, json_path = run_paths(tmp_path, 2)
    assert csv_path.exists() and json_path.exists()
    assert record.run_seed == 2
    stored = json.loads(json_path.read_text())
    assert stored["config"]["n_agents_initial"] == 8


def test_execute_run_retries_once(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = run_simulation

    def flaky(config, seed):
        calls["n"] += 1
        if calls["n"] == 1:
            raise OSError("transient")
        return real(config, seed)

    monkeypatch.setattr(experiments, "run_simulation", flaky)
    record = execute_run(tiny_base(), 0, tmp_path, "ctl")
    assert calls["n"] == 2
    assert record.survived


def test_execute_run_gives_up_after_two_failures(tmp_path, monkeypatch):
    def broken(config, seed):
        raise OSError("disk on fire")

    monkeypatch.setattr(experiments, "run_simulation", broken)
    with pytest.raises(RunFailure, match="ctl/3"):
        execute_run(tiny_base(), 3, tmp_path, "ctl")


# --- run_experiment --------------------------------------------------------------


def tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_run_experiment_output_tree(tmp_path):
    plan = tiny_plan(tmp_path)
    summaries = run_experiment(plan, quiet=True)
    root = tmp_path / "out"
    for label in ("ctl", "inj"):
        assert (root / label / "condition.json").exists()
        assert (root / label / "summary.json").exists()
        assert (root / label / "table2.csv").exists()
        for seed in range(4):
            csv_path, json_path = run_paths(root / label, seed)
            assert csv_path.exists() and json_path.exists()
    assert (root / "sweep.csv").exists()

    assert set(summaries) == {"ctl", "inj"}
    assert summaries["ctl"].n_runs == 4
    assert summaries["ctl"].injection is None
    injection_report = summaries["inj"].injection
    assert injection_report is not None
    assert injection_report["n_pairs"] == 4
    assert injection_report["window_steps"] == len(
        [t for t in range(12) if InjectionConfig(4, 2, 5.0).active_at(t)]
    )
    stored = json.loads((root / "inj" / "summary.json").read_text())
    assert stored["injection"]["n_pairs"] == 4

    sweep_lines = (root / "sweep.csv").read_text().splitlines()
    assert len(sweep_lines) == 3
    assert sweep_lines[1].startswith("ctl,0.6,4,")


def test_run_experiment_is_reproducible(tmp_path):
    first = run_experiment(tiny_plan(tmp_path / "a"), quiet=True)
    second = run_experiment(tiny_plan(tmp_path / "b"), quiet=True)
    assert tree_bytes(tmp_path / "a" / "out") == tree_bytes(tmp_path / "b" / "out")
    assert first["ctl"].to_dict() == second["ctl"].to_dict()


def test_parallel_workers_match_serial(tmp_path):
    run_experiment(tiny_plan(tmp_path / "serial"), quiet=True)
    run_experiment(tiny_plan(tmp_path / "pool", workers=2), quiet=True)
    assert tree_bytes(tmp_path / "serial" / "out") == tree_bytes(tmp_path / "pool" / "out")


def test_analyze_experiment_dir_from_disk_alone(tmp_path):
    plan = tiny_plan(tmp_path)
    fresh = run_experiment(plan, quiet=True)
    root = tmp_path / "out"
    before = tree_bytes(root)
    reread = analyze_experiment_dir(root)
    assert set(reread) == set(fresh)
    assert reread["inj"].to_dict() == fresh["inj"].to_dict()
    assert tree_bytes(root) == before  # re-analysis rewrites identical bytes

    records, config_dict = load_condition_records(root / "ctl")
    assert [r.run_seed for r in records] == [0, 1, 2, 3]
    assert config_dict["n_steps"] == 12


def test_condition_without_survivors_reports_insufficient_data(tmp_path):
    plan = tiny_plan(
        tmp_path,
        base=tiny_base(
            metabolism=1.0,
            resource_initial=0.0,
            growth_mean=0.0,
            growth_peak=0.0,
            growth_trough=0.0,
        ),
        conditions=(Condition("doomed"),),
        runs_per_condition=2,
    )
    summaries = run_experiment(plan, quiet=True)
    assert summaries["doomed"] is None
    stored = json.loads((tmp_path / "out" / "doomed" / "summary.json").read_text())
    assert stored["n_survived"] == 0
    assert "insufficient-data" in stored["error"]
    sweep = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert sweep[1].split(",")[4] == "0.0"  # survival_rate column
