import csv
import json
from dataclasses import asdict, fields

import numpy as np
import pytest

from bgsupport import cli, harness
from bgsupport.bounds import BoundParams, event_E_prob_lower
from bgsupport.errors import ConfigError
from bgsupport.harness import (
    Aggregate,
    ExperimentConfig,
    TrialRecord,
    emit_aggregate,
    emit_fig1_csv,
    emit_records,
    load_config,
    read_records,
    run_experiment,
    run_trial,
    trial_seed,
)
from bgsupport.bounds import fig1_sweep
from bgsupport.signal_model import ModelParams, _label_rng, draw_support

DESK = {"N": 16, "M": 12, "p": 0.125, "snr_db": 20.0}


@pytest.fixture
def desk_config(desk_params):
    return ExperimentConfig(desk_params, BoundParams(2.0, 25.0), trials=6, master_seed=5)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


class TestConfig:
    def test_round_trip(self, desk_config):
        cfg = desk_config.replace(rip_mode="sampled", rip_samples=50, rip_level=3)
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_snr_shorthand(self, desk_params):
        cfg = ExperimentConfig.from_dict({"params": DESK})
        assert cfg.params == desk_params
        assert cfg.cap == 4
        assert cfg.effective_rip_level == 8

    def test_sampled_rip_mode(self):
        cfg = ExperimentConfig.from_dict({"params": DESK, "rip_mode": {"sampled": 20}})
        assert (cfg.rip_mode, cfg.rip_samples) == ("sampled", 20)

    @pytest.mark.parametrize("doc", [
        {},
        {"params": {**DESK, "p": 0.9}},
        {"params": DESK, "trials": 0},
        {"params": DESK, "solver": "omp"},
        {"params": DESK, "rip_mode": "maybe"},
        {"params": DESK, "rip_mode": {"exhaustive": 3}},
        {"params": DESK, "cardinality_q": 1.0},
        {"params": DESK, "unknown": 1},
        {"params": DESK, "master_seed": -1},
    ])
    def test_rejects(self, doc):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(bad)


class TestTrial:
    def test_seed_is_pure(self):
        assert trial_seed(1, 2) == trial_seed(1, 2)
        assert len({trial_seed(m, t) for m in range(5) for t in range(50)}) == 250
        assert 0 <= trial_seed(2**64 - 1, 10**6) < 2**64

    def test_deterministic(self, desk_config):
        assert run_trial(desk_config, 3) == run_trial(desk_config, 3)
        assert run_trial(desk_config, 3) != run_trial(desk_config, 4)

    def test_record_consistency(self, desk_config):
        r = run_trial(desk_config, 0)
        assert r.bound_satisfied == (r.missed_energy <= r.theorem1_energy_bound)
        assert r.cost_est <= r.cost_true or r.true_support_size > desk_config.cap
        assert r.epsilon_hat is None and r.regression_bound is None

    def test_p_zero(self):
        prm = ModelParams(10, 6, 0.0, 0.0, 1.0, 1.0)
        r = run_trial(ExperimentConfig(prm), 0)
        assert r.true_support_size == r.est_support_size == 0
        assert r.event_E and r.bound_satisfied

    def test_near_noiseless_is_perfect(self):
        prm = ModelParams(16, 12, 0.125, 10.0, 1.0, 1e-4)
        cfg = ExperimentConfig(prm, trials=20)
        for rec in run_experiment(cfg).records:
            if rec.event_E:
                assert rec.missed_count == 0 and rec.false_count == 0

    def test_with_rip(self, desk_config):
        r = run_trial(desk_config.replace(rip_mode="exhaustive", rip_level=3), 0)
        assert r.epsilon_hat is not None and r.epsilon_hat > 0
        rs = run_trial(desk_config.replace(rip_mode="sampled", rip_samples=30, rip_level=3), 0)
        assert rs.epsilon_hat <= r.epsilon_hat + 1e-12


class TestExperiment:
    def test_single_trial_fractions(self, desk_config):
        agg = run_experiment(desk_config.replace(trials=1)).aggregate
        assert agg.trials_run == 1
        for v in (agg.frac_event_E, agg.frac_bound_satisfied_unconditioned,
                  agg.frac_no_miss_unconditioned, agg.frac_perfect_unconditioned):
            assert v in (0.0, 1.0)

    def test_worker_count_irrelevant(self, desk_config):
        a = run_experiment(desk_config, workers=1)
        b = run_experiment(desk_config, workers=2)
        assert a.records == b.records
        assert a.aggregate == b.aggregate

    def test_conditioning(self, desk_config):
        res = run_experiment(desk_config.replace(trials=40))
        cond = [r for r in res.records if r.event_E and r.true_support_size <= desk_config.cap]
        agg = res.aggregate
        assert agg.conditioned_trials == len(cond)
        assert agg.frac_no_miss == pytest.approx(
            sum(r.missed_count == 0 for r in cond) / len(cond))
        assert agg.theorem1_vacuous and agg.theorem1_prob_lower == 0.0

    def test_failures_recorded(self, desk_config, monkeypatch):
        real = harness._run_trial

        def flaky(config, trial_id, seed):
            if trial_id == 2:
                raise FloatingPointError("boom")
            return real(config, trial_id, seed)

        monkeypatch.setattr(harness, "_run_trial", flaky)
        res = run_experiment(desk_config)
        assert res.aggregate.trials_run == 5
        assert res.aggregate.failures == 1
        assert res.aggregate.failed_trials[0]["trial_id"] == 2
        assert "boom" in res.aggregate.failed_trials[0]["error"]
        assert 2 not in [r.trial_id for r in res.records]

    def test_empty_aggregate(self, desk_config):
        agg = harness.aggregate(desk_config, [], [])
        assert agg.frac_event_E is None and agg.mean_missed_energy is None

    def test_event_E_frequency_vs_chernoff(self, desk_params):
        hits = 0
        trials = 10_000
        for t in range(trials):
            S = draw_support(desk_params, _label_rng(trial_seed(0, t), "support"))
            hits += len(S) <= 2 * desk_params.Np
        freq = hits / trials
        print(f"event E frequency {freq:.4f} vs bound {event_E_prob_lower(desk_params):.4f}")
        assert freq >= event_E_prob_lower(desk_params)


class TestEmitters:
    def test_empty_records(self, tmp_path):
        out = tmp_path / "r.jsonl"
        emit_records([], out)
        assert out.read_text() == ""
        assert read_records(out) == []

    def test_round_trip(self, desk_config, tmp_path):
        res = run_experiment(desk_config.replace(rip_mode="exhaustive", rip_level=2))
        out = tmp_path / "r.jsonl"
        emit_records(res.records, out)
        lines = out.read_text().splitlines()
        assert len(lines) == 6
        assert list(json.loads(lines[0])) == [f.name for f in fields(TrialRecord)]
        assert read_records(out) == res.records
        agg_path = tmp_path / "a.json"
        emit_aggregate(res.aggregate, agg_path)
        assert Aggregate(**json.loads(agg_path.read_text())) == res.aggregate

    def test_fig1_csv(self, reference_params, tmp_path):
        out = tmp_path / "f.csv"
        emit_fig1_csv(fig1_sweep(reference_params, [1.6]), out)
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["beta", "k1", "prob_lower"]
        assert len(rows) == 2
        assert out.read_text().splitlines()[1].startswith("1.6,12.94")
        assert all(len(v.replace(".", "").lstrip("0")) <= 12 for v in rows[1])

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError, match="cannot write"):
            emit_records([], tmp_path / "no" / "such" / "dir.jsonl")


class TestCli:
    @pytest.fixture
    def cfg_path(self, tmp_path):
        return write_json(tmp_path / "cfg.json", {
            "params": DESK, "bounds": {"beta": 2.0, "beta_bar": 25.0},
            "trials": 4, "master_seed": 1,
        })

    @pytest.fixture
    def reference_cfg(self, tmp_path):
        return write_json(tmp_path / "reference.json",
                          {"params": {"N": 4096, "M": 256, "p": 0.01, "snr_db": 20.0}})

    def test_constants(self, reference_cfg, capsys):
        assert cli.main(["constants", "--config", reference_cfg, "--beta", "1.6", "--beta-bar", "16"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["theorem1"]["K1"] == pytest.approx(12.94, abs=0.01)
        assert out["theorem2"]["prob_perfect"] == pytest.approx(0.9832, abs=2e-4)

    def test_constants_with_epsilon(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "c.json", {"params": {**DESK, "epsilon": 0.2}})
        assert cli.main(["constants", "--config", cfg, "--beta", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["regression_error_bound"] > 0

    def test_fig1(self, reference_cfg, tmp_path):
        out = tmp_path / "f.csv"
        args = ["fig1", "--config", reference_cfg, "--beta-min", "1.6", "--beta-max", "2.0",
                "--steps", "5", "--out", str(out)]
        assert cli.main(args) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 6 and lines[1].startswith("1.6,12.94")

    def test_simulate(self, cfg_path, tmp_path):
        out, agg = tmp_path / "r.jsonl", tmp_path / "a.json"
        args = ["simulate", "--config", cfg_path, "--out", str(out), "--aggregate", str(agg)]
        assert cli.main(args) == 0
        assert len(out.read_text().splitlines()) == 4
        assert json.loads(agg.read_text())["trials_run"] == 4

    def test_simulate_prints_aggregate(self, cfg_path, tmp_path, capsys):
        assert cli.main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "r")]) == 0
        assert json.loads(capsys.readouterr().out)["trials_run"] == 4

    def test_verify_rip(self, cfg_path, capsys):
        assert cli.main(["verify-rip", "--config", cfg_path, "--level", "3"]) == 0
        ex = json.loads(capsys.readouterr().out)
        assert ex["exhaustive"] and ex["supports_checked"] == 560
        assert cli.main(["verify-rip", "--config", cfg_path, "--level", "3", "--samples", "40"]) == 0
        sm = json.loads(capsys.readouterr().out)
        assert not sm["exhaustive"] and sm["epsilon_hat"] <= ex["epsilon_hat"]

    def test_check_propositions(self, cfg_path, capsys):
        assert cli.main(["check-propositions", "--config", cfg_path, "--seed", "4"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert len(rep["checks"]) == 5 and rep["passed"]

    def test_config_error_exit_2(self, tmp_path, capsys):
        bad = write_json(tmp_path / "bad.json", {"params": {**DESK, "p": 2}})
        assert cli.main(["constants", "--config", bad, "--beta", "2"]) == 2
        assert "error" in capsys.readouterr().err
        assert cli.main(["constants", "--config", str(tmp_path / "none.json"), "--beta", "2"]) == 2

    def test_domain_error_exit_2(self, cfg_path):
        assert cli.main(["constants", "--config", cfg_path, "--beta", "0.5"]) == 2
        assert cli.main(["verify-rip", "--config", cfg_path, "--level", "99"]) == 2

    def test_numerical_error_exit_3(self, cfg_path, monkeypatch, tmp_path):
        from bgsupport.errors import NumericalError

        def boom(*a, **k):
            raise NumericalError("no convergence", (3, 3))

        monkeypatch.setattr(cli, "estimate_rip", boom)
        assert cli.main(["verify-rip", "--config", cfg_path, "--level", "2"]) == 3

    def test_module_entry_point(self, cfg_path):
        import subprocess
        import sys

        proc = subprocess.run([sys.executable, "-m", "bgsupport", "verify-rip", "--config",
                               cfg_path, "--level", "2"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["sparsity_level"] == 2
