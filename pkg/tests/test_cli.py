import json
from pathlib import Path

import pytest

from reachkit.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SHIPPED = {
    "boundary.json": "boundary",
    "gramian.json": "gramian",
    "lp_sample.json": "lp-sample",
    "inner_approx.json": "inner-approx",
    "volume.json": "volume",
    "optimize_trace.json": "optimize",
}


def run_cli(task, config, out):
    return main([task, "--config", str(config), "--out", str(out)])


def data_files(out_dir: Path):
    return sorted(p for p in out_dir.iterdir() if p.name != "manifest.json")


class TestShippedConfigs:
    @pytest.mark.parametrize("name,task", sorted(SHIPPED.items()))
    def test_validates_and_runs(self, tmp_path, name, task):
        out = tmp_path / "out"
        assert run_cli(task, CONFIG_DIR / name, out) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["task"] == task
        listed = {entry["name"] for entry in manifest["files"]}
        assert listed == {p.name for p in data_files(out)}
        for entry in manifest["files"]:
            assert len(entry["sha256"]) == 64
            assert entry["bytes"] == (out / entry["name"]).stat().st_size

    @pytest.mark.parametrize("name,task", sorted(SHIPPED.items()))
    def test_reruns_byte_identical(self, tmp_path, name, task):
        out1 = tmp_path / "first"
        out2 = tmp_path / "second"
        assert run_cli(task, CONFIG_DIR / name, out1) == EXIT_OK
        assert run_cli(task, CONFIG_DIR / name, out2) == EXIT_OK
        files1 = data_files(out1)
        assert files1, "task produced no data files"
        assert [p.name for p in files1] == [p.name for p in data_files(out2)]
        for p in files1:
            assert p.read_bytes() == (out2 / p.name).read_bytes()


class TestArtifacts:
    def test_boundary_outputs(self, tmp_path):
        out = tmp_path / "out"
        run_cli("boundary", CONFIG_DIR / "boundary.json", out)
        lines = (out / "boundary.csv").read_text().strip().splitlines()
        assert lines[0] == "eta,x1_g1,x2_g1,x1_g2,x2_g2"
        assert len(lines) == 401
        hull = json.loads((out / "hull.json").read_text())
        assert hull["dim"] == 2 and hull["volume"] > 0
        assert hull["exact"] is True

    def test_lp_sample_row_count(self, tmp_path):
        out = tmp_path / "out"
        run_cli("lp-sample", CONFIG_DIR / "lp_sample.json", out)
        lines = (out / "cloud.csv").read_text().strip().splitlines()
        assert len(lines) - 1 == 1525
        header = lines[0].split(",")
        assert header == [
            "lambda0_1", "lambda0_2", "xf_1", "xf_2",
            "cost_p", "reachable", "within_prop2_bound",
        ]

    def test_gramian_payload(self, tmp_path):
        out = tmp_path / "out"
        run_cli("gramian", CONFIG_DIR / "gramian.json", out)
        payload = json.loads((out / "gramian.json").read_text())
        assert set(payload) >= {"T", "c", "axes", "trace", "eigenvalues", "W"}
        assert payload["trace"] > 0

    def test_inner_approx_all_certified(self, tmp_path):
        out = tmp_path / "out"
        run_cli("inner-approx", CONFIG_DIR / "inner_approx.json", out)
        lines = (out / "cloud.csv").read_text().strip().splitlines()[1:]
        assert lines
        for line in lines:
            fields = line.split(",")
            assert fields[-1] == "true"  # certified
            assert fields[-2] == "true"  # and reachable

    def test_optimize_payload(self, tmp_path):
        out = tmp_path / "out"
        run_cli("optimize", CONFIG_DIR / "optimize_trace.json", out)
        payload = json.loads((out / "optresult.json").read_text())
        assert payload["converged"] is True
        assert set(payload["optimum"]) == {"b", "c_bar"}
        assert len(payload["history"]) == payload["iterations"] + 1


class TestValidation:
    def test_unknown_task_rejected(self, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({
            "system": {"A": [[0.0]], "B": [[1.0]]},
            "task": {"name": "explode"},
        }))
        out = tmp_path / "out"
        with pytest.raises(SystemExit):
            main(["explode", "--config", str(config), "--out", str(out)])
        assert not out.exists()

    def test_task_name_mismatch(self, tmp_path):
        out = tmp_path / "out"
        code = main(["gramian", "--config", str(CONFIG_DIR / "boundary.json"), "--out", str(out)])
        assert code == EXIT_CONFIG
        assert not out.exists()

    def test_missing_parameter(self, tmp_path):
        config = tmp_path / "missing.json"
        config.write_text(json.dumps({
            "system": {"A": [[0.0, 0.0], [0.0, 0.0]], "B": [[1.0], [0.0]]},
            "task": {"name": "boundary", "bounds": 1.0},
        }))
        code = main(["boundary", "--config", str(config), "--out", str(tmp_path / "out")])
        assert code == EXIT_CONFIG

    def test_config_file_missing(self, tmp_path):
        code = main(["boundary", "--config", str(tmp_path / "nope.json")])
        assert code == EXIT_CONFIG

    def test_invalid_json(self, tmp_path):
        config = tmp_path / "broken.json"
        config.write_text("{not json")
        assert main(["boundary", "--config", str(config)]) == EXIT_CONFIG

    def test_value_domain_checks(self, tmp_path):
        base = {"system": {"A": [[0.0, 0.0], [0.0, 0.0]], "B": [[1.0], [0.0]]}}
        bad_tasks = [
            ("lp-sample", {"name": "lp-sample", "T": 1.0, "p": 5}),
            ("lp-sample", {"name": "lp-sample", "T": -1.0, "p": 6}),
            ("boundary", {"name": "boundary", "T": 1.0, "bounds": 1.0, "n_eta": 1}),
            ("lp-sample", {"name": "lp-sample", "T": 1.0, "p": 6,
                           "grid": {"magnitudes": [5.0, 1.0]}}),
        ]
        for i, (task, section) in enumerate(bad_tasks):
            config = tmp_path / f"bad{i}.json"
            config.write_text(json.dumps({**base, "task": section}))
            assert main([task, "--config", str(config)]) == EXIT_CONFIG

    def test_unknown_optimizer_options(self, tmp_path):
        raw = json.loads((CONFIG_DIR / "optimize_trace.json").read_text())
        raw["task"]["options"] = {"not_a_real_option": 5}
        config = tmp_path / "badopt.json"
        config.write_text(json.dumps(raw))
        assert main(["optimize", "--config", str(config)]) == EXIT_CONFIG

    def test_bad_system_matrix(self, tmp_path):
        config = tmp_path / "bad_system.json"
        config.write_text(json.dumps({
            "system": {"A": [[0.0, 1.0]], "B": [[1.0]]},
            "task": {"name": "gramian", "T": 1.0},
        }))
        assert main(["gramian", "--config", str(config)]) == EXIT_CONFIG

    def test_numeric_failure_exit_code(self, tmp_path):
        # no budget-feasible endpoints: the volume task cannot build a hull
        config = tmp_path / "starved.json"
        config.write_text(json.dumps({
            "system": {"A": [[0.4, -0.3], [0.5, 1.7]], "B": [[1.0], [0.0]]},
            "task": {
                "name": "volume", "T": 1.0, "p": 6, "budget": 1e-6,
                "grid": {"magnitudes": [50.0, 100.0], "directions_per_shell": 16},
                "nodes": 101,
            },
        }))
        out = tmp_path / "out"
        code = main(["volume", "--config", str(config), "--out", str(out)])
        assert code == EXIT_NUMERIC
        assert not out.exists()

    def test_seed_recorded(self, tmp_path):
        out = tmp_path / "out"
        code = main([
            "gramian", "--config", str(CONFIG_DIR / "gramian.json"),
            "--out", str(out), "--seed", "1234",
        ])
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 1234
