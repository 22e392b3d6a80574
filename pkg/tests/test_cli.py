"""End-to-end tests of the command-line interface: estimate, simulate,
selftest, and bench subcommands, exit codes, manifests, and determinism."""

import json

import numpy as np
import pytest

from speccov.cli import main
from speccov.core import matrix_from_binary, matrix_from_csv, matrix_to_csv


def _write_data(path, values):
    matrix_to_csv(np.asarray(values, dtype=np.float64), path)
    return str(path)


class TestEstimate:
    def test_sample_on_toy_data(self, tmp_path, capsys):
        data = _write_data(tmp_path / "x.csv", [[1.0, 0.0], [-1.0, 0.0]])
        out = tmp_path / "out"
        rc = main(["estimate", data, "--method", "sample", "--out", str(out)])
        assert rc == 0
        cov = matrix_from_csv(out / "covariance.csv")
        assert np.allclose(cov, [[1.0, 0.0], [0.0, 0.0]])
        spec = matrix_from_csv(out / "spectrum.csv")
        assert np.allclose(spec, [[1.0, 0.0]])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "estimate"
        assert set(manifest["outputs"]) == {"covariance.csv", "spectrum.csv"}

    def test_unknown_method_exits_2_and_lists_ids(self, tmp_path, capsys):
        data = _write_data(tmp_path / "x.csv", [[1.0, 0.0], [-1.0, 0.0]])
        rc = main(["estimate", data, "--method", "nope", "--out", str(tmp_path)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "nope" in err and "sample" in err and "iso-10f-cvc" in err

    def test_missing_input_exits_2(self, tmp_path, capsys):
        rc = main(["estimate", str(tmp_path / "absent.csv"),
                   "--method", "sample", "--out", str(tmp_path)])
        assert rc == 2

    def test_oracle_without_population_exits_3(self, tmp_path, capsys):
        data = _write_data(tmp_path / "x.csv", np.eye(3))
        rc = main(["estimate", data, "--method", "oracle", "--out", str(tmp_path)])
        assert rc == 3
        assert "population" in capsys.readouterr().err

    def test_oracle_with_population(self, tmp_path):
        rng = np.random.default_rng(0)
        data = _write_data(tmp_path / "x.csv", rng.standard_normal((30, 3)))
        pop = _write_data(tmp_path / "pop.csv", np.eye(3))
        out = tmp_path / "out"
        rc = main(["estimate", data, "--method", "oracle",
                   "--population", pop, "--out", str(out)])
        assert rc == 0
        cov = matrix_from_csv(out / "covariance.csv")
        assert cov.shape == (3, 3)

    def test_binary_output(self, tmp_path):
        data = _write_data(tmp_path / "x.csv", [[1.0, 0.0], [-1.0, 0.0]])
        out = tmp_path / "out"
        rc = main(["estimate", data, "--method", "sample",
                   "--format", "bin", "--out", str(out)])
        assert rc == 0
        cov = matrix_from_binary(out / "covariance.bin")
        assert np.allclose(cov, [[1.0, 0.0], [0.0, 0.0]])

    def test_stdout_echoes_csv(self, tmp_path, capsys):
        data = _write_data(tmp_path / "x.csv", [[1.0, 0.0], [-1.0, 0.0]])
        out = tmp_path / "out"
        rc = main(["estimate", data, "--method", "sample",
                   "--out", str(out), "--stdout"])
        assert rc == 0
        assert capsys.readouterr().out == (out / "covariance.csv").read_text()

    def test_deterministic_reruns(self, tmp_path):
        rng = np.random.default_rng(1)
        data = _write_data(tmp_path / "x.csv", rng.standard_normal((24, 4)))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["estimate", data, "--method", "iso-10f-cvc",
                     "--seed", "5", "--out", str(out1)]) == 0
        assert main(["estimate", data, "--method", "iso-10f-cvc",
                     "--seed", "5", "--out", str(out2)]) == 0
        assert (out1 / "covariance.csv").read_bytes() == (out2 / "covariance.csv").read_bytes()


class TestSimulate:
    def _config(self, tmp_path, payload):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        return str(path)

    def test_loo_instability_run(self, tmp_path):
        cfg = self._config(tmp_path, {"experiment": "loo-instability",
                                      "p": 4, "n": 20, "reps": 2, "seed": 3})
        out = tmp_path / "out"
        rc = main(["simulate", "--config", cfg, "--out", str(out)])
        assert rc == 0
        csv_path = out / "loo-instability.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("index,")
        assert len(lines) == 5  # header + one row per eigenvalue index
        manifest = json.loads((out / "manifest.json").read_text())
        import hashlib
        assert manifest["config_hash"] == hashlib.sha256(
            (tmp_path / "config.json").read_bytes()).hexdigest()
        assert manifest["outputs"] == ["loo-instability.csv"]
        assert manifest["seed"] == 3

    def test_byte_identical_reruns(self, tmp_path):
        cfg = self._config(tmp_path, {"experiment": "seprial", "p_values": [12],
                                      "reps": 2, "estimators": ["sample", "lw"],
                                      "rotate": False, "seed": 4})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "seprial.csv").read_bytes() == (out2 / "seprial.csv").read_bytes()

    def test_threads_match_serial(self, tmp_path):
        cfg = self._config(tmp_path, {"experiment": "seprial", "p_values": [12],
                                      "reps": 3, "estimators": ["sample", "lw"],
                                      "rotate": False, "seed": 6})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2),
                     "--threads", "3"]) == 0
        assert (out1 / "seprial.csv").read_bytes() == (out2 / "seprial.csv").read_bytes()

    def test_unknown_experiment_exits_2(self, tmp_path, capsys):
        cfg = self._config(tmp_path, {"experiment": "nope"})
        rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2
        assert "experiment" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert rc == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path, capsys):
        rc = main(["simulate", "--config", str(tmp_path / "absent.json"),
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_invalid_experiment_parameters_exit_2(self, tmp_path, capsys):
        cfg = self._config(tmp_path, {"experiment": "seprial", "ratio": 2.0})
        rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2
        assert "config error" in capsys.readouterr().err

    def test_stdout_echoes_csv(self, tmp_path, capsys):
        cfg = self._config(tmp_path, {"experiment": "loo-instability",
                                      "p": 3, "n": 10, "reps": 2})
        out = tmp_path / "out"
        rc = main(["simulate", "--config", cfg, "--out", str(out), "--stdout"])
        assert rc == 0
        assert capsys.readouterr().out == (out / "loo-instability.csv").read_text()


class TestSelftest:
    def test_exit_zero_and_all_pass(self, capsys):
        rc = main(["selftest"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines and all(line.startswith("PASS") for line in lines)

    def test_json_report(self, capsys):
        rc = main(["selftest", "--json"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["ok"] is True
        assert all(chk["pass"] for chk in report["checks"])
        names = {chk["name"] for chk in report["checks"]}
        assert "mp.closed_form" in names


class TestBench:
    def test_bench_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["bench", "--p-values", "12", "--estimators", "sample", "lw",
                   "--reps", "1", "--out", str(out), "--stdout"])
        assert rc == 0
        text = (out / "runtime-bench.csv").read_text()
        assert capsys.readouterr().out == text
        assert text.splitlines()[0].startswith("p,")
        assert len(text.splitlines()) == 3


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_no_command_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
