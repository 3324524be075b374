"""Sub-commands and exit codes of the command-line entry point."""

from fractions import Fraction

import pytest

from app.cli.main import build_parser, main
from app.compiler.qubo import read_qubo
from app.config import settings
from app.data.dataset import QuantizedDataset, read_dataset, write_dataset
from app.model.params import read_params
from app.schemas.run import RunConfig
from app.solver.report import read_report
from app.topology.netfile import read_network


def _run(argv):
    args = build_parser().parse_args(argv)
    return args.handler(args)


@pytest.fixture
def tiny_data_file(tmp_path, tiny_dataset):
    path = tmp_path / "tiny.txt"
    write_dataset(tiny_dataset, path)
    return path


@pytest.fixture
def six_nine_file(fixtures_dir):
    return fixtures_dir / "six_nine_patches.txt"


class TestExitCodes:
    def test_missing_network_is_a_config_error(self, tmp_path, six_nine_file):
        code = main(["compile", "--net", str(tmp_path / "missing.net"), "--data", str(six_nine_file)])
        assert code == 2

    def test_bad_lambda_is_a_config_error(self, tmp_path, fixtures_dir, six_nine_file):
        argv = ["compile", "--net", str(fixtures_dir / "mnist69.net"), "--data", str(six_nine_file)]
        assert main(argv + ["--out", str(tmp_path), "--lambda", "sometimes"]) == 2

    def test_out_of_range_data_is_a_data_error(self, tmp_path, fixtures_dir):
        data = tmp_path / "bad.txt"
        data.write_text("dataset 1 1 1 0\n2 | 1/1\n", encoding="utf-8")
        assert main(["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(data)]) == 4

    def test_missing_data_file_is_a_data_error(self, tmp_path, fixtures_dir):
        argv = ["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tmp_path / "absent.txt")]
        assert main(argv + ["--out", str(tmp_path / "run")]) == 4

    def test_exact_cap_is_a_solver_error(self, tmp_path, fixtures_dir, six_nine_file):
        out = tmp_path / "run"
        argv = ["compile", "--net", str(fixtures_dir / "mnist69.net"), "--data", str(six_nine_file)]
        assert main(argv + ["--out", str(out)]) == 0
        assert main(["solve", str(out / "problem.qubo"), "--exact", "--out", str(out)]) == 3

    def test_invalid_schedule(self, tmp_path, fixtures_dir, tiny_data_file):
        out = tmp_path / "run"
        argv = ["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tiny_data_file)]
        assert main(argv + ["--out", str(out)]) == 0
        assert main(["solve", str(out / "problem.qubo"), "--restarts", "0", "--out", str(out)]) == 2

    def test_odd_two_moon(self, tmp_path):
        assert main(["gen-two-moon", "--samples", "7", "--out", str(tmp_path / "moon.txt")]) == 2


class TestCommands:
    def test_gen_two_moon(self, tmp_path):
        path = tmp_path / "moon.txt"
        dataset = _run(["gen-two-moon", "--samples", "10", "--seed", "3", "--input-bits", "2", "--out", str(path)])
        loaded = read_dataset(path)
        assert loaded == dataset
        assert loaded.size == 10
        assert loaded.input_bits == 2

    def test_compile_writes_artifacts(self, tmp_path, fixtures_dir, six_nine_file, capsys):
        out = tmp_path / "run"
        problem = _run(
            ["compile", "--net", str(fixtures_dir / "mnist69.net"), "--data", str(six_nine_file), "--out", str(out)]
        )
        assert read_qubo(out / "problem.qubo") == problem.qubo
        assert (out / "problem.manifest").exists()
        assert (out / "problem.trace").exists()
        assert "original_bits 84" in capsys.readouterr().out

    def test_compile_rho_override(self, tmp_path, fixtures_dir, tiny_data_file):
        problem = _run(
            [
                "compile",
                "--net",
                str(fixtures_dir / "tiny.net"),
                "--data",
                str(tiny_data_file),
                "--out",
                str(tmp_path / "run"),
                "--rho",
                "21/2",
            ]
        )
        assert problem.rho == Fraction(21, 2)

    def test_solve_writes_report(self, tmp_path, fixtures_dir, tiny_data_file):
        out = tmp_path / "run"
        _run(["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tiny_data_file), "--out", str(out)])
        qubo = read_qubo(out / "problem.qubo")
        report = _run(
            ["solve", str(out / "problem.qubo"), "--restarts", "3", "--seed", "1", "--sweeps", "20", "--out", str(out)]
        )
        assert report.restarts == 3
        assert read_report(out / "report.txt", qubo) == report

    def test_solve_to_named_file(self, tmp_path, fixtures_dir, tiny_data_file):
        out = tmp_path / "run"
        _run(["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tiny_data_file), "--out", str(out)])
        target = tmp_path / "reports" / "sa.txt"
        _run(["solve", str(out / "problem.qubo"), "--restarts", "2", "--sweeps", "10", "--out", str(target)])
        assert target.exists()

    def test_count_spins(self, capsys):
        report = _run(["count-spins", "--hidden", "1", "2", "--layers", "2", "3", "--samples", "4"])
        assert len(report.rows) == 4
        first = report.rows[0]
        assert (first.hidden, first.layers, first.samples) == (1, 2, 4)
        assert first.total == first.closed_form == 84
        assert "ratio_range" in capsys.readouterr().out

    def test_train_exact_on_tiny_network(self, tmp_path, fixtures_dir, tiny_data_file):
        out = tmp_path / "run"
        result = _run(
            ["train", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tiny_data_file), "--out", str(out), "--exact"]
        )
        assert result.report.solver == "exact"
        assert result.report.best.rescaled_energy == Fraction(1, 4)
        assert result.train.mse == Fraction(1, 4)
        assert result.train.confusion is None
        net = read_network(fixtures_dir / "tiny.net")
        assert read_params(out / "params.txt", net) == result.params
        assert "train.mse 1/4" in (out / "eval.txt").read_text(encoding="utf-8")
        assert not (out / "confusion_train.csv").exists()

    def test_train_annealing_with_test_set(self, tmp_path, fixtures_dir, six_nine_file):
        out = tmp_path / "run"
        result = _run(
            [
                "train",
                "--net",
                str(fixtures_dir / "mnist69.net"),
                "--data",
                str(six_nine_file),
                "--test-data",
                str(six_nine_file),
                "--out",
                str(out),
                "--restarts",
                "2",
                "--sweeps",
                "40",
                "--seed",
                "4",
            ]
        )
        assert result.report.restarts == 2
        assert result.test is not None
        assert result.test.accuracy == result.train.accuracy
        assert result.best_restart_accuracy >= result.train.accuracy
        for name in ("problem.qubo", "report.txt", "params.txt", "eval.txt", "confusion_train.csv", "confusion_test.csv"):
            assert (out / name).exists(), name

    def test_train_missing_data_file(self, tmp_path, fixtures_dir):
        argv = ["train", "--net", str(fixtures_dir / "tiny.net"), "--data", str(tmp_path / "none.txt")]
        assert main(argv + ["--out", str(tmp_path / "run"), "--exact"]) == 2


def test_labels_on_grid_pass_through(tmp_path, fixtures_dir):
    data = tmp_path / "grid.txt"
    write_dataset(QuantizedDataset(((1,), (-1,)), ((Fraction(1, 2),), (Fraction(-1, 2),)), 0), data)
    problem = _run(["compile", "--net", str(fixtures_dir / "tiny.net"), "--data", str(data), "--out", str(tmp_path)])
    assert problem.snap.snapped == 0
    assert problem.dataset.labels == ((Fraction(1, 2),), (Fraction(-1, 2),))


def test_run_config_output_dir_follows_settings(tmp_path, fixtures_dir, six_nine_file, monkeypatch):
    monkeypatch.setattr(settings, "output_dir", tmp_path / "configured")
    config = RunConfig(net_path=fixtures_dir / "mnist69.net", data_path=six_nine_file)
    assert config.out_dir == tmp_path / "configured"
