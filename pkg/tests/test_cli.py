"""End-to-end tests of the command line."""

import json

import numpy as np
import pandas as pd
import pytest

from cdp import cli
from cdp.invariants.affine import contains
from cdp.invariants.hierarchy import hierarchy_to_equalities
from cdp.utils.io import parse_table, read_vector, write_vector
from cdp.verify.claims import ClaimResult

BANANA = {
    "worlds": ["w1", "w2", "w3", "w4"],
    "probs": [0.0, 0.7, 0.3, 0.0],
    "events": {"banana": ["w3", "w4"]},
    "closest": {"banana": {"w1": "w3", "w2": "w4"}},
}


def exit_code(argv) -> int:
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    return info.value.code


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "banana.json"
    path.write_text(json.dumps(BANANA))
    return path


@pytest.fixture
def bench_yaml(small_files, tmp_path):
    def write(mechanisms):
        counts, hierarchy, _ = small_files
        path = tmp_path / "bench.yaml"
        path.write_text(
            f"epsilons: [1.0]\n"
            f"mechanisms: {json.dumps(mechanisms)}\n"
            f"repetitions: 2\n"
            f"counts_path: {counts.name}\n"
            f"hierarchy_path: {hierarchy.name}\n"
            f"formats: [csv]\n"
        )
        return path

    return write


class TestPerturb:
    def test_laplace(self, small_files, tmp_path, capsys):
        counts, _, leaves = small_files
        out = tmp_path / "noisy.csv"
        cli.main(["perturb", "--input", str(counts), "--epsilon", "1", "--seed", "7", "--output", str(out)])
        nodes, values = read_vector(out)
        assert nodes == list(leaves)
        assert not np.array_equal(values, list(leaves.values()))
        assert "laplace scale: 1" in capsys.readouterr().out

    def test_seeded(self, small_files, tmp_path):
        counts = small_files[0]
        runs = []
        for name in ("a.csv", "b.csv"):
            cli.main(["perturb", "--input", str(counts), "--epsilon", "0.5", "--seed", "3", "--output", str(tmp_path / name)])
            runs.append((tmp_path / name).read_text())
        assert runs[0] == runs[1]

    def test_gaussian_needs_delta(self, small_files, tmp_path, capsys):
        argv = ["perturb", "--input", str(small_files[0]), "--mechanism", "gaussian", "--epsilon", "1", "--output", str(tmp_path / "g.csv")]
        assert exit_code(argv) == 1
        assert "delta" in capsys.readouterr().err
        cli.main(argv + ["--delta", "1e-5"])
        assert (tmp_path / "g.csv").exists()

    def test_missing_input(self, tmp_path, capsys):
        assert exit_code(["perturb", "--input", str(tmp_path / "nope.csv"), "--epsilon", "1", "--output", str(tmp_path / "o.csv")]) == 1
        assert capsys.readouterr().err.startswith("Error:")


class TestOracle:
    def test_prints_both(self, scenario, capsys):
        cli.main(["oracle", "--scenario", str(scenario), "--event", "banana"])
        result = json.loads(capsys.readouterr().out)
        assert result["condition"] == {"w1": 0.0, "w2": 0.0, "w3": 1.0, "w4": 0.0}
        assert result["image"]["w3"] == pytest.approx(0.3)
        assert result["image"]["w4"] == pytest.approx(0.7)

    def test_writes_json(self, scenario, tmp_path):
        out = tmp_path / "image.json"
        cli.main(["oracle", "--scenario", str(scenario), "--event", "banana", "--op", "image", "--output", str(out)])
        assert set(json.loads(out.read_text())) == {"image"}

    def test_unknown_event(self, scenario, capsys):
        assert exit_code(["oracle", "--scenario", str(scenario), "--event", "apple"]) == 1
        assert "apple" in capsys.readouterr().err


class TestHierarchyReleases:
    def test_condition(self, small_files, small, tmp_path):
        counts, hierarchy, _ = small_files
        out = tmp_path / "draws" / "samples.csv"
        cli.main([
            "condition", "--counts", str(counts), "--hierarchy", str(hierarchy), "--epsilon", "1",
            "--samples", "200", "--burnin", "200", "--seed", "4", "--output", str(out),
        ])
        draws = pd.read_csv(out)
        assert list(draws.columns) == list(small.nodes)
        assert len(draws) == 200
        assert np.all(contains(hierarchy_to_equalities(small), draws.to_numpy()))
        diagnostics = json.loads((out.parent / "diagnostics.json").read_text())
        assert 0.0 < diagnostics["acceptance_rate"] <= 1.0
        assert diagnostics["n_chains"] == 1

    def test_chains_must_divide_samples(self, small_files, tmp_path):
        counts, hierarchy, _ = small_files
        argv = [
            "condition", "--counts", str(counts), "--hierarchy", str(hierarchy), "--epsilon", "1",
            "--samples", "200", "--chains", "3", "--output", str(tmp_path / "s.csv"),
        ]
        assert exit_code(argv) == 1

    def test_image_nonneg(self, small_files, small, tmp_path):
        counts, hierarchy, _ = small_files
        out = tmp_path / "imaged.csv"
        cli.main([
            "image", "--counts", str(counts), "--hierarchy", str(hierarchy), "--epsilon", "0.1",
            "--samples", "20", "--nonneg", "--output", str(out),
        ])
        draws = pd.read_csv(out).to_numpy()
        assert draws.shape == (20, small.size)
        assert np.all(draws >= -1e-6)
        assert np.all(contains(hierarchy_to_equalities(small), draws, tol=1e-6))


class TestProject:
    @pytest.fixture
    def noisy(self, small, tmp_path, rng):
        path = tmp_path / "noisy.csv"
        write_vector(path, small.nodes, small.aggregate(np.full(6, 5.0)) + rng.normal(size=small.size))
        return path

    @pytest.mark.parametrize("method", ["l2", "topdown"])
    def test_output_is_consistent(self, small, small_files, noisy, tmp_path, method):
        out = tmp_path / f"{method}.csv"
        cli.main(["project", "--counts", str(noisy), "--hierarchy", str(small_files[1]), "--method", method, "--output", str(out)])
        nodes, values = read_vector(out)
        assert nodes == list(small.nodes)
        assert contains(hierarchy_to_equalities(small), values)

    def test_nonneg_needs_l2(self, small_files, noisy, tmp_path, capsys):
        argv = [
            "project", "--counts", str(noisy), "--hierarchy", str(small_files[1]),
            "--method", "topdown", "--nonneg", "--output", str(tmp_path / "o.csv"),
        ]
        assert exit_code(argv) == 1
        assert "--nonneg needs --method l2" in capsys.readouterr().err

    def test_leaf_file_is_rejected(self, small_files, tmp_path):
        counts, hierarchy, _ = small_files
        assert exit_code(["project", "--counts", str(counts), "--hierarchy", str(hierarchy), "--output", str(tmp_path / "o.csv")]) == 1


class TestVerify:
    def test_selected_claim(self, tmp_path):
        out = tmp_path / "report.json"
        cli.main(["verify", "--claims", "finite.example_banana", "--draws", "100", "--output", str(out)])
        assert json.loads(out.read_text())["finite.example_banana"]["passed"] is True

    def test_failed_claim_exits_nonzero(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(cli, "run_claims", lambda *a, **k: {"broken": ClaimResult("broken", False)})
        assert exit_code(["verify", "--output", str(tmp_path / "report.json")]) == 1
        assert "broken" in capsys.readouterr().err


class TestBench:
    def test_writes_table(self, bench_yaml, tmp_path):
        out = tmp_path / "results" / "table.csv"
        cli.main(["bench", "--config", str(bench_yaml(["topdown", "image"])), "--out", str(out), "--quiet", "--threads", "1"])
        table = parse_table(out)
        assert table.mechanisms == ["topdown", "image"]
        assert len(table) == 2 * 4
        assert table.complete
        assert not (out.parent / "checkpoint.json").exists()

    def test_partial_sweep(self, bench_yaml, tmp_path, capsys):
        out = tmp_path / "results" / "table.csv"
        argv = ["bench", "--config", str(bench_yaml(["rejection", "topdown"])), "--out", str(out), "--quiet"]
        assert exit_code(argv) == cli.EXIT_PARTIAL
        assert "2 cell(s) failed" in capsys.readouterr().err
        assert parse_table(out).get(1.0, "all", "rejection").n_ok == 0

    def test_bad_threads(self, bench_yaml, tmp_path):
        argv = ["bench", "--config", str(bench_yaml(["topdown"])), "--out", str(tmp_path / "t.csv"), "--threads", "0"]
        assert exit_code(argv) == 1

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bench.yaml"
        path.write_text("epsilons: [-1]\n")
        assert exit_code(["bench", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 1
        assert "positive" in capsys.readouterr().err


def test_usage_error():
    assert exit_code(["perturb", "--epsilon", "1"]) == 2
