import json
import math
import os
import subprocess

import pytest

import tabrag


def test_toy_split_and_retrieval():
    data = tabrag.generate_toy("circle", noise=0.1, n=200, seed=3)
    assert len(data) == 200
    assert data.features == ["x1", "x2"]
    assert data.classes == ["0", "1"]
    train, val, test = tabrag.make_split(data, seed=1)
    assert (len(train), len(val), len(test)) == (160, 20, 20)

    pool = tabrag.ContextPool(data, train)
    assert pool.size == 160
    ctx = pool.retrieve(test[0], quota=16)
    assert len(ctx["rows"]) == 16
    assert set(ctx["provenance"]) <= {"pearson-half", "pps-half"}
    assert ctx["provenance"].count("pearson-half") == 8
    assert all(r in set(train) for r in ctx["rows"])
    probs = pool.knn(ctx["rows"])["probabilities"]
    assert math.isclose(sum(probs), 1.0)

    uniform = pool.retrieve(train[5], quota=1, importance_mode="uniform")
    assert uniform["rows"] == [train[5]]
    assert uniform["distances"] == [0.0]
    assert pool.retrieve_random(16, seed=2) == pool.retrieve_random(16, seed=2)


def test_metrics():
    assert tabrag.binary_auroc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert tabrag.binary_auroc([1, 1], [0.1, 0.2]) is None
    assert tabrag.nmae([1, 3], [2, 2]) == 0.5
    assert tabrag.minmax_normalize([0.8, 0.9, 1.0]) == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)
    assert tabrag.minmax_normalize([0.1, 0.3], higher_better=False) == [1.0, 0.0]
    points = [(d, (50.0 / d) ** 0.2) for d in (100, 1000, 10000)]
    fit = tabrag.fit_power_law(points)
    assert fit["alpha"] == pytest.approx(0.2, rel=1e-9)
    assert fit["d_c"] == pytest.approx(50.0, rel=1e-9)
    with pytest.raises(tabrag.ContractError):
        tabrag.fit_power_law([(10.0, 1.0)])


def test_load_errors(tmp_path):
    (tmp_path / "t.csv").write_text("a,y\n1,2\n")
    (tmp_path / "s.json").write_text(json.dumps({"columns": [{"name": "a", "role": "feature"}]}))
    with pytest.raises(tabrag.InputError):
        tabrag.load_dataset(tmp_path / "t.csv", tmp_path / "s.json")


def write_config(tmp_path):
    config = {
        "datasets": [{"id": "moon", "toy": {"shape": "moon", "noise": 0.2, "n_train": 120, "n_test": 40}}],
        "predictors": [{"id": "knn", "kind": "knn"}],
        "policies": ["rag", "random"],
        "context_sizes": [8],
        "seed": 4,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_run_and_validate(tmp_path):
    config = write_config(tmp_path)
    assert tabrag.validate_config(config) == []
    reports = tabrag.run(config, tmp_path / "out")
    assert [r["policy"] for r in reports] == ["rag", "random"]
    assert all(r["metric"] == "auroc" and r["n_test"] == 40 for r in reports)
    assert reports[0]["value"] > reports[1]["value"]
    for name in ("predictions.csv", "metrics.json", "manifest.json"):
        assert (tmp_path / "out" / name).exists()


@pytest.mark.skipif("TABRAG_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_matches_module(tmp_path):
    config = write_config(tmp_path)
    tabrag.run(config, tmp_path / "module")
    cli = os.environ["TABRAG_CLI"]
    subprocess.run([cli, "validate-config", "-c", str(config)], check=True, capture_output=True)
    subprocess.run([cli, "run", "-c", str(config), "-o", str(tmp_path / "cli")], check=True, capture_output=True)
    for name in ("predictions.csv", "metrics.json"):
        assert (tmp_path / "module" / name).read_bytes() == (tmp_path / "cli" / name).read_bytes()
