"""Synthetic-study harness: generators, smoke runs, determinism, output files."""

import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from clockctbn.errors import ModelError
from clockctbn.experiments import (
    ExperimentConfig,
    mse_experiment,
    random_graph,
    random_model,
    run_experiment,
    shape_sweep,
    structure_experiment,
)
from clockctbn.experiments import _nondegenerate_graph
from clockctbn.survival import Family


def test_config_from_dict_validation():
    cfg = ExperimentConfig.from_dict({"seed": 3, "sizes": [10, 20]})
    assert cfg.sizes == (10, 20)
    assert cfg.shapes == (1.0, 3.0, 5.0, 7.0, 9.0)
    with pytest.raises(ModelError):
        ExperimentConfig.from_dict({"seed": 1, "bogus": 2})
    with pytest.raises(ModelError):
        ExperimentConfig.from_dict({"replicates": 5})
    with pytest.raises(ModelError):
        ExperimentConfig.from_dict({"seed": 1, "family": "lognormal"})


def test_paper_scale_overrides():
    cfg = ExperimentConfig(seed=1).paper_scale()
    assert cfg.replicates == 100
    assert cfg.num_graphs == 500
    assert cfg.sweep_graphs == 100
    assert cfg.seed == 1


def test_random_graph_properties_and_determinism():
    g1 = random_graph(5, 2, np.random.default_rng(7))
    g2 = random_graph(5, 2, np.random.default_rng(7))
    assert g1.parents == g2.parents
    degrees = set()
    for trial in range(40):
        g = random_graph(5, 2, np.random.default_rng(trial))
        for n in range(5):
            assert len(g.parents[n]) <= 2
            assert n not in g.parents[n]
            degrees.add(len(g.parents[n]))
    assert degrees == {0, 1, 2}


def test_random_model_draws_and_fixed_shape():
    rng = np.random.default_rng(11)
    graph = random_graph(3, 2, rng)
    model = random_model(graph, (2, 2, 2), Family.WEIBULL, rng)
    again_rng = np.random.default_rng(11)
    again = random_model(random_graph(3, 2, again_rng), (2, 2, 2), Family.WEIBULL, again_rng)
    assert model.phi == again.phi and model.theta == again.theta
    for key, p in model.phi.items():
        assert all(v > 0 for v in p.params)
        assert model.theta[key][key[1]] == 0.0
        assert_allclose(sum(model.theta[key]), 1.0, rtol=1e-12)
    pinned = random_model(graph, (2, 2, 2), Family.WEIBULL, rng, fixed_shape=4.0)
    assert all(p.params[0] == 4.0 for p in pinned.phi.values())
    single = random_model(graph, (2, 2, 2), Family.RAYLEIGH, rng)
    assert all(len(p.params) == 1 for p in single.phi.values())


def test_nondegenerate_graph_has_present_and_absent_edges():
    for trial in range(20):
        g = _nondegenerate_graph(3, 2, np.random.default_rng(trial))
        assert 0 < len(g.edges()) < 6


MSE_CFG = ExperimentConfig(
    seed=5, num_nodes=2, max_indegree=1, replicates=2, sizes=(30, 120)
)
STRUCT_CFG = ExperimentConfig(
    seed=6, num_nodes=2, max_indegree=1, num_graphs=2, num_trajectories=3, horizon=2.0
)
SWEEP_CFG = ExperimentConfig(
    seed=7,
    num_nodes=2,
    max_indegree=1,
    shapes=(1.0, 3.0),
    sweep_graphs=1,
    sweep_trajectories=3,
    horizon=2.0,
)


def test_mse_experiment_smoke_and_determinism():
    res = mse_experiment(MSE_CFG)
    assert res.kind == "mse"
    assert {(r["size"], r["role"]) for r in res.table} == {
        (30, "shape"),
        (30, "rate"),
        (120, "shape"),
        (120, "rate"),
    }
    for row in res.table:
        assert row["q10"] <= row["q50"] <= row["q90"]
        assert np.isfinite(row["median_relative_error"])
    for row in res.details:
        assert row["squared_error"] >= 0.0
        assert row["replicate"] in (0, 1)
    again = mse_experiment(MSE_CFG)
    assert again.details == res.details and again.table == res.table


def test_structure_experiment_smoke():
    res = structure_experiment(STRUCT_CFG)
    fams = {"weibull", "exponential"}
    assert {r["family"] for r in res.details} == fams
    assert {r["num_trajectories"] for r in res.details} == {1, 2, 3}
    assert len(res.details) == 2 * 2 * 3
    for row in res.details:
        assert 0.0 <= row["auroc"] <= 1.0
        assert 0.0 <= row["aupr"] <= 1.0
    assert len(res.table) == 6
    assert all(r["count"] == 2 for r in res.table)
    assert all(r["auroc_q20"] <= r["auroc_q50"] <= r["auroc_q80"] for r in res.table)


def test_shape_sweep_smoke():
    res = shape_sweep(SWEEP_CFG)
    assert len(res.details) == 2 * 1 * 2
    assert {(r["shape"], r["family"]) for r in res.details} == {
        (1.0, "weibull"),
        (1.0, "exponential"),
        (3.0, "weibull"),
        (3.0, "exponential"),
    }
    assert len(res.table) == 4


def test_worker_processes_do_not_change_results():
    parallel = structure_experiment(
        ExperimentConfig(**{**STRUCT_CFG.__dict__, "threads": 2})
    )
    serial = structure_experiment(STRUCT_CFG)
    assert parallel.details == serial.details


def test_result_write_is_deterministic(tmp_path: Path):
    res = mse_experiment(MSE_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    res.write(a)
    mse_experiment(MSE_CFG).write(b)
    for name in ("config.json", "table.csv", "details.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    cfg = json.loads((a / "config.json").read_text())
    assert cfg["kind"] == "mse" and cfg["seed"] == 5
    header = (a / "details.csv").read_text().splitlines()[0]
    assert "squared_error" in header and "relative_error" in header


def test_run_experiment_dispatch():
    res = run_experiment("shape-sweep", SWEEP_CFG)
    assert res.kind == "shape-sweep"
    with pytest.raises(ModelError):
        run_experiment("ablation", SWEEP_CFG)
