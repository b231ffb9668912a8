"""Synthetic-study harness: parameter recovery, structure recovery, shape sweep.

Random ground-truth models are drawn per replicate from hyperpriors (gamma
hyperpriors on shape and rate; dirichlet landing rows), simulated exactly,
and handed to the inference stack.  Every replicate derives its generator
from (seed, replicate-id), so results are reproducible and independent of
worker scheduling; aggregation always walks replicates in id order.

Desk-scale defaults keep each study in the minutes range on one core; the
paper_scale switch restores the publication-size protocol.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InsufficientDataError, ModelError
from .likelihood import suff_stats
from .model import Graph, Model, all_keys
from .params import map_estimate
from .simulate import gillespie, trajectory_prefix
from .structure import (
    StructurePriors,
    auroc,
    aupr,
    graph_posterior,
    sequential_posterior_update,
)
from .survival import FAMILY_ARITY, Family, SurvivalParams

log = logging.getLogger(__name__)

# gamma hyperpriors (shape, rate) for drawing ground-truth holding parameters
_PHI_HYPER = {
    Family.WEIBULL: ((8.0, 0.5), (5.0, 3.0)),
    Family.GAMMA: ((40.0, 5.0), (25.0, 2.5)),
    Family.EXPONENTIAL: ((5.0, 3.0),),
    Family.RAYLEIGH: ((5.0, 3.0),),
}
_RESAMPLE_CAP = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared knob set for the three studies; each reads the fields it needs."""

    seed: int
    num_nodes: int = 4
    cardinality: int = 2
    family: str = "weibull"
    max_indegree: int = 3
    replicates: int = 20
    sizes: tuple = (100, 1000, 10000)
    num_graphs: int = 20
    num_trajectories: int = 100
    horizon: float = 5.0
    shapes: tuple = (1.0, 3.0, 5.0, 7.0, 9.0)
    sweep_graphs: int = 10
    sweep_trajectories: int = 50
    edge_log_penalty: float = 0.0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "shapes", tuple(float(k) for k in self.shapes))
        try:
            Family(self.family)
        except ValueError:
            raise ModelError(f"unknown family {self.family!r}") from None
        if self.seed is None:
            raise ModelError("experiments require an explicit seed")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ModelError(f"unknown config fields: {sorted(unknown)}")
        if "seed" not in data:
            raise ModelError("config must set a seed")
        return cls(**data)

    def paper_scale(self) -> "ExperimentConfig":
        """Publication-size protocol (hours of compute, not minutes)."""
        return replace(
            self,
            replicates=100,
            num_graphs=500,
            sweep_graphs=100,
            num_trajectories=100,
            sweep_trajectories=50,
        )


def random_graph(num_nodes: int, max_indegree: int, rng: np.random.Generator) -> Graph:
    """In-degree uniform on {0..max_indegree}; parents by top dirichlet weight."""
    parents = []
    for n in range(num_nodes):
        others = [m for m in range(num_nodes) if m != n]
        d = int(rng.integers(0, min(max_indegree, len(others)) + 1))
        w = rng.dirichlet(np.ones(len(others)))
        order = np.argsort(-w, kind="stable")  # ties to the lowest node id
        parents.append(tuple(sorted(others[i] for i in order[:d])))
    return Graph(num_nodes, tuple(parents))


def random_model(
    graph: Graph,
    cardinalities,
    family: Family,
    rng: np.random.Generator,
    fixed_shape: float | None = None,
) -> Model:
    """Draw per-key parameters key by key in ascending key order.

    Two-parameter families draw (shape, rate); one-parameter families draw
    their single positive parameter from the rate hyperprior.  fixed_shape
    pins the shape and only draws rates.
    """
    family = Family(family)
    hyper = _PHI_HYPER[family]
    phi, theta = {}, {}
    for key in all_keys(graph, cardinalities):
        n, x, _ = key
        if FAMILY_ARITY[family] == 2:
            if fixed_shape is None:
                a1, b1 = hyper[0]
                shape = rng.gamma(a1, 1.0 / b1)
            else:
                shape = float(fixed_shape)
            a2, b2 = hyper[1]
            rate = rng.gamma(a2, 1.0 / b2)
            phi[key] = SurvivalParams(family, (shape, rate))
        else:
            a2, b2 = hyper[0]
            phi[key] = SurvivalParams(family, (rng.gamma(a2, 1.0 / b2),))
        card = cardinalities[n]
        row = np.zeros(card)
        draw = rng.dirichlet(np.ones(card - 1))
        row[[t for t in range(card) if t != x]] = draw
        theta[key] = tuple(row)
    return Model(graph, tuple(cardinalities), family, phi, theta)


def _nondegenerate_graph(num_nodes, max_indegree, rng) -> Graph:
    """Redraw until the adjacency has both present and absent edges."""
    max_edges = num_nodes * (num_nodes - 1)
    for _ in range(_RESAMPLE_CAP):
        g = random_graph(num_nodes, max_indegree, rng)
        n_edges = len(g.edges())
        if 0 < n_edges < max_edges:
            return g
        log.warning("resampling degenerate graph (%d edges)", n_edges)
    raise ModelError("could not draw a non-degenerate graph")


def _quantiles(values) -> dict:
    arr = np.asarray(values, dtype=float)
    q10, q50, q90 = np.quantile(arr, [0.1, 0.5, 0.9])
    return {"q10": float(q10), "q50": float(q50), "q90": float(q90)}


# ----------------------------------------------------------------- MSE -----


def _mse_replicate(config: ExperimentConfig, rep: int) -> list[dict]:
    rng = np.random.default_rng([config.seed, rep])
    cards = (config.cardinality,) * config.num_nodes
    family = Family(config.family)
    if FAMILY_ARITY[family] != 2:
        raise ModelError("the recovery study estimates two-parameter families")
    graph = random_graph(config.num_nodes, config.max_indegree, rng)
    model = random_model(graph, cards, family, rng)
    full = gillespie(model, rng=rng, max_events=max(config.sizes))
    rows = []
    for size in config.sizes:
        prefix = trajectory_prefix(full, size)
        stats = suff_stats(prefix, graph, cards)
        for key in all_keys(graph, cards):
            truth = model.phi[key].params
            ks = stats.stats.get(key)
            if ks is None or not ks.full:
                log.warning("rep %d size %d: key %s lacks closed windows, skipped", rep, size, key)
                continue
            try:
                est = map_estimate(ks, family)
            except InsufficientDataError:
                log.warning("rep %d size %d: key %s insufficient data, skipped", rep, size, key)
                continue
            for role, t, e in zip(("shape", "rate"), truth, est):
                rows.append(
                    {
                        "replicate": rep,
                        "size": size,
                        "node": key[0],
                        "key": f"{key[0]}/{key[1]}/{key[2]}",
                        "role": role,
                        "truth": t,
                        "estimate": e,
                        "squared_error": (e - t) ** 2,
                        "relative_error": abs(e - t) / abs(t),
                    }
                )
    return rows


def mse_experiment(config: ExperimentConfig) -> "ExperimentResult":
    """Parameter-recovery study: MAP error quantiles vs transition budget."""
    details = []
    for chunk in _map_replicates(_mse_replicate, config, range(config.replicates)):
        details.extend(chunk)
    table = []
    for size in config.sizes:
        for role in ("shape", "rate"):
            sel = [r for r in details if r["size"] == size and r["role"] == role]
            if not sel:
                continue
            row = {"size": size, "role": role, "count": len(sel)}
            row.update(_quantiles([r["squared_error"] for r in sel]))
            row["median_relative_error"] = float(
                np.median([r["relative_error"] for r in sel])
            )
            table.append(row)
    return ExperimentResult("mse", config, table, details)


# ----------------------------------------------------------- structure -----


def _structure_graph(config: ExperimentConfig, g: int) -> list[dict]:
    rng = np.random.default_rng([config.seed, g])
    cards = (config.cardinality,) * config.num_nodes
    graph = _nondegenerate_graph(config.num_nodes, config.max_indegree, rng)
    model = random_model(graph, cards, Family(config.family), rng)
    trajs = [
        gillespie(model, config.horizon, rng=rng) for _ in range(config.num_trajectories)
    ]
    truth = graph.adjacency()
    rows = []
    for fam in (config.family, Family.EXPONENTIAL.value):
        stream = sequential_posterior_update(
            trajs,
            cards,
            Family(fam),
            StructurePriors(),
            config.max_indegree,
            config.edge_log_penalty,
        )
        for j, post in enumerate(stream, start=1):
            em = post.edge_marginals()
            rows.append(
                {
                    "graph": g,
                    "family": fam,
                    "num_trajectories": j,
                    "auroc": auroc(em, truth),
                    "aupr": aupr(em, truth),
                }
            )
    return rows


def structure_experiment(config: ExperimentConfig) -> "ExperimentResult":
    """Structure-recovery study: AUROC/AUPR vs trajectory count, vs baseline."""
    details = []
    for chunk in _map_replicates(_structure_graph, config, range(config.num_graphs)):
        details.extend(chunk)
    table = _aggregate_metric_rows(details, ["family", "num_trajectories"])
    return ExperimentResult("structure", config, table, details)


# ---------------------------------------------------------- shape sweep ----


def _sweep_cell(config: ExperimentConfig, cell: tuple) -> list[dict]:
    shape_idx, g = cell
    shape = config.shapes[shape_idx]
    rng = np.random.default_rng([config.seed, shape_idx, g])
    cards = (config.cardinality,) * config.num_nodes
    family = Family(config.family)
    if FAMILY_ARITY[family] != 2:
        raise ModelError("the shape sweep needs a two-parameter family")
    graph = _nondegenerate_graph(config.num_nodes, config.max_indegree, rng)
    model = random_model(graph, cards, family, rng, fixed_shape=shape)
    trajs = [
        gillespie(model, config.horizon, rng=rng)
        for _ in range(config.sweep_trajectories)
    ]
    truth = graph.adjacency()
    rows = []
    for fam in (config.family, Family.EXPONENTIAL.value):
        post = graph_posterior(
            trajs, cards, Family(fam), StructurePriors(), config.max_indegree,
            config.edge_log_penalty,
        )
        em = post.edge_marginals()
        rows.append(
            {
                "shape": shape,
                "graph": g,
                "family": fam,
                "auroc": auroc(em, truth),
                "aupr": aupr(em, truth),
            }
        )
    return rows


def shape_sweep(config: ExperimentConfig) -> "ExperimentResult":
    """Structure recovery as the true shape moves away from memorylessness."""
    cells = [
        (i, g) for i in range(len(config.shapes)) for g in range(config.sweep_graphs)
    ]
    details = []
    for chunk in _map_replicates(_sweep_cell, config, cells):
        details.extend(chunk)
    table = _aggregate_metric_rows(details, ["shape", "family"])
    return ExperimentResult("shape-sweep", config, table, details)


# ------------------------------------------------------------- plumbing ----


def _map_replicates(fn, config: ExperimentConfig, ids):
    """Run fn(config, id) over ids, optionally in worker processes.

    Results are yielded in id order regardless of completion order, so the
    thread count never changes the output.
    """
    ids = list(ids)
    if config.threads <= 1 or len(ids) <= 1:
        for i in ids:
            yield fn(config, i)
        return
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(fn, config, i) for i in ids]
        for fut in futures:
            yield fut.result()


def _aggregate_metric_rows(details, group_fields) -> list[dict]:
    groups = {}
    for row in details:
        groups.setdefault(tuple(row[f] for f in group_fields), []).append(row)
    table = []
    for key in sorted(groups):
        sel = groups[key]
        out = dict(zip(group_fields, key))
        out["count"] = len(sel)
        for metric in ("auroc", "aupr"):
            vals = np.asarray([r[metric] for r in sel])
            q20, q50, q80 = np.quantile(vals, [0.2, 0.5, 0.8])
            out[f"{metric}_q20"] = float(q20)
            out[f"{metric}_q50"] = float(q50)
            out[f"{metric}_q80"] = float(q80)
        table.append(out)
    return table


@dataclass
class ExperimentResult:
    kind: str
    config: ExperimentConfig
    table: list
    details: list

    def write(self, outdir) -> None:
        """Write config.json, table.csv, details.csv (deterministic bytes)."""
        import csv
        import os

        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "config.json"), "w", encoding="utf-8") as fh:
            json.dump({"kind": self.kind, **asdict(self.config)}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name, rows in (("table.csv", self.table), ("details.csv", self.details)):
            path = os.path.join(outdir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                if not rows:
                    fh.write("\n")
                    continue
                writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                writer.writerows(rows)


def run_experiment(kind: str, config: ExperimentConfig) -> ExperimentResult:
    runners = {
        "mse": mse_experiment,
        "structure": structure_experiment,
        "shape-sweep": shape_sweep,
    }
    if kind not in runners:
        raise ModelError(f"unknown experiment kind {kind!r}")
    return runners[kind](config)
