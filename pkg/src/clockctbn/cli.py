"""Command-line interface.

Subcommands operate on the documented file formats (model JSON, trajectory
JSONL, experiment config JSON, GNW TSV) and write deterministic output, so a
fixed seed reproduces byte-identical files.  Exit codes: 0 success, 1 usage
error, 2 data or model error.  Set CLOCKCTBN_LOG=DEBUG|INFO|... to adjust
stderr logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import gnw, io
from .errors import ClockCtbnError, InsufficientDataError
from .experiments import ExperimentConfig, run_experiment
from .likelihood import suff_stats, trajectory_log_likelihood
from .model import all_keys, key_to_str
from .params import BoxPrior, dirichlet_mean, dirichlet_posterior, grid_log_posterior, map_estimate, param_grid
from .simulate import gillespie
from .structure import StructurePriors, aupr, auroc, graph_posterior
from .survival import Family

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract reserves 2 for data errors
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="clockctbn", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("sample", help="simulate trajectories from a model", parents=[])
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--end-time", type=float)
    p.add_argument("--max-events", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--init", help="comma-separated initial states (default all 0)")
    p.add_argument("--out", help="output JSONL (default stdout)")

    p = sub.add_parser("loglik", help="exact log-likelihood of trajectories")
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)

    p = sub.add_parser("stats", help="dump per-key sufficient statistics")
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)

    p = sub.add_parser("fit-params", help="MAP holding parameters per key")
    p.add_argument("--model", required=True, help="model JSON providing graph and cardinalities")
    p.add_argument("--traj", required=True)
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--box", nargs=2, type=float, default=(0.1, 100.0), metavar=("LO", "HI"))
    p.add_argument("--grid", type=int, help="also emit an N-per-dim grid posterior per key")
    p.add_argument("--out", help="output JSON (default stdout)")

    p = sub.add_parser("fit-structure", help="posterior over per-node parent sets")
    p.add_argument("--traj", required=True)
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--max-indegree", type=int, default=3)
    p.add_argument("--edge-penalty", type=float, default=1.0,
                   help="prior factor per parent (<1 sparsifies)")
    p.add_argument("--out", help="output JSON (default stdout)")

    p = sub.add_parser("score", help="AUROC/AUPR of edge scores against a truth graph")
    p.add_argument("--scores", required=True, help="JSON matrix or fit-structure output")
    p.add_argument("--truth", required=True, help="model JSON or {num_nodes, edges}")

    p = sub.add_parser("ingest-gnw", help="threshold GNW time series into trajectories")
    p.add_argument("--series", required=True)
    p.add_argument("--threshold", type=float, default=gnw.DEFAULT_THRESHOLD)
    p.add_argument("--min-transitions", type=int, default=gnw.DEFAULT_MIN_TRANSITIONS)
    p.add_argument("--out", help="output JSONL (default stdout)")

    p = sub.add_parser("experiment", help="run a synthetic study")
    p.add_argument("kind", choices=["mse", "structure", "shape-sweep"])
    p.add_argument("--config", required=True, help="config JSON (must carry a seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--threads", type=int)

    p = sub.add_parser("validate", help="check files against their format contracts")
    p.add_argument("--model")
    p.add_argument("--traj")
    p.add_argument("--series")

    return parser


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump_json(data, out_path=None):
    _emit(json.dumps(data, indent=2, sort_keys=True) + "\n", out_path)


def _cmd_sample(args) -> int:
    model = io.load_model(args.model)
    if args.end_time is None and args.max_events is None:
        raise UsageError("sample needs --end-time and/or --max-events")
    init = None
    if args.init:
        init = [int(v) for v in args.init.split(",")]
    rng = np.random.default_rng(args.seed)
    trajs = [
        gillespie(
            model,
            args.end_time,
            rng=rng,
            initial_state=init,
            max_events=args.max_events,
        )
        for _ in range(args.count)
    ]
    lines = []
    for traj in trajs:
        lines.extend(io.trajectory_to_lines(traj))
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_loglik(args) -> int:
    model = io.load_model(args.model)
    trajs = io.load_trajectories(args.traj)
    total, per_node = trajectory_log_likelihood(trajs, model, per_node=True)
    _dump_json(
        {
            "total": total,
            "per_node": [float(v) for v in per_node],
            "num_trajectories": len(trajs),
        }
    )
    return 0


def _cmd_stats(args) -> int:
    model = io.load_model(args.model)
    trajs = io.load_trajectories(args.traj)
    stats = suff_stats(trajs, model.graph, model.cardinalities)
    _dump_json(stats.to_dict())
    return 0


def _cmd_fit_params(args) -> int:
    model = io.load_model(args.model)
    trajs = io.load_trajectories(args.traj)
    family = Family(args.family) if args.family else model.family
    box = BoxPrior.default(family, args.box[0], args.box[1])
    stats = suff_stats(trajs, model.graph, model.cardinalities)
    estimates = {}
    grids = {}
    for key in all_keys(model.graph, model.cardinalities):
        name = key_to_str(key)
        ks = stats.stats.get(key)
        if ks is None:
            estimates[name] = {"phi": None, "theta": None, "error": "no observations"}
            continue
        conc = dirichlet_posterior(ks, key[1])
        entry = {"theta": [float(v) for v in dirichlet_mean(conc)]}
        try:
            entry["phi"] = list(map_estimate(ks, family, box))
        except InsufficientDataError as exc:
            entry["phi"] = None
            entry["error"] = str(exc)
            log.warning("key %s: %s", name, exc)
        estimates[name] = entry
        if args.grid and entry["phi"] is not None:
            grid = param_grid(box, args.grid)
            logp = grid_log_posterior(ks, family, grid)
            grids[name] = {
                "points": [[float(v) for v in row] for row in grid],
                "log_posterior": [float(v) for v in logp],
            }
    out = {"family": family.value, "estimates": estimates}
    if args.grid:
        out["grids"] = grids
    _dump_json(out, args.out)
    return 0


def _cmd_fit_structure(args) -> int:
    trajs = io.load_trajectories(args.traj)
    if not trajs:
        raise ClockCtbnError("no trajectories in input")
    num_nodes = trajs[0].num_nodes
    cards = [2] * num_nodes
    for tr in trajs:
        if tr.num_nodes != num_nodes:
            raise ClockCtbnError("trajectories disagree on node count")
        for n, x in enumerate(tr.initial):
            cards[n] = max(cards[n], x + 1)
        for ev in tr.events:
            cards[ev.node] = max(cards[ev.node], ev.state + 1)
    if args.edge_penalty <= 0.0:
        raise ClockCtbnError("--edge-penalty must be > 0")
    post = graph_posterior(
        trajs,
        tuple(cards),
        Family(args.family),
        StructurePriors(),
        args.max_indegree,
        math.log(args.edge_penalty),
    )
    _dump_json(
        {
            "family": args.family,
            "cardinalities": cards,
            "posteriors": [
                {
                    "node": n,
                    "sets": [list(ps) for ps in post.candidate_sets[n]],
                    "log_weights": [float(v) for v in post.log_weights[n]],
                }
                for n in range(num_nodes)
            ],
            "edge_marginals": [[float(v) for v in row] for row in post.edge_marginals()],
            "map_parent_sets": [list(ps) for ps in post.map_parent_sets()],
        },
        args.out,
    )
    return 0


def _load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        if "edge_marginals" in data:
            return np.asarray(data["edge_marginals"], dtype=float)
        if "adjacency" in data:
            return np.asarray(data["adjacency"], dtype=float)
        raise ClockCtbnError(f"{path}: expected a matrix, edge_marginals, or adjacency")
    return np.asarray(data, dtype=float)


def _load_truth(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "edges" in data:
        if "nodes" in data:
            n = len(data["nodes"])
        elif "num_nodes" in data:
            n = int(data["num_nodes"])
        else:
            raise ClockCtbnError(f"{path}: truth needs nodes or num_nodes")
        adj = np.zeros((n, n), dtype=int)
        for src, dst in data["edges"]:
            adj[int(src), int(dst)] = 1
        return adj
    return np.asarray(data if not isinstance(data, dict) else data.get("adjacency"), dtype=int)


def _cmd_score(args) -> int:
    scores = _load_matrix(args.scores)
    truth = _load_truth(args.truth)
    _dump_json({"auroc": auroc(scores, truth), "aupr": aupr(scores, truth)})
    return 0


def _cmd_ingest_gnw(args) -> int:
    trajs = gnw.ingest(args.series, args.threshold, args.min_transitions)
    lines = []
    for traj in trajs:
        lines.extend(io.trajectory_to_lines(traj))
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ClockCtbnError(f"{args.config}: {exc}") from None
    config = ExperimentConfig.from_dict(data)
    if args.paper_scale:
        config = config.paper_scale()
    if args.threads:
        from dataclasses import replace

        config = replace(config, threads=args.threads)
    result = run_experiment(args.kind, config)
    result.write(args.out)
    log.info("wrote %s results to %s", args.kind, args.out)
    return 0


def _cmd_validate(args) -> int:
    checked = False
    if args.model:
        io.load_model(args.model)
        print(f"model ok: {args.model}")
        checked = True
    if args.traj:
        trajs = io.load_trajectories(args.traj)
        from .model import validate_trajectory

        for tr in trajs:
            validate_trajectory(tr)
        print(f"trajectories ok: {args.traj} ({len(trajs)})")
        checked = True
    if args.series:
        gnw.load_timeseries(args.series)
        print(f"series ok: {args.series}")
        checked = True
    if not checked:
        raise UsageError("validate needs --model, --traj, and/or --series")
    return 0


_HANDLERS = {
    "sample": _cmd_sample,
    "loglik": _cmd_loglik,
    "stats": _cmd_stats,
    "fit-params": _cmd_fit_params,
    "fit-structure": _cmd_fit_structure,
    "score": _cmd_score,
    "ingest-gnw": _cmd_ingest_gnw,
    "experiment": _cmd_experiment,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    level = os.environ.get("CLOCKCTBN_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ClockCtbnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
