"""End-to-end acceptance suite: one test per shipped guarantee.

Each test states its protocol and tolerance inline and runs against public
interfaces only, so a pass/fail line per test doubles as the release
checklist.  The two experiment-scale tests (parameter recovery, structure
recovery) also enforce their wall-clock budgets.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose
from scipy import integrate
from scipy import stats as sstats

from clockctbn import (
    Family,
    Graph,
    InvGammaPrior,
    KeyStats,
    Model,
    SurvivalParams,
    all_keys,
    gillespie,
    global_log_density,
    global_log_survival,
    hazard,
    log_romberg,
    log_survival,
    rayleigh_log_marginal,
    rayleigh_posterior_update,
    sample_truncated,
    stats_log_likelihood,
    suff_stats,
    total_hazard,
    trajectory_log_likelihood,
)
from clockctbn.experiments import ExperimentConfig, random_graph, random_model, run_experiment
from clockctbn.gnw import ingest
from clockctbn.io import dump_model, dump_trajectories
from clockctbn.params import negative_log_likelihood_and_grad

FIXTURES = Path(__file__).parent / "fixtures"

FAMILY_POINTS = {
    Family.EXPONENTIAL: (1.3,),
    Family.WEIBULL: (2.5, 1.7),
    Family.GAMMA: (3.2, 1.4),
    Family.RAYLEIGH: (0.8,),
}


def run_cli(args, cwd=None):
    """Invoke the installed CLI in a subprocess and capture bytes."""
    code = "import sys; from clockctbn.cli import main; sys.exit(main(sys.argv[1:]))"
    return subprocess.run(
        [sys.executable, "-c", code, *args], capture_output=True, cwd=cwd
    )


# 1. Holding-time kernels reproduce their analytic laws, fresh and aged.
def test_kernel_sampling_matches_analytic_law():
    t0 = time.time()
    n = 100_000
    tau = 0.7
    for fam, params in FAMILY_POINTS.items():
        p = SurvivalParams(fam, params)
        rng = np.random.default_rng(1000 + hash(fam.value) % 1000)
        fresh = np.array([sample_truncated(p, 0.0, rng) for _ in range(n)])
        cdf = lambda s, p=p: 1.0 - np.exp(log_survival(p, s))
        stat = sstats.kstest(fresh, cdf).statistic
        assert stat < 0.01, f"{fam.value}: untruncated KS {stat:.4f}"
        aged = np.array([sample_truncated(p, tau, rng) for _ in range(n)])
        base = log_survival(p, tau)
        cond = lambda s, p=p, base=base: 1.0 - np.exp(log_survival(p, tau + s) - base)
        stat = sstats.kstest(aged, cond).statistic
        assert stat < 0.01, f"{fam.value}: truncated KS {stat:.4f}"
    assert time.time() - t0 < 30.0


# 2. The exit rate is the negative slope of the log survival, all families.
def test_hazard_equals_negative_log_survival_slope():
    grid = np.linspace(0.2, 4.0, 50)
    for fam, params in FAMILY_POINTS.items():
        p = SurvivalParams(fam, params)
        for s in grid:
            h = 1e-5 * s
            fd = -(log_survival(p, s + h) - log_survival(p, s - h)) / (2.0 * h)
            rel = abs(fd - hazard(p, s)) / abs(hazard(p, s))
            assert rel < 1e-6, f"{fam.value} at s={s:.2f}: rel {rel:.2e}"


def two_node_model(family, phi_values):
    graph = Graph.from_edges(2, [(0, 1)])
    cards = (2, 2)
    phi, theta = {}, {}
    for key, params in zip(all_keys(graph, cards), phi_values):
        phi[key] = SurvivalParams(family, params)
        row = [0.0, 0.0]
        row[1 - key[1]] = 1.0
        theta[key] = tuple(row)
    return Model(graph, cards, family, phi, theta)


def reference_ctmc_first_jumps(model, n, rng):
    """Textbook competing-exponentials sampler from the all-zero state."""
    state = (0, 0)
    rates = np.array([model.phi[model.key_of(m, state)].params[0] for m in range(2)])
    total = rates.sum()
    times = rng.exponential(1.0 / total, size=n)
    winners = rng.choice(2, size=n, p=rates / total)
    return times, winners


# 3. Simulator first-jump law and winner frequencies match the global law;
#    the all-exponential special case matches a reference CTMC sampler.
def test_two_node_first_jump_law_and_winner_frequencies():
    n = 100_000
    model = two_node_model(
        Family.WEIBULL,
        [(1.8, 1.2), (2.2, 0.9), (3.0, 2.0), (1.5, 0.6), (2.8, 1.1), (1.2, 2.4)],
    )
    state, clocks = (0, 0), (0.0, 0.0)
    rng = np.random.default_rng(31)
    trajs = [gillespie(model, 50.0, rng=rng, max_events=1) for _ in range(n)]
    assert all(t.events for t in trajs)
    times = np.array([t.events[0].t for t in trajs])
    winners = np.array([t.events[0].node for t in trajs])

    cdf = lambda s: 1.0 - np.exp(global_log_survival(model, state, clocks, s))
    stat = sstats.kstest(times, cdf).statistic
    assert stat < 0.01, f"first-jump KS {stat:.4f}"

    keys = [model.key_of(m, state) for m in range(2)]

    def winner_density(s, node):
        lam = hazard(model.phi[keys[node]], s)
        share = lam / total_hazard(model, state, clocks, s)
        return share * math.exp(float(global_log_density(model, state, clocks, s)))

    probs = np.array(
        [integrate.quad(winner_density, 0.0, np.inf, args=(m,))[0] for m in range(2)]
    )
    assert_allclose(probs.sum(), 1.0, rtol=1e-6)
    counts = np.array([np.sum(winners == 0), np.sum(winners == 1)])
    p = sstats.chisquare(counts, f_exp=n * probs / probs.sum()).pvalue
    assert p > 0.01, f"winner frequency chi2 p={p:.4f}"

    # memoryless special case against an independent reference sampler
    expo = two_node_model(
        Family.EXPONENTIAL, [(1.3,), (0.7,), (2.0,), (0.5,), (1.1,), (3.0,)]
    )
    trajs = [gillespie(expo, 50.0, rng=rng, max_events=1) for _ in range(n)]
    times = np.array([t.events[0].t for t in trajs])
    winners = np.array([t.events[0].node for t in trajs])
    ref_t, ref_w = reference_ctmc_first_jumps(expo, n, rng)
    stat = sstats.ks_2samp(times, ref_t).statistic
    assert stat < 0.01, f"exponential two-sample KS {stat:.4f}"
    rates = np.array([1.3, 2.0])
    stat = sstats.kstest(times, lambda s: 1.0 - np.exp(-rates.sum() * s)).statistic
    assert stat < 0.01, f"exponential analytic KS {stat:.4f}"
    counts = np.array([np.sum(winners == 0), np.sum(winners == 1)])
    p = sstats.chisquare(counts, f_exp=n * rates / rates.sum()).pvalue
    assert p > 0.01, f"exponential winner chi2 p={p:.4f}"
    table = np.array(
        [counts, [np.sum(ref_w == 0), np.sum(ref_w == 1)]]
    )
    p = sstats.chi2_contingency(table).pvalue
    assert p > 0.01, f"winner contingency vs reference p={p:.4f}"


# 4. Path measure factorizes: the window product equals the per-key
#    sufficient-statistics likelihood plus the embedded-chain term.
def test_window_product_equals_stats_plus_embedded_chain():
    rng = np.random.default_rng(404)
    count = 0
    for fam in Family:
        for _ in range(25):
            graph = random_graph(3, 2, rng)
            cards = (2, 3, 2)
            model = random_model(graph, cards, fam, rng)
            traj = gillespie(model, 4.0, rng=rng)
            via_windows = trajectory_log_likelihood(traj, model)
            stats = suff_stats(traj, graph, cards)
            via_stats = 0.0
            for key, ks in stats.items():
                via_stats += stats_log_likelihood(ks, model.phi[key])
                for x, c in enumerate(ks.targets):
                    if c:
                        via_stats += c * math.log(model.theta[key][x])
            assert_allclose(via_stats, via_windows, rtol=1e-9)
            count += 1
    assert count == 100


# 5. Rayleigh conjugate updates agree with the grid posterior and the
#    closed-form marginal agrees with quadrature.
def test_rayleigh_conjugacy_against_grid_and_quadrature():
    rng = np.random.default_rng(55)
    prior = InvGammaPrior(1.2, 0.8)
    for fixture in range(20):
        ks = KeyStats(
            full=list(rng.uniform(0.2, 2.0, 3 + fixture % 6)),
            cens=list(rng.uniform(0.1, 1.5, 4)),
            trunc=list(rng.uniform(0.05, 0.8, 2)),
            targets=np.array([0, 3 + fixture % 6]),
        )
        post = rayleigh_posterior_update(prior, ks)
        grid = np.linspace(0.05, 6.0, 100)
        logw = np.array(
            [
                stats_log_likelihood(ks, SurvivalParams(Family.RAYLEIGH, (float(v),)))
                + prior.log_pdf(float(v))
                for v in grid
            ]
        )
        cell = grid[1] - grid[0]
        numeric = np.exp(logw - logw.max())
        numeric /= numeric.sum() * cell
        analytic = np.exp(post.log_pdf(grid))
        analytic /= analytic.sum() * cell
        assert np.max(np.abs(numeric - analytic)) < 1e-6

        closed = rayleigh_log_marginal(prior, ks)

        def log_integrand(y, ks=ks):
            sig = np.exp(y)
            out = np.array(
                [
                    stats_log_likelihood(ks, SurvivalParams(Family.RAYLEIGH, (float(v),)))
                    for v in sig
                ]
            )
            return out + prior.log_pdf(sig) + y

        numeric = log_romberg(log_integrand, math.log(1e-4), math.log(1e4))
        assert abs(closed - numeric) < 1e-4


# 6. Point estimates converge: median squared error falls strictly with the
#    transition budget and lands under 10% relative error at 10^4.
def test_map_error_decreases_with_sample_size():
    t0 = time.time()
    cfg = ExperimentConfig(seed=42, replicates=20, sizes=(100, 1000, 10000))
    res = run_experiment("mse", cfg)
    by_role = {}
    for row in res.table:
        by_role.setdefault(row["role"], {})[row["size"]] = row
    for role in ("shape", "rate"):
        medians = [by_role[role][size]["q50"] for size in (100, 1000, 10000)]
        assert medians[0] > medians[1] > medians[2], f"{role}: {medians}"
        rel = by_role[role][10000]["median_relative_error"]
        assert rel < 0.10, f"{role}: median relative error {rel:.4f}"
    assert time.time() - t0 < 600.0


# 7. Structure recovery: the matching-family posterior identifies edges the
#    memoryless baseline misses on strongly non-exponential data.
def test_structure_recovery_beats_exponential_baseline():
    t0 = time.time()
    cfg = ExperimentConfig(seed=101, num_graphs=20, num_trajectories=100, horizon=5.0)
    res = run_experiment("structure", cfg)
    final = {
        (r["family"], r["graph"]): r["auroc"]
        for r in res.details
        if r["num_trajectories"] == cfg.num_trajectories
    }
    med_aug = float(np.median([final[("weibull", g)] for g in range(20)]))
    med_base = float(np.median([final[("exponential", g)] for g in range(20)]))
    assert med_aug >= 0.9, f"augmented median AUROC {med_aug:.3f}"
    assert med_aug - med_base >= 0.1, f"gap {med_aug - med_base:.3f}"
    assert time.time() - t0 < 1800.0


# 8. The recovery advantage grows with the true shape and vanishes in the
#    memoryless corner.
def test_shape_sweep_gap_grows_with_shape():
    cfg = ExperimentConfig(seed=303, sweep_graphs=10, sweep_trajectories=50, horizon=5.0)
    res = run_experiment("shape-sweep", cfg)
    aug = {(r["shape"], r["graph"]): r["auroc"] for r in res.details if r["family"] == "weibull"}
    base = {
        (r["shape"], r["graph"]): r["auroc"]
        for r in res.details
        if r["family"] == "exponential"
    }
    med_gap, ks, gaps = {}, [], []
    for k in cfg.shapes:
        cell = [aug[(k, g)] - base[(k, g)] for g in range(cfg.sweep_graphs)]
        med_gap[k] = float(np.median(cell))
        ks.extend([k] * len(cell))
        gaps.extend(cell)
    assert abs(med_gap[1.0]) <= 0.1, f"gap at shape 1: {med_gap[1.0]:+.3f}"
    assert med_gap[9.0] > med_gap[1.0], f"{med_gap}"
    rho, p = sstats.spearmanr(ks, gaps)
    assert rho > 0 and p < 0.05, f"trend rho={rho:.3f} p={p:.2e}"


# 9. Analytic objective gradients match central differences at random
#    interior parameter points.
def test_analytic_gradients_match_central_differences():
    rng = np.random.default_rng(99)
    for fam in Family:
        ks = KeyStats(
            full=list(rng.uniform(0.2, 2.0, 8)),
            cens=list(rng.uniform(0.1, 1.5, 5)),
            trunc=list(rng.uniform(0.05, 0.8, 3)),
            targets=np.array([0, 8]),
        )
        fg = negative_log_likelihood_and_grad(ks, fam)
        arity = len(FAMILY_POINTS[fam])
        for _ in range(100):
            x = np.exp(rng.uniform(math.log(0.3), math.log(20.0), arity))
            _, grad = fg(x)
            for i in range(arity):
                h = 1e-4 * x[i]
                hi, lo = x.copy(), x.copy()
                hi[i] += h
                lo[i] -= h
                fd = (fg(hi)[0] - fg(lo)[0]) / (2.0 * h)
                rel = abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-6)
                assert rel < 1e-5, f"{fam.value} at {x}: coord {i} rel {rel:.2e}"


# 10. Time-series ingestion is byte-exact, including the epsilon ordering of
#     a simultaneous crossing.
def test_tsv_ingestion_is_byte_exact(tmp_path):
    golden = (FIXTURES / "gnw_golden.jsonl").read_bytes()
    trajs = ingest(FIXTURES / "gnw_timeseries.tsv", threshold=0.5, min_transitions=8)
    out = tmp_path / "ingested.jsonl"
    dump_trajectories(trajs, out)
    assert out.read_bytes() == golden
    text = golden.decode()
    assert '"t": 2.0}' in text and '"t": 2.000000001}' in text


# 11. Every stochastic CLI subcommand is byte-deterministic under a fixed seed.
def test_stochastic_cli_runs_are_byte_identical(tmp_path):
    model = two_node_model(
        Family.WEIBULL, [(2.0, 1.0), (2.0, 1.0), (3.0, 2.0), (1.5, 0.5), (3.0, 2.0), (1.5, 0.5)]
    )
    model_path = tmp_path / "model.json"
    dump_model(model, model_path)

    args = ["sample", "--model", str(model_path), "--end-time", "3.0", "--seed", "9", "--count", "3"]
    first, second = run_cli(args), run_cli(args)
    assert first.returncode == 0 and second.returncode == 0
    assert first.stdout == second.stdout and first.stdout

    configs = {
        "mse": {"seed": 5, "replicates": 2, "sizes": [30, 60]},
        "structure": {"seed": 5, "num_graphs": 2, "num_trajectories": 5, "horizon": 2.0},
        "shape-sweep": {
            "seed": 5,
            "shapes": [1, 3],
            "sweep_graphs": 2,
            "sweep_trajectories": 4,
            "horizon": 2.0,
        },
    }
    for kind, cfg in configs.items():
        cfg_path = tmp_path / f"{kind}.json"
        cfg_path.write_text(json.dumps(cfg))
        outs = []
        for run in ("a", "b"):
            out_dir = tmp_path / f"{kind}-{run}"
            res = run_cli(
                ["experiment", kind, "--config", str(cfg_path), "--out", str(out_dir)]
            )
            assert res.returncode == 0, res.stderr.decode()
            outs.append(
                {f.name: f.read_bytes() for f in sorted(out_dir.iterdir())}
            )
        assert outs[0].keys() == outs[1].keys()
        for name in outs[0]:
            assert outs[0][name] == outs[1][name], f"{kind}: {name} differs"
