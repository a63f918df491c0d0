"""Seeded experiment runs and their CSV outputs.

Every run is a pure function of its configuration and seed.  A chain run uses
three child streams of ``RngState(seed)``: 0 picks the chain at each reset,
1 draws terminal rewards, 2 drives the agent (exploration and ensemble member
choice).  Different algorithms with the same seed therefore face the same
sequence of chains.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .agents import DoubleQLearning, EnsembleBootstrappedQLearning, QLearning, bias_probe
from .chain import Node, reset, step, true_q
from .config import ExperimentConfig, dumps
from .csvio import emit_csv
from .mse import (
    GaussianSpec,
    argmax_probability_2gauss,
    monte_carlo_estimator_stats,
    optimal_split,
    wde_statistics,
    _argmax_counts,
)
from .stats import RngState

EPISODE_SCHEMA = (
    ("run_id", str), ("seed", int), ("episode", int), ("chain_index", int), ("chain_mean", float),
    ("greedy_action", int), ("correct", int), ("bias_probe", float),
)
AGGREGATE_SCHEMA = (
    ("algorithm", str), ("episode", int),
    ("rate_all", float), ("se_all", float), ("n_all", int),
    ("rate_neg", float), ("se_neg", float), ("n_neg", int),
    ("rate_pos", float), ("se_pos", float), ("n_pos", int),
)
SUMMARY_SCHEMA = (
    ("algorithm", str), ("window_start", int), ("n_seeds", int),
    ("final_rate_all", float), ("final_rate_all_se", float),
    ("final_rate_neg", float), ("final_rate_pos", float),
    ("terminal_bias", float), ("terminal_bias_se", float),
)
BIAS_SCHEMA = (("algorithm", str), ("episode", int), ("bias_mean", float), ("bias_se", float))
BIAS_SUMMARY_SCHEMA = (
    ("algorithm", str), ("window_start", int), ("terminal_bias", float), ("terminal_bias_se", float),
)
MSE_CURVE_SCHEMA = (
    ("delta", float), ("snr", float), ("n_index", int), ("ratio", float), ("mse", float), ("is_minimizer", int),
)
MSE_MIN_SCHEMA = (("delta", float), ("snr", float), ("n_index_star", int), ("ratio_star", float))
SPLIT_SWEEP_SCHEMA = (
    ("m", int), ("gap", float), ("normalized_gap", float), ("n_index_star", int), ("ratio_star", float),
    ("prob_source", str),
)
ESTIMATOR_SCHEMA = (
    ("estimator", str), ("param", int), ("n_index", int), ("trials", int),
    ("bias", float), ("bias_se", float), ("variance", float), ("variance_se", float),
    ("mse", float), ("mse_se", float), ("paired_bias", float), ("paired_bias_se", float),
    ("closed_bias", float), ("closed_variance", float), ("closed_mse", float),
)


def algorithm_labels(cfg: ExperimentConfig) -> list[str]:
    labels = []
    for name in cfg.algorithms:
        if name == "EBQL":
            labels += [f"EBQL-K{k}" for k in cfg.ensemble_sizes]
        else:
            labels.append(name)
    return labels


def make_agent(label: str, cfg: ExperimentConfig):
    common = dict(gamma=cfg.gamma, lr_exponent=cfg.lr_exponent, exploration=cfg.exploration, epsilon=cfg.epsilon)
    if label == "QL":
        return QLearning(**common)
    if label == "DQL":
        return DoubleQLearning(coin=cfg.dql_coin, **common)
    if label.startswith("EBQL-K"):
        return EnsembleBootstrappedQLearning(n_members=int(label[6:]), **common)
    raise ValueError(f"unknown algorithm label {label!r}")


@dataclass
class RunTrace:
    """Per-episode measurements of one (algorithm, seed) run, taken at episode start."""

    label: str
    seed: int
    chain_index: np.ndarray
    greedy_action: np.ndarray
    correct: np.ndarray
    bias: np.ndarray


def train_run(label: str, seed: int, cfg: ExperimentConfig) -> RunTrace:
    env = cfg.meta_chain()
    agent = make_agent(label, cfg)
    agent.initialize(env.n_states, env.max_actions, env.action_counts())
    root = RngState(seed)
    reset_rng, reward_rng, agent_rng = root.child(0), root.child(1), root.child(2)
    truths = [true_q(c, cfg.gamma) for c in env.chains]
    n = cfg.episodes
    chains = np.empty(n, dtype=np.int64)
    greedy = np.empty(n, dtype=np.int64)
    correct = np.empty(n, dtype=np.int64)
    bias = np.empty(n)
    n_chains = len(env.chains)
    for e in range(n):
        total = 0.0
        for i, chain in enumerate(env.chains):
            total += bias_probe(agent, i, chain, cfg.gamma)
        bias[e] = total / n_chains
        state = reset(env, reset_rng)
        chains[e] = state.chain_index
        g = agent.greedy_action(state.index)
        greedy[e] = g
        correct[e] = truths[state.chain_index].is_correct(g)
        while state.node is not Node.TERMINAL:
            action = agent.act(state.index, agent_rng)
            t = step(state, action, env, reward_rng)
            agent.update(t, agent_rng)
            state = t.next_state
    return RunTrace(label, seed, chains, greedy, correct, bias)


def _train_task(args):
    return train_run(*args)


def simulate(cfg: ExperimentConfig) -> dict:
    """All (algorithm, seed) runs, as ``{label: [RunTrace per seed]}``."""
    labels = algorithm_labels(cfg)
    tasks = [(label, seed, cfg) for label in labels for seed in cfg.run_seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            traces = list(pool.map(_train_task, tasks, chunksize=1))
    else:
        traces = [_train_task(t) for t in tasks]
    out = {label: [] for label in labels}
    for tr in traces:
        out[tr.label].append(tr)
    return out


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def terminal_window(episodes: int) -> int:
    """First episode of the final 10% window."""
    return episodes - max(1, episodes // 10)


def final_rates(traces, means, window_start):
    """Per-seed correct-action rate over the final window: (all, neg, pos) arrays."""
    means = np.asarray(means)
    out = {"all": [], "neg": [], "pos": []}
    for tr in traces:
        c = tr.correct[window_start:]
        mu = means[tr.chain_index[window_start:]]
        out["all"].append(c.mean())
        out["neg"].append(c[mu < 0].mean() if np.any(mu < 0) else math.nan)
        out["pos"].append(c[mu > 0].mean() if np.any(mu > 0) else math.nan)
    return {k: np.array(v) for k, v in out.items()}


def terminal_bias(traces, window_start) -> np.ndarray:
    return np.array([tr.bias[window_start:].mean() for tr in traces])


def episode_records(tr: RunTrace, means) -> list[dict]:
    return [
        {
            "run_id": f"{tr.label}-seed{tr.seed}", "seed": tr.seed, "episode": e,
            "chain_index": int(tr.chain_index[e]), "chain_mean": float(means[tr.chain_index[e]]),
            "greedy_action": int(tr.greedy_action[e]), "correct": int(tr.correct[e]),
            "bias_probe": float(tr.bias[e]),
        }
        for e in range(tr.correct.size)
    ]


def aggregate_records(label: str, per_seed: list[list[dict]]) -> list[dict]:
    """Fold per-seed episode records into per-episode means and standard errors."""
    rows = []
    for e in range(len(per_seed[0])):
        recs = [seed_recs[e] for seed_recs in per_seed]
        row = {"algorithm": label, "episode": e}
        for tag, keep in (("all", lambda r: True), ("neg", lambda r: r["chain_mean"] < 0),
                          ("pos", lambda r: r["chain_mean"] > 0)):
            vals = [r["correct"] for r in recs if keep(r)]
            row[f"rate_{tag}"], row[f"se_{tag}"] = _mean_se(vals)
            row[f"n_{tag}"] = len(vals)
        rows.append(row)
    return rows


def bias_records(label: str, per_seed: list[list[dict]]) -> list[dict]:
    rows = []
    for e in range(len(per_seed[0])):
        m, s = _mean_se([seed_recs[e]["bias_probe"] for seed_recs in per_seed])
        rows.append({"algorithm": label, "episode": e, "bias_mean": m, "bias_se": s})
    return rows


def _write_manifest(out: Path, cfg: ExperimentConfig, files):
    out.mkdir(parents=True, exist_ok=True)
    # out and jobs do not affect results; leaving them out keeps the tree
    # byte-identical across output locations and worker counts.
    (out / "config.ini").write_text(dumps(cfg, omit=("out", "jobs")), encoding="utf-8")
    manifest = {"kind": cfg.kind, "seeds": list(cfg.run_seeds), "files": sorted(str(f.relative_to(out)) for f in files)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_chain_experiment(cfg: ExperimentConfig, results=None) -> dict:
    """Train every configured algorithm on every seed and write the CSVs.

    Outputs under ``<out>/chain-train``: ``per_seed/<label>_seed<seed>.csv``,
    ``aggregate.csv`` (rate per episode split by sign of the chain mean),
    ``summary.csv`` (final-window rates and terminal bias) and ``plot_chain.py``.
    Returns the simulation traces.
    """
    results = simulate(cfg) if results is None else results
    means = np.asarray(cfg.chain_means)
    out = Path(cfg.out) / "chain-train"
    files, agg, summary = [], [], []
    start = terminal_window(cfg.episodes)
    for label, traces in results.items():
        per_seed = []
        for tr in traces:
            recs = episode_records(tr, means)
            per_seed.append(recs)
            files.append(emit_csv(recs, EPISODE_SCHEMA, out / "per_seed" / f"{label}_seed{tr.seed}.csv"))
        agg += aggregate_records(label, per_seed)
        rates = final_rates(traces, means, start)
        b_mean, b_se = _mean_se(terminal_bias(traces, start))
        r_mean, r_se = _mean_se(rates["all"])
        summary.append({
            "algorithm": label, "window_start": start, "n_seeds": len(traces),
            "final_rate_all": r_mean, "final_rate_all_se": r_se,
            "final_rate_neg": _mean_se(rates["neg"][~np.isnan(rates["neg"])])[0],
            "final_rate_pos": _mean_se(rates["pos"][~np.isnan(rates["pos"])])[0],
            "terminal_bias": b_mean, "terminal_bias_se": b_se,
        })
    files.append(emit_csv(agg, AGGREGATE_SCHEMA, out / "aggregate.csv"))
    files.append(emit_csv(summary, SUMMARY_SCHEMA, out / "summary.csv"))
    files.append(plotting.write_chain_script(out / "plot_chain.py", cfg.smoothing))
    _write_manifest(out, cfg, files)
    return results


def run_bias_trace(cfg: ExperimentConfig, results=None) -> dict:
    """Chain-averaged bias of the optimal action at A, per episode and algorithm.

    Writes ``<out>/bias-trace/bias.csv``, ``bias_summary.csv`` (mean over the
    final 10% of episodes) and ``plot_bias.py``.
    """
    results = simulate(cfg) if results is None else results
    means = np.asarray(cfg.chain_means)
    out = Path(cfg.out) / "bias-trace"
    rows, summary = [], []
    start = terminal_window(cfg.episodes)
    for label, traces in results.items():
        rows += bias_records(label, [episode_records(tr, means) for tr in traces])
        m, s = _mean_se(terminal_bias(traces, start))
        summary.append({"algorithm": label, "window_start": start, "terminal_bias": m, "terminal_bias_se": s})
    files = [
        emit_csv(rows, BIAS_SCHEMA, out / "bias.csv"),
        emit_csv(summary, BIAS_SUMMARY_SCHEMA, out / "bias_summary.csv"),
        plotting.write_bias_script(out / "plot_bias.py", cfg.smoothing),
    ]
    _write_manifest(out, cfg, files)
    return results


def mse_curve_records(cfg: ExperimentConfig):
    """Split-ratio MSE curves for two Gaussians with variance ``sigma2``, one per gap."""
    N, sigma = cfg.split_n, math.sqrt(cfg.sigma2)
    curve_rows, min_rows = [], []
    for delta in cfg.deltas:
        curve = optimal_split(GaussianSpec((delta, 0.0), (sigma, sigma)), N)
        snr = delta / (sigma / math.sqrt(N))
        for n1, mse in zip(curve.n_index, curve.mse):
            curve_rows.append({
                "delta": delta, "snr": snr, "n_index": int(n1), "ratio": n1 / N, "mse": float(mse),
                "is_minimizer": int(n1 == curve.n_index_star),
            })
        min_rows.append({"delta": delta, "snr": snr, "n_index_star": curve.n_index_star, "ratio_star": curve.ratio_star})
    return curve_rows, min_rows


def split_sweep_records(cfg: ExperimentConfig):
    """Optimal split ratio against the normalised gap ``gap / (sigma sqrt(m))``.

    Means are evenly spread over ``[-gap, 0]``.  Two arms use the closed-form
    selection probabilities; more arms use simulated ones.
    """
    N, sigma = cfg.split_n, math.sqrt(cfg.sigma2)
    root = RngState(cfg.seed)
    rows = []
    for i, m in enumerate(cfg.split_arms):
        for j, normalized in enumerate(cfg.gaps):
            gap = normalized * sigma * math.sqrt(m)
            spec = GaussianSpec.evenly_spread(m, gap, sigma)
            if m == 2:
                curve, source = optimal_split(spec, N), "closed-form"
            else:
                curve = optimal_split(spec, N, "monte-carlo", cfg.split_trials, root.child(i).child(j))
                source = "monte-carlo"
            rows.append({
                "m": m, "gap": gap, "normalized_gap": normalized, "n_index_star": curve.n_index_star,
                "ratio_star": curve.ratio_star, "prob_source": source,
            })
    return rows


def run_mse_curve(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out) / "mse-curve"
    curve_rows, min_rows = mse_curve_records(cfg)
    files = [
        emit_csv(curve_rows, MSE_CURVE_SCHEMA, out / "mse_curve.csv"),
        emit_csv(min_rows, MSE_MIN_SCHEMA, out / "mse_minimizers.csv"),
        plotting.write_mse_curve_script(out / "plot_mse_curve.py"),
    ]
    _write_manifest(out, cfg, files)
    return out


def run_split_sweep(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out) / "split-sweep"
    files = [
        emit_csv(split_sweep_records(cfg), SPLIT_SWEEP_SCHEMA, out / "split_sweep.csv"),
        plotting.write_split_sweep_script(out / "plot_split_sweep.py"),
    ]
    _write_manifest(out, cfg, files)
    return out


def run_mse_figures(cfg: ExperimentConfig) -> list[Path]:
    return [run_mse_curve(cfg), run_split_sweep(cfg)]


def _closed_form(spec: GaussianSpec, N: int, n_index: int, trials: int, rng: RngState):
    if spec.m == 2:
        probs = argmax_probability_2gauss(spec, n_index)
    else:
        probs = _argmax_counts(spec, [n_index], trials, rng)[0] / trials
    return wde_statistics(spec, N, n_index, probs)


def estimator_records(cfg: ExperimentConfig) -> list[dict]:
    spec, N = cfg.gaussian_spec(), cfg.samples
    root = RngState(cfg.seed)
    rows = []
    for i, kind in enumerate(cfg.estimators):
        param = {"SE": 0, "DE": 2, "WDE": cfg.n_index, "EE": cfg.ensemble_k}[kind]
        n_index = {"SE": N, "DE": N // 2, "WDE": cfg.n_index, "EE": N // max(cfg.ensemble_k, 1)}[kind]
        stats = monte_carlo_estimator_stats(
            spec, kind, N, param if kind in ("WDE", "EE") else None, cfg.trials, root.child(i), cfg.jobs
        )
        closed = (math.nan,) * 3
        if kind != "SE":
            c = _closed_form(spec, N, n_index, cfg.split_trials, root.child(100 + i))
            closed = (c.bias, c.variance, c.mse)
        rows.append({
            "estimator": kind, "param": param, "n_index": n_index, "trials": stats.trials,
            "bias": stats.bias, "bias_se": stats.bias_se, "variance": stats.variance,
            "variance_se": stats.variance_se, "mse": stats.mse, "mse_se": stats.mse_se,
            "paired_bias": stats.paired_bias, "paired_bias_se": stats.paired_bias_se,
            "closed_bias": closed[0], "closed_variance": closed[1], "closed_mse": closed[2],
        })
    return rows


def run_estimator_stats(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out) / "estimate"
    files = [emit_csv(estimator_records(cfg), ESTIMATOR_SCHEMA, out / "estimator_stats.csv")]
    _write_manifest(out, cfg, files)
    return out
