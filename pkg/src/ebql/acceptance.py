"""Acceptance checks, runnable from pytest or ``ebql verify``.

Each check returns a :class:`CheckResult`; tolerances and trial counts are
fixed here and never adapted to the outcome.
"""
from __future__ import annotations

import filecmp
import functools
import math
import tempfile
import warnings
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .agents import DoubleQLearning, EnsembleBootstrappedQLearning
from .chain import MetaChainConfig, Node, reset, step
from .config import ExperimentConfig
from .estimators import ensemble_estimator, weighted_double_estimator
from .experiment import final_rates, run_chain_experiment, simulate, terminal_bias, terminal_window
from .mse import (
    GaussianSpec,
    argmax_probability_2gauss,
    monte_carlo_estimator_stats,
    optimal_split,
    snr_asymptote_check,
    wde_mse_2gauss,
    wde_mse_derivative,
    wde_statistics,
)
from .stats import RngState, SampleSet, partition_samples

MC_TRIALS = 1_000_000


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _timed(key, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, detail = fn(*args, **kwargs)
            return CheckResult(key, title, bool(passed), detail, time.perf_counter() - t0)
        run.key = key
        return run
    return wrap


@_timed("1", "proxy identity EE == W-DE")
def check_proxy_identity(n_instances=1000, seed=1):
    rng = RngState(seed)
    worst, mismatched = 0.0, 0
    for i in range(n_instances):
        r = rng.child(i)
        g = r.generator
        m = int(g.integers(1, 9))
        K = int(g.integers(2, 11))
        N = K * int(g.integers(2, 51))
        samples = SampleSet.gaussian(g.normal(0, 2, m), g.uniform(0.1, 3, m), N, r)
        part = partition_samples(samples, K, r)
        k = int(g.integers(0, K))
        ee = ensemble_estimator(samples, part, k)
        wde = weighted_double_estimator(samples, part.subsets[k], part.complement(k))
        mismatched += ee.chosen_index != wde.chosen_index
        worst = max(worst, abs(ee.estimate - wde.estimate))
    return mismatched == 0 and worst <= 1e-12, f"{n_instances} instances, max |EE - W-DE| = {worst:.2e}"


def _z(value, se):
    return value / se if se > 0 else math.copysign(math.inf, value)


@_timed("2", "estimator bias signs")
def check_bias_signs(trials=MC_TRIALS, seed=2):
    root = RngState(seed)
    notes, ok = [], True
    equal = GaussianSpec((0.0,) * 4, (1.0,) * 4)
    se = monte_carlo_estimator_stats(equal, "SE", 20, None, trials, root.child(0))
    z = _z(se.paired_bias, se.paired_bias_se)
    ok &= z >= 5
    notes.append(f"equal SE z={z:.1f}")
    for j, (kind, param) in enumerate((("DE", None), ("EE", 5))):
        st = monte_carlo_estimator_stats(equal, kind, 20, param, trials, root.child(1 + j))
        z = _z(st.bias, st.bias_se)
        ok &= abs(z) <= 3
        notes.append(f"equal {kind} z={z:+.2f}")
    gap = GaussianSpec((0.5, 0.0), (0.5, 0.5))
    for j, (kind, param, sign) in enumerate((("SE", None, 1), ("DE", None, -1), ("EE", 2, -1), ("EE", 5, -1))):
        st = monte_carlo_estimator_stats(gap, kind, 10, param, trials, root.child(10 + j))
        z = _z(st.paired_bias, st.paired_bias_se)
        ok &= sign * z >= 5
        label = kind if param is None else f"{kind}{param}"
        notes.append(f"gap {label} z={z:+.1f} (plain {_z(st.bias, st.bias_se):+.1f})")
    return ok, "; ".join(notes)


def _random_two_gauss(g):
    top = g.uniform(-1, 1)
    delta = g.uniform(0.05, 1.0)
    means = [top, top - delta]
    stds = list(g.uniform(0.3, 1.0, 2))
    if g.random() < 0.5:
        means.reverse()
    N = 2 * int(g.integers(5, 21))
    n1 = int(g.integers(1, N))
    return GaussianSpec(tuple(means), tuple(stds)), N, n1


@_timed("3", "closed-form MSE vs Monte Carlo")
def check_closed_form_vs_mc(n_instances=20, trials=MC_TRIALS, seed=3):
    root = RngState(seed)
    failures, worst = [], 0.0
    for i in range(n_instances):
        spec, N, n1 = _random_two_gauss(root.child(i).generator)
        cf = wde_statistics(spec, N, n1, argmax_probability_2gauss(spec, n1))
        mc = monte_carlo_estimator_stats(spec, "WDE", N, n1, trials, root.child(1000 + i))
        for name in ("bias", "variance", "mse"):
            c, e, s = getattr(cf, name), getattr(mc, name), getattr(mc, f"{name}_se")
            tol = max(0.02 * abs(c), 3 * s)
            worst = max(worst, abs(c - e) / tol)
            if abs(c - e) > tol:
                failures.append(f"#{i} {name}: closed {c:.5g} vs MC {e:.5g} (tol {tol:.2g})")
    detail = f"{n_instances} instances x 3 statistics, worst gap/tolerance = {worst:.2f}"
    return not failures, detail + ("; " + "; ".join(failures) if failures else "")


@_timed("4", "optimal split below N/2")
def check_split_below_half():
    deltas = np.logspace(-3, 1, 10)
    sigmas = np.logspace(-2, 1, 10)
    bad, worst = [], 0.0
    for N in (12, 20, 50, 100):
        for d in deltas:
            for s in sigmas:
                star = optimal_split(GaussianSpec((d, 0.0), (s, s)), N).n_index_star
                worst = max(worst, star / N)
                if not 2 * star < N:
                    bad.append((N, d, s, star))
    return not bad, f"400 scans, max optimal ratio {worst:.3f}" + (f"; violations {bad[:5]}" if bad else "")


@_timed("5", "SNR limits and maximal split ratio")
def check_snr_limits():
    notes, ok = [], True
    for N in (12, 20, 50, 100):
        rep = snr_asymptote_check(N, [1e-3, 1e3], 0.5)
        ok &= rep.n_index_star == (1, 1)
        notes.append(f"N={N}: {rep.n_index_star}")
    sweep = snr_asymptote_check(100, list(np.logspace(-1, 2, 301)), 0.5)
    ok &= sweep.max_ratio <= 0.41 and sweep.below_half_ok
    notes.append(f"sweep N=100 max ratio {sweep.max_ratio:.2f}")
    return ok, "; ".join(notes)


def _central_difference(f, x, h):
    """Central difference at steps h and h/2, Richardson-combined (error O(h^4))."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


@_timed("6", "MSE derivative vs finite differences")
def check_derivative(n_points=50, seed=6):
    g = RngState(seed).generator
    worst = 0.0
    for _ in range(n_points):
        sigma = g.uniform(0.2, 2.0)
        delta = g.uniform(0.0, 2.0)
        N = int(g.integers(10, 201))
        h = 1e-5 * N
        n1 = g.uniform(1.0, N - 1.0)
        spec = GaussianSpec((delta, 0.0), (sigma, sigma))
        fd = _central_difference(lambda x: wde_mse_2gauss(spec, N, x), n1, h)
        an = wde_mse_derivative(spec, N, n1)
        worst = max(worst, abs(fd - an) / abs(an))
    return worst <= 1e-6, f"{n_points} points, worst relative error {worst:.2e}"


def _paired_runs(seed, episodes, env):
    dql = DoubleQLearning(coin="fair").initialize(env.n_states, env.max_actions, env.action_counts())
    ebql = EnsembleBootstrappedQLearning(n_members=2).initialize(env.n_states, env.max_actions, env.action_counts())
    for agent in (dql, ebql):
        root = RngState(seed)
        r_reset, r_reward, r_agent = root.child(0), root.child(1), root.child(2)
        for _ in range(episodes):
            state = reset(env, r_reset)
            while state.node is not Node.TERMINAL:
                t = step(state, agent.act(state.index, r_agent), env, r_reward)
                agent.update(t, r_agent)
                state = t.next_state
    return dql, ebql


@_timed("7", "EBQL(K=2) bit-identical to DQL")
def check_k2_equals_dql(n_streams=100, episodes=200):
    env = MetaChainConfig.from_means()
    identical = 0
    for seed in range(n_streams):
        dql, ebql = _paired_runs(seed, episodes, env)
        a, b = ebql.ensemble_.members
        identical += dql.qa_ == a and dql.qb_ == b
    return identical == n_streams, f"{identical}/{n_streams} seeded streams identical ({episodes} episodes each)"


# Criterion 8 setup: 5000 episodes x 50 seeds with the default chain parameters.
def _chain_cfg(**kw):
    return ExperimentConfig(kind="chain-train", **kw)


@functools.lru_cache(maxsize=None)
def _chain_results(which):
    if which == "neg":
        cfg = _chain_cfg(chain_means=(-0.2,), algorithms=("QL", "DQL"))
    elif which == "pos":
        cfg = _chain_cfg(chain_means=(0.2,), algorithms=("QL", "DQL"))
    else:
        cfg = _chain_cfg(algorithms=("QL", "DQL", "EBQL"), ensemble_sizes=(3, 10, 25))
    return cfg, simulate(cfg)


def _final(which, label):
    cfg, res = _chain_results(which)
    return final_rates(res[label], cfg.chain_means, terminal_window(cfg.episodes))["all"]


def _paired_test(better, worse):
    diff = better - worse
    if np.all(diff == 0):
        return 1.0
    # near-constant differences (rates pinned at 1.0) trip scipy's precision
    # warning; the p-value is still the one reported
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(sps.ttest_rel(better, worse, alternative="greater").pvalue)


@_timed("8a", "mean -0.2 chain: DQL final rate > QL (paired p < 0.05)")
def check_neg_chain():
    q, d = _final("neg", "QL"), _final("neg", "DQL")
    p = _paired_test(d, q)
    return d.mean() > q.mean() and p < 0.05, f"DQL {d.mean():.4f} vs QL {q.mean():.4f}, p={p:.3g}"


@_timed("8b", "mean +0.2 chain: QL final rate > DQL (paired p < 0.05)")
def check_pos_chain():
    q, d = _final("pos", "QL"), _final("pos", "DQL")
    p = _paired_test(q, d)
    return q.mean() > d.mean() and p < 0.05, f"QL {q.mean():.4f} vs DQL {d.mean():.4f}, p={p:.3g}"


@_timed("8c", "meta-chain: EBQL(K=10) final rate >= QL and DQL")
def check_meta_chain():
    e, q, d = _final("meta", "EBQL-K10"), _final("meta", "QL"), _final("meta", "DQL")
    ok = e.mean() >= q.mean() and e.mean() >= d.mean()
    return ok, f"EBQL-K10 {e.mean():.4f}, QL {q.mean():.4f}, DQL {d.mean():.4f}"


def _terminal_bias(label):
    cfg, res = _chain_results("meta")
    b = terminal_bias(res[label], terminal_window(cfg.episodes))
    return b.mean(), b.std(ddof=1) / math.sqrt(b.size)


@_timed("8d", "terminal bias sign: QL > 0, DQL < 0")
def check_bias_sign():
    (q, qs), (d, ds) = _terminal_bias("QL"), _terminal_bias("DQL")
    return q > 0 and d < 0, f"QL {q:+.4f} (se {qs:.4f}), DQL {d:+.4f} (se {ds:.4f})"


@_timed("8e", "|EBQL bias| at K=25 < at K=3")
def check_bias_vs_k():
    (b3, s3), (b25, s25) = _terminal_bias("EBQL-K3"), _terminal_bias("EBQL-K25")
    return abs(b25) < abs(b3), f"K=3 {b3:+.4f} (se {s3:.4f}), K=25 {b25:+.4f} (se {s25:.4f})"


def _same_tree(a: Path, b: Path):
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if files_a != files_b:
        return False, len(files_a)
    same = all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)
    return same, len(files_a)


@_timed("9", "chain-train output is byte-identical across runs")
def check_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            run_chain_experiment(_chain_cfg(chain_means=(-0.2,), algorithms=("QL", "DQL"), out=str(out)))
            outs.append(out)
        same, n = _same_tree(outs[0] / "chain-train", outs[1] / "chain-train")
    return same, f"{n} files compared"


@_timed("10", "Atari experiments declared out of scope")
def check_out_of_scope():
    mentions = [c.__name__ for c in CHECKS if "atari" in (c.__doc__ or "").lower() + c.__name__.lower()]
    return not mentions, "no check targets the Atari results (not reproducible at desk scale)"


CHECKS = (
    check_proxy_identity, check_bias_signs, check_closed_form_vs_mc, check_split_below_half,
    check_snr_limits, check_derivative, check_k2_equals_dql, check_neg_chain, check_pos_chain,
    check_meta_chain, check_bias_sign, check_bias_vs_k, check_determinism, check_out_of_scope,
)


def run_all(only=None, echo=print) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        if only and check.key not in only and check.key.rstrip("abcde") not in only:
            continue
        result = check()
        results.append(result)
        if echo:
            echo(result.line())
    return results
