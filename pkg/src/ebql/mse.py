"""Bias, variance and MSE of the weighted double estimator.

Closed forms hold for independent Gaussian arms.  With ``N`` draws per arm of
which ``n_index`` pick the arm and the remaining ``N - n_index`` value it, and
``p_a`` the probability that arm ``a`` is picked::

    bias = sum_a (mu_a - mu_max) p_a
    var  = sum_a (sigma_a^2 / (N - n_index) + mu_a^2) p_a - (sum_a mu_a p_a)^2
    mse  = sum_a (sigma_a^2 / (N - n_index) + (mu_max - mu_a)^2) p_a

For two arms ``p_a`` is a normal CDF; for more arms it comes from simulation.
:func:`monte_carlo_estimator_stats` is the brute-force reference for all of it.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError, UnsupportedDimensionError
from .stats import RngState, as_rng, normal_cdf

ESTIMATOR_KINDS = ("SE", "DE", "WDE", "EE")
# Upper bound on floats drawn per Monte Carlo chunk; fixes the chunk layout
# (and therefore the streams) independently of the worker count.
_CHUNK_FLOATS = 2_000_000


@dataclass(frozen=True)
class GaussianSpec:
    means: tuple
    stds: tuple

    def __post_init__(self):
        means = tuple(float(m) for m in np.atleast_1d(self.means))
        stds = np.atleast_1d(np.asarray(self.stds, dtype=float))
        if stds.size == 1 and len(means) > 1:
            stds = np.repeat(stds, len(means))
        stds = tuple(float(s) for s in stds)
        if len(means) == 0 or len(means) != len(stds):
            raise InvalidParameterError("means and stds must be nonempty and of equal length")
        if not all(math.isfinite(m) for m in means):
            raise InvalidParameterError("means must be finite")
        if not all(s > 0 and math.isfinite(s) for s in stds):
            raise InvalidParameterError("stds must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def m(self) -> int:
        return len(self.means)

    @property
    def max_mean(self) -> float:
        return max(self.means)

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    def canonical(self):
        """Copy with means sorted descending, plus ``order`` with ``sorted[i] = self[order[i]]``."""
        order = tuple(int(i) for i in np.argsort(-np.asarray(self.means), kind="stable"))
        spec = GaussianSpec(tuple(self.means[i] for i in order), tuple(self.stds[i] for i in order))
        return spec, order

    def shifted(self, c: float) -> "GaussianSpec":
        return GaussianSpec(tuple(m + c for m in self.means), self.stds)

    @classmethod
    def evenly_spread(cls, m: int, gap: float, std: float, top: float = 0.0) -> "GaussianSpec":
        """``m`` arms with means evenly spaced on ``[top - gap, top]``."""
        if m == 1:
            return cls((top,), (std,))
        return cls(tuple(np.linspace(top, top - gap, m)), (std,) * m)


@dataclass(frozen=True)
class WdeStatistics:
    """Estimator statistics; the ``*_se`` fields are set only for Monte Carlo results."""

    bias: float
    variance: float
    mse: float
    argmax_probs: tuple
    bias_se: Optional[float] = None
    variance_se: Optional[float] = None
    mse_se: Optional[float] = None
    argmax_se: Optional[tuple] = None
    # bias measured against the best arm's own mean-phase average (paired
    # control variate); same expectation as ``bias``, far less noise.
    paired_bias: Optional[float] = None
    paired_bias_se: Optional[float] = None
    trials: int = 0


@dataclass(frozen=True)
class SplitCurve:
    N: int
    n_index: np.ndarray = field(repr=False)
    mse: np.ndarray = field(repr=False)
    n_index_star: int = 0

    @property
    def ratio_star(self) -> float:
        return self.n_index_star / self.N


def _check_split(N, n_index, continuous=False):
    if continuous:
        if not 0 < n_index < N:
            raise InvalidParameterError(f"n_index must lie in (0, {N}), got {n_index}")
    elif not (1 <= n_index <= N - 1 and float(n_index).is_integer()):
        raise InvalidParameterError(f"n_index must be an integer in [1, {N - 1}], got {n_index}")


def argmax_probability_2gauss(spec: GaussianSpec, n_index) -> tuple:
    """Probability that each of two Gaussian arms has the larger ``n_index``-sample mean."""
    if spec.m != 2:
        raise UnsupportedDimensionError(f"closed form covers exactly 2 arms, got {spec.m}")
    if n_index < 1:
        raise InvalidParameterError("n_index must be at least 1")
    (mu0, mu1), (s0, s1) = spec.means, spec.stds
    z = math.sqrt(n_index) * (mu0 - mu1) / math.hypot(s0, s1)
    # Lowest-index tie breaking has probability zero for continuous draws.
    return (normal_cdf(z), normal_cdf(-z))


def _argmax_counts(spec: GaussianSpec, n_index_grid, trials, rng: RngState):
    """Argmax counts of simulated ``n`` -sample means, one row per grid entry.

    The empirical mean of ``n`` Gaussian draws is exactly N(mu, sigma^2 / n),
    so a single standard normal per arm and trial suffices.  The same normals
    are reused for every grid entry (common random numbers).
    """
    mu = np.asarray(spec.means)
    sd = np.asarray(spec.stds)
    grid = np.asarray(n_index_grid, dtype=float)
    counts = np.zeros((grid.size, spec.m), dtype=np.int64)
    chunk = max(1, _CHUNK_FLOATS // spec.m)
    for c, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        z = rng.child(c).generator.standard_normal((size, spec.m))
        for g, n in enumerate(grid):
            idx = np.argmax(mu + z * (sd / math.sqrt(n)), axis=1)
            counts[g] += np.bincount(idx, minlength=spec.m)
    return counts


def argmax_probability_mc(spec: GaussianSpec, n_index: int, trials: int, rng=None):
    """Simulated argmax frequencies and their standard errors (two arrays of length m)."""
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    if n_index < 1:
        raise InvalidParameterError("n_index must be at least 1")
    counts = _argmax_counts(spec, [n_index], trials, as_rng(rng))[0]
    p = counts / trials
    return p, np.sqrt(p * (1 - p) / trials)


def wde_statistics(spec: GaussianSpec, N: int, n_index: int, probs: Sequence[float]) -> WdeStatistics:
    _check_split(N, n_index)
    p = np.asarray(probs, dtype=float)
    if p.shape != (spec.m,) or np.any(p < -1e-15) or abs(p.sum() - 1) > 1e-9:
        raise InvalidParameterError("probs must be m nonnegative values summing to 1")
    mu = np.asarray(spec.means)
    noise = np.asarray(spec.stds) ** 2 / (N - n_index)
    gaps = spec.max_mean - mu
    bias = float(-(gaps * p).sum())
    mean = float((mu * p).sum())
    # Centred second moment: same quantity as E[X^2] - E[X]^2 without the
    # cancellation when the means are large.
    variance = float(((noise + (mu - mean) ** 2) * p).sum())
    mse = float(((noise + gaps ** 2) * p).sum())
    if abs(mse - (variance + bias ** 2)) > 1e-12 * max(1.0, mse):
        raise ArithmeticError("mse != variance + bias^2")
    return WdeStatistics(bias, variance, mse, tuple(float(x) for x in p))


def _equal_sigma_pair(spec: GaussianSpec):
    if spec.m != 2:
        raise UnsupportedDimensionError(f"expected 2 arms, got {spec.m}")
    s0, s1 = spec.stds
    if s0 != s1:
        raise UnsupportedDimensionError("unequal stds; use wde_statistics instead")
    return abs(spec.means[0] - spec.means[1]), s0


def wde_mse_2gauss(spec: GaussianSpec, N: int, n_index: float) -> float:
    """Scalar MSE for two equal-variance Gaussians; ``n_index`` may be fractional."""
    delta, sigma = _equal_sigma_pair(spec)
    _check_split(N, n_index, continuous=True)
    # delta^2 (1 - Phi(x)) written as delta^2 Phi(-x) to keep the tail exact.
    x = delta * math.sqrt(n_index) / (math.sqrt(2.0) * sigma)
    return sigma ** 2 / (N - n_index) + delta ** 2 * normal_cdf(-x)


def wde_mse_derivative(spec: GaussianSpec, N: int, n_index: float) -> float:
    delta, sigma = _equal_sigma_pair(spec)
    _check_split(N, n_index, continuous=True)
    first = sigma ** 2 / (N - n_index) ** 2
    second = delta ** 3 / (4 * sigma * math.sqrt(math.pi * n_index))
    return first - second * math.exp(-(delta ** 2) * n_index / (4 * sigma ** 2))


def optimal_split(spec: GaussianSpec, N: int, prob_source: str = "closed-form",
                  trials: int = 100_000, rng=None) -> SplitCurve:
    """Exhaustive scan of ``n_index`` over ``1..N-1``; ties go to the smallest."""
    if N < 4:
        raise InvalidParameterError("N must be at least 4")
    grid = np.arange(1, N)
    if prob_source == "closed-form":
        probs = [argmax_probability_2gauss(spec, n) for n in grid]
    elif prob_source == "monte-carlo":
        probs = _argmax_counts(spec, grid, trials, as_rng(rng)) / trials
    else:
        raise InvalidParameterError(f"unknown prob_source {prob_source!r}")
    mse = np.array([wde_statistics(spec, N, int(n), p).mse for n, p in zip(grid, probs)])
    return SplitCurve(N, grid, mse, int(grid[np.argmin(mse)]))


def _check_kind(kind, N, param):
    if kind not in ESTIMATOR_KINDS:
        raise InvalidParameterError(f"kind must be one of {ESTIMATOR_KINDS}, got {kind!r}")
    if kind == "DE" and N % 2:
        raise InvalidParameterError("DE needs an even N")
    if kind == "WDE":
        _check_split(N, param)
    if kind == "EE" and (param is None or param < 2 or N % param):
        raise InvalidParameterError(f"EE needs K >= 2 dividing N, got K={param}")


def _estimates_chunk(args):
    means, stds, kind, N, param, size, seed, key = args
    rng = RngState(seed, key)
    mu = np.asarray(means)
    sd = np.asarray(stds)
    m = mu.size
    x = mu[None, :, None] + sd[None, :, None] * rng.generator.standard_normal((size, m, N))
    best = int(np.argmax(mu))
    rows = np.arange(size)
    if kind == "SE":
        means_all = x.mean(axis=2)
        idx = np.argmax(means_all, axis=1)
        return means_all[rows, idx], idx, means_all[:, best]
    if kind == "EE":
        sub = x.reshape(size, m, param, N // param).mean(axis=3)
        idx = np.argmax(sub[:, :, 0], axis=1)
        value = sub[:, :, 1:].mean(axis=2)
        return value[rows, idx], idx, value[:, best]
    n_index = N // 2 if kind == "DE" else int(param)
    idx = np.argmax(x[:, :, :n_index].mean(axis=2), axis=1)
    value = x[:, :, n_index:].mean(axis=2)
    return value[rows, idx], idx, value[:, best]


def monte_carlo_estimates(spec: GaussianSpec, kind: str, N: int, param=None,
                          trials: int = 1_000_000, rng=None, jobs: int = 1):
    """Per-trial ``(estimate, chosen_index, best_arm_reference)`` arrays.

    Each trial draws N fresh samples per arm.  Since draws are i.i.d., the
    random partition is taken as contiguous blocks: the first block selects
    the arm (``n_index`` draws for WDE, N/2 for DE, N/K for EE) and the rest
    value it.  ``best_arm_reference`` is the truly best arm's value computed
    the same way; its expectation is the true maximum.

    Trial ``t`` belongs to a fixed chunk with its own child stream, so the
    output does not depend on ``jobs``.
    """
    _check_kind(kind, N, param)
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    rng = as_rng(rng)
    chunk = max(1, _CHUNK_FLOATS // (spec.m * N))
    tasks = [
        (spec.means, spec.stds, kind, N, param, min(chunk, trials - start), rng.seed, rng.spawn_key + (c,))
        for c, start in enumerate(range(0, trials, chunk))
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_estimates_chunk, tasks))
    else:
        parts = [_estimates_chunk(t) for t in tasks]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def monte_carlo_estimator_stats(spec: GaussianSpec, kind: str, N: int, param=None,
                                trials: int = 1_000_000, rng=None, jobs: int = 1) -> WdeStatistics:
    est, idx, ref = monte_carlo_estimates(spec, kind, N, param, trials, rng, jobs)
    T = est.size
    target = spec.max_mean
    err = est - target
    bias = float(err.mean())
    centred = est - est.mean()
    variance = float(centred.var(ddof=1)) if T > 1 else 0.0
    m4 = float((centred ** 4).mean())
    sq = err ** 2
    paired = est - ref
    p = np.bincount(idx, minlength=spec.m) / T
    root = math.sqrt(T)
    return WdeStatistics(
        bias=bias,
        variance=variance,
        mse=float(sq.mean()),
        argmax_probs=tuple(float(x) for x in p),
        bias_se=float(est.std(ddof=1) / root) if T > 1 else 0.0,
        variance_se=math.sqrt(max(m4 - variance ** 2, 0.0) / T),
        mse_se=float(sq.std(ddof=1) / root) if T > 1 else 0.0,
        argmax_se=tuple(float(x) for x in np.sqrt(p * (1 - p) / T)),
        paired_bias=float(paired.mean()),
        paired_bias_se=float(paired.std(ddof=1) / root) if T > 1 else 0.0,
        trials=T,
    )


@dataclass(frozen=True)
class SnrReport:
    N: int
    sigma: float
    snr: tuple
    n_index_star: tuple
    low_snr_ok: bool
    high_snr_ok: bool
    below_half_ok: bool

    @property
    def max_ratio(self) -> float:
        return max(self.n_index_star) / self.N

    @property
    def ok(self) -> bool:
        return self.low_snr_ok and self.high_snr_ok and self.below_half_ok


def snr_asymptote_check(N: int, snr_values: Sequence[float], sigma: float) -> SnrReport:
    """Optimal split for two Gaussians across SNR values, with the limit claims flagged.

    ``low_snr_ok`` / ``high_snr_ok`` check that the smallest and largest SNR
    in the sweep give an optimum of 1; ``below_half_ok`` that every optimum is
    below N/2.
    """
    if N % 2 or N <= 10:
        raise InvalidParameterError("N must be even and larger than 10")
    if not snr_values:
        raise InvalidParameterError("snr_values must be nonempty")
    snr = tuple(float(s) for s in snr_values)
    stars = []
    for s in snr:
        delta = s * sigma / math.sqrt(N)
        stars.append(optimal_split(GaussianSpec((delta, 0.0), (sigma, sigma)), N).n_index_star)
    lo, hi = int(np.argmin(snr)), int(np.argmax(snr))
    return SnrReport(
        N, sigma, snr, tuple(stars),
        low_snr_ok=stars[lo] == 1,
        high_snr_ok=stars[hi] == 1,
        below_half_ok=all(2 * k < N for k in stars),
    )
