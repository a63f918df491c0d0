"""Seeded randomness, Gaussian sampling, the normal CDF and sample partitioning.

Randomness is driven by numpy's ``PCG64`` bit generator seeded through a
``SeedSequence``.  Child streams are derived by appending an integer to the
sequence's ``spawn_key``, so ``RngState(42).child(3)`` always yields the same
stream no matter how many other children were created or in what order.
Gaussian variates come from ``Generator.standard_normal`` (ziggurat); streams
are bit-exact for a fixed numpy version.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InvalidParameterError, InvalidPartitionError

_UINT64_MAX = 2**64 - 1
_BLOCK = 1024


class RngState:
    """Reproducible random stream identified by ``(seed, spawn_key)``.

    ``generator`` is a plain :class:`numpy.random.Generator` for vectorised
    draws.  The scalar helpers :meth:`uniform`, :meth:`normal` and
    :meth:`randbelow` read from pre-drawn blocks, which keeps tight Python
    loops fast; they are deterministic given the sequence of calls.
    """

    def __init__(self, seed: int, spawn_key: Sequence[int] = ()):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
            raise InvalidParameterError(f"seed must be an integer, got {seed!r}")
        seed = int(seed)
        if not 0 <= seed <= _UINT64_MAX:
            raise InvalidParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(int(k) for k in spawn_key)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(seq))
        self._uniforms: list[float] = []
        self._normals: list[float] = []

    def child(self, index: int) -> "RngState":
        """Independent stream number ``index`` below this one."""
        if index < 0:
            raise InvalidParameterError("child index must be nonnegative")
        return RngState(self.seed, self.spawn_key + (index,))

    def uniform(self) -> float:
        if not self._uniforms:
            self._uniforms = self.generator.random(_BLOCK).tolist()[::-1]
        return self._uniforms.pop()

    def normal(self) -> float:
        if not self._normals:
            self._normals = self.generator.standard_normal(_BLOCK).tolist()[::-1]
        return self._normals.pop()

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` from one buffered uniform."""
        k = int(self.uniform() * n)
        return k if k < n else n - 1

    def __repr__(self):
        return f"RngState(seed={self.seed}, spawn_key={self.spawn_key})"


def seed_rng(seed: int) -> RngState:
    return RngState(seed)


def as_rng(rng) -> RngState:
    """Accept an ``RngState``, an integer seed, or ``None`` (seed 0)."""
    if isinstance(rng, RngState):
        return rng
    if rng is None:
        return RngState(0)
    return RngState(rng)


def sample_gaussian(rng: RngState, mean: float, std: float, n: int) -> np.ndarray:
    if not std > 0:
        raise InvalidParameterError(f"std must be positive, got {std}")
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    return mean + std * rng.generator.standard_normal(n)


def normal_cdf(x: float) -> float:
    """Standard normal CDF through ``erfc``; accurate to double precision."""
    if not math.isfinite(x):
        raise InvalidParameterError(f"x must be finite, got {x}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def empirical_mean(samples) -> float:
    values = list(samples)
    if not values:
        raise InvalidParameterError("empirical_mean of an empty list")
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class SampleSet:
    """``values[a, n]`` is sample ``n`` of arm ``a``; every arm has N samples."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidParameterError(
                "samples must be an (m, N) array with m >= 1 arms and N >= 1 samples per arm"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_arms(cls, arms) -> "SampleSet":
        arms = [list(a) for a in arms]
        if len({len(a) for a in arms}) > 1:
            raise InvalidParameterError("all arms must hold the same number of samples")
        return cls(np.array(arms, dtype=float))

    @classmethod
    def gaussian(cls, means, stds, n: int, rng: RngState) -> "SampleSet":
        means = np.asarray(means, dtype=float)
        stds = np.broadcast_to(np.asarray(stds, dtype=float), means.shape)
        if np.any(stds <= 0):
            raise InvalidParameterError("stds must be positive")
        z = rng.generator.standard_normal((means.size, n))
        return cls(means[:, None] + stds[:, None] * z)

    @property
    def n_arms(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def arm_mean(self, arm: int, indices=None) -> float:
        row = self.values[arm]
        return empirical_mean(row if indices is None else row[np.asarray(indices)])


@dataclass(frozen=True)
class Partition:
    """K disjoint, equal-sized index subsets covering ``range(N)``.

    The same index lists apply to every arm.
    """

    subsets: tuple

    def __post_init__(self):
        subsets = tuple(np.sort(np.asarray(s, dtype=np.intp)) for s in self.subsets)
        if len(subsets) < 2:
            raise InvalidParameterError("a partition needs at least two subsets")
        sizes = {s.size for s in subsets}
        if len(sizes) != 1 or 0 in sizes:
            raise InvalidPartitionError("subsets must be nonempty and of equal size")
        everything = np.concatenate(subsets)
        if np.unique(everything).size != everything.size:
            raise InvalidPartitionError("subsets overlap")
        if everything.min() != 0 or everything.max() != everything.size - 1:
            raise InvalidPartitionError("subsets must cover 0..N-1")
        object.__setattr__(self, "subsets", subsets)

    @property
    def K(self) -> int:
        return len(self.subsets)

    @property
    def n_samples(self) -> int:
        return sum(s.size for s in self.subsets)

    def complement(self, k: int) -> np.ndarray:
        """Sorted indices of every subset except ``k``."""
        return np.sort(np.concatenate([s for j, s in enumerate(self.subsets) if j != k]))


def partition_samples(samples: SampleSet, K: int, rng: RngState) -> Partition:
    N = samples.n_samples
    if K < 2:
        raise InvalidParameterError(f"K must be at least 2, got {K}")
    if N % K:
        raise InvalidPartitionError(f"K={K} does not divide N={N}")
    perm = rng.generator.permutation(N)
    size = N // K
    return Partition(tuple(perm[k * size:(k + 1) * size] for k in range(K)))
