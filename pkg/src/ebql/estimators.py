"""Estimators of the largest expected value among independent arms.

Functional core (``single_estimator`` ... ``ensemble_estimator``) operates on
a :class:`~ebql.stats.SampleSet` plus a prebuilt partition, so randomness stays
outside the estimators.  The classes at the bottom wrap the same functions in
the scikit-learn estimator protocol; their ``fit`` takes an
``(n_samples, n_arms)`` array (rows are draws, columns are arms).

Every argmax breaks ties toward the lowest arm index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidParameterError
from .stats import Partition, SampleSet, as_rng, empirical_mean, partition_samples


@dataclass(frozen=True)
class MaxMeanEstimate:
    chosen_index: int
    estimate: float
    n_index_samples: int
    n_mean_samples: int


def _argmax(values) -> int:
    return int(np.argmax(np.asarray(values, dtype=float)))


def _arm_means(samples: SampleSet, indices) -> list[float]:
    return [samples.arm_mean(a, indices) for a in range(samples.n_arms)]


def single_estimator(samples: SampleSet) -> MaxMeanEstimate:
    means = _arm_means(samples, None)
    best = _argmax(means)
    N = samples.n_samples
    return MaxMeanEstimate(best, means[best], N, N)


def double_estimator(samples: SampleSet, partition: Partition, index_subset: int = 0) -> MaxMeanEstimate:
    """Pick the arm on one half of a two-way split, value it on the other half."""
    if partition.K != 2:
        raise InvalidParameterError(f"double_estimator needs a 2-way partition, got K={partition.K}")
    if index_subset not in (0, 1):
        raise InvalidParameterError("index_subset must be 0 or 1")
    return weighted_double_estimator(
        samples, partition.subsets[index_subset], partition.subsets[1 - index_subset]
    )


def weighted_double_estimator(samples: SampleSet, index_indices, mean_indices) -> MaxMeanEstimate:
    """Two-phase estimate with an arbitrary (possibly unequal) split.

    The arm is chosen by the empirical means over ``index_indices``; its value
    is the empirical mean over ``mean_indices``.
    """
    index_indices = np.asarray(index_indices, dtype=np.intp)
    mean_indices = np.asarray(mean_indices, dtype=np.intp)
    if index_indices.size == 0 or mean_indices.size == 0:
        raise InvalidParameterError("both index and mean index sets must be nonempty")
    N = samples.n_samples
    for ix in (index_indices, mean_indices):
        if ix.min() < 0 or ix.max() >= N or np.unique(ix).size != ix.size:
            raise InvalidParameterError("index sets must hold distinct indices in [0, N)")
    if np.intersect1d(index_indices, mean_indices).size:
        raise InvalidParameterError("index and mean index sets overlap")
    best = _argmax(_arm_means(samples, index_indices))
    return MaxMeanEstimate(
        best, samples.arm_mean(best, mean_indices), int(index_indices.size), int(mean_indices.size)
    )


def ensemble_estimator(samples: SampleSet, partition: Partition, k_tilde: int = 0) -> MaxMeanEstimate:
    """Pick the arm on subset ``k_tilde``; average its mean over the other K-1 subsets."""
    K = partition.K
    if K < 2:
        raise InvalidParameterError("ensemble_estimator needs K >= 2")
    if not 0 <= k_tilde < K:
        raise InvalidParameterError(f"k_tilde must lie in [0, {K}), got {k_tilde}")
    best = _argmax(_arm_means(samples, partition.subsets[k_tilde]))
    others = [samples.arm_mean(best, s) for j, s in enumerate(partition.subsets) if j != k_tilde]
    n_index = partition.subsets[k_tilde].size
    return MaxMeanEstimate(best, empirical_mean(others), int(n_index), int(partition.n_samples - n_index))


class _MaxMeanBase(BaseEstimator):
    def _validate(self, X) -> SampleSet:
        X = check_array(X, ensure_min_samples=1, ensure_min_features=1)
        return SampleSet(X.T)

    def _store(self, result: MaxMeanEstimate):
        self.chosen_index_ = result.chosen_index
        self.estimate_ = result.estimate
        self.n_index_samples_ = result.n_index_samples
        self.n_mean_samples_ = result.n_mean_samples
        return self

    def result(self) -> MaxMeanEstimate:
        check_is_fitted(self, "estimate_")
        return MaxMeanEstimate(self.chosen_index_, self.estimate_, self.n_index_samples_, self.n_mean_samples_)


class SingleEstimator(_MaxMeanBase):
    """Maximum of the per-arm empirical means (biased upward)."""

    def fit(self, X, y=None):
        samples = self._validate(X)
        self.n_arms_ = samples.n_arms
        return self._store(single_estimator(samples))


class DoubleEstimator(_MaxMeanBase):
    """Random two-way split: one half selects the arm, the other values it."""

    def __init__(self, index_subset=0, random_state=None):
        self.index_subset = index_subset
        self.random_state = random_state

    def fit(self, X, y=None):
        samples = self._validate(X)
        self.n_arms_ = samples.n_arms
        self.partition_ = partition_samples(samples, 2, as_rng(self.random_state))
        return self._store(double_estimator(samples, self.partition_, self.index_subset))


class WeightedDoubleEstimator(_MaxMeanBase):
    """Random split with ``n_index`` draws for arm selection (default N // 2)."""

    def __init__(self, n_index=None, random_state=None):
        self.n_index = n_index
        self.random_state = random_state

    def fit(self, X, y=None):
        samples = self._validate(X)
        N = samples.n_samples
        n_index = N // 2 if self.n_index is None else int(self.n_index)
        if not 1 <= n_index <= N - 1:
            raise InvalidParameterError(f"n_index must lie in [1, {N - 1}], got {n_index}")
        perm = as_rng(self.random_state).generator.permutation(N)
        self.n_arms_ = samples.n_arms
        self.index_indices_ = np.sort(perm[:n_index])
        self.mean_indices_ = np.sort(perm[n_index:])
        return self._store(weighted_double_estimator(samples, self.index_indices_, self.mean_indices_))


class EnsembleEstimator(_MaxMeanBase):
    """K-way split: subset ``k_tilde`` selects the arm, the rest jointly value it."""

    def __init__(self, n_members=5, k_tilde=0, random_state=None):
        self.n_members = n_members
        self.k_tilde = k_tilde
        self.random_state = random_state

    def fit(self, X, y=None):
        samples = self._validate(X)
        self.n_arms_ = samples.n_arms
        self.partition_ = partition_samples(samples, int(self.n_members), as_rng(self.random_state))
        return self._store(ensemble_estimator(samples, self.partition_, self.k_tilde))
