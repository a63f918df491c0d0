"""Maximum-expected-value estimators and ensemble bootstrapped Q-learning."""
from .estimators import (
    DoubleEstimator,
    EnsembleEstimator,
    MaxMeanEstimate,
    SingleEstimator,
    WeightedDoubleEstimator,
    double_estimator,
    ensemble_estimator,
    single_estimator,
    weighted_double_estimator,
)
from .stats import Partition, RngState, SampleSet, partition_samples, seed_rng

__version__ = "0.1.0"

__all__ = [
    "DoubleEstimator", "EnsembleEstimator", "MaxMeanEstimate", "SingleEstimator", "WeightedDoubleEstimator",
    "double_estimator", "ensemble_estimator", "single_estimator", "weighted_double_estimator",
    "Partition", "RngState", "SampleSet", "partition_samples", "seed_rng",
]
