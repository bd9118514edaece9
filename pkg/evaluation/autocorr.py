from dataclasses import dataclass, field
import logging

import numpy as np

from netreplica.exceptions import EvaluationInputError
from .distributions import DEFAULT_BINS, jensen_distance

logger = logging.getLogger("evaluation")

DEFAULT_MAX_LAG = 7


@dataclass
class AutocorrelationProfile:
    """Autocorrelation coefficients per lag, one per usable sequence."""

    max_lag: int
    per_lag: dict = field(default_factory=dict)
    zero_variance: int = 0
    too_short: int = 0


def pearson_at_lag(sequence, lag):
    """Pearson correlation of sequence[:-lag] with sequence[lag:]; None when either side is constant."""
    head, tail = sequence[:-lag], sequence[lag:]
    if head.std() == 0 or tail.std() == 0:
        return None
    return float(np.corrcoef(head, tail)[0, 1])


def autocorrelation_profile(sequences, max_lag=DEFAULT_MAX_LAG):
    """
    Per-lag samples of autocorrelation over many sequences.

    Constant sequences are skipped and counted in `zero_variance`;
    sequences of length <= max_lag + 1 are counted in `too_short`.

    Raises:
        EvaluationInputError: no sequence is long enough
    """
    if int(max_lag) < 1:
        raise EvaluationInputError(f"max_lag must be >= 1, got {max_lag}")
    profile = AutocorrelationProfile(max_lag=int(max_lag), per_lag={lag: [] for lag in range(1, int(max_lag) + 1)})
    usable = 0
    for raw in sequences:
        sequence = np.asarray(raw, dtype=np.float64).ravel()
        if sequence.size <= profile.max_lag + 1:
            profile.too_short += 1
            continue
        usable += 1
        if sequence.std() == 0:
            profile.zero_variance += 1
            continue
        for lag in profile.per_lag:
            value = pearson_at_lag(sequence, lag)
            if value is not None:
                profile.per_lag[lag].append(value)

    if usable == 0:
        raise EvaluationInputError(f"every sequence is too short for max_lag {max_lag}")
    if profile.zero_variance:
        logger.warning(f"Skipped {profile.zero_variance} zero-variance sequences")
    return profile


def autocorrelation_distances(a_sequences, b_sequences, max_lag=DEFAULT_MAX_LAG, bins=DEFAULT_BINS):
    """Jensen distance between the two datasets' autocorrelation samples, per lag."""
    a = autocorrelation_profile(a_sequences, max_lag)
    b = autocorrelation_profile(b_sequences, max_lag)
    distances = {}
    for lag in a.per_lag:
        if not a.per_lag[lag] or not b.per_lag[lag]:
            logger.warning(f"No autocorrelation samples at lag {lag}; distance omitted")
            continue
        distances[lag] = jensen_distance(a.per_lag[lag], b.per_lag[lag], bins)
    return distances
