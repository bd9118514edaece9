import logging

import numpy as np
from scipy.spatial.distance import jensenshannon

from netreplica.exceptions import EvaluationInputError

logger = logging.getLogger("evaluation")

DEFAULT_BINS = 20
INSIGNIFICANT_BELOW = 0.2


def _sample(values, name):
    sample = np.asarray(values, dtype=np.float64).ravel()
    if sample.size == 0:
        raise EvaluationInputError(f"{name} is empty")
    if not np.all(np.isfinite(sample)):
        raise EvaluationInputError(f"{name} contains non-finite values")
    return sample


def shared_histograms(sample_a, sample_b, bins=DEFAULT_BINS):
    """Probability vectors of both samples over equal-width bins spanning the pooled range."""
    a = _sample(sample_a, "first sample")
    b = _sample(sample_b, "second sample")
    if int(bins) < 2:
        raise EvaluationInputError(f"bins must be >= 2, got {bins}")
    low = min(a.min(), b.min())
    high = max(a.max(), b.max())
    if low == high:
        return None, None
    edges = np.linspace(low, high, int(bins) + 1)
    p, _ = np.histogram(a, bins=edges)
    q, _ = np.histogram(b, bins=edges)
    return p / p.sum(), q / q.sum()


def jensen_distance(sample_a, sample_b, bins=DEFAULT_BINS):
    """
    Square root of the base-2 Jensen-Shannon divergence of two samples.

    Returns 0 for identical histograms (and a degenerate pooled range),
    1 for disjoint supports.
    """
    p, q = shared_histograms(sample_a, sample_b, bins)
    if p is None:
        return 0.0
    distance = float(jensenshannon(p, q, base=2))
    return min(1.0, max(0.0, distance))


def distance_report(distance):
    """JSON-ready distance with the conventional insignificance flag."""
    return {"distance": distance, "insignificant": distance < INSIGNIFICANT_BELOW}
