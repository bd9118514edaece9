from dataclasses import dataclass, field
from itertools import combinations
import logging

import numpy as np

from netreplica.exceptions import EvaluationInputError

logger = logging.getLogger("evaluation")


def _as_series(values, name):
    series = np.asarray(values, dtype=np.float64).ravel()
    if series.size == 0:
        raise EvaluationInputError(f"{name} is empty")
    if not np.all(np.isfinite(series)):
        raise EvaluationInputError(f"{name} contains non-finite values")
    return series


def dtw(a, b):
    """
    Dynamic time warping distance.

    Full n x m grid, cost |a_i - b_j|, steps down/right/diagonal, no
    window and no normalization. Cells are filled one anti-diagonal at a
    time since each cell depends only on the two previous diagonals.

    Args:
        a: first series
        b: second series

    Returns:
        float: accumulated cost at (n, m)
    """
    a = _as_series(a, "first series")
    b = _as_series(b, "second series")
    n, m = a.size, b.size
    cost = np.abs(a[:, None] - b[None, :])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        j = k - i
        acc[i, j] = cost[i - 1, j - 1] + np.minimum(np.minimum(acc[i - 1, j - 1], acc[i - 1, j]), acc[i, j - 1])
    return float(acc[n, m])


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    labels: list
    values: np.ndarray = field(repr=False)

    def off_diagonal(self):
        upper = np.triu_indices(len(self.labels), k=1)
        return self.values[upper]

    def summary(self):
        pairs = self.off_diagonal()
        return {
            "pairs": int(pairs.size),
            "mean": float(pairs.mean()) if pairs.size else 0.0,
            "std": float(pairs.std()) if pairs.size else 0.0,
        }

    def as_dict(self):
        return {"labels": list(self.labels), "values": self.values.tolist(), **self.summary()}


def pairwise_consistency(series, labels=None):
    """
    DTW over every unordered pair of series.

    Returns:
        DistanceMatrix: summary() gives mean and population std over n(n-1)/2 pairs

    Raises:
        EvaluationInputError: fewer than two series
    """
    series = [_as_series(s, f"series {index}") for index, s in enumerate(series)]
    if len(series) < 2:
        raise EvaluationInputError(f"need at least 2 series for consistency, got {len(series)}")
    labels = list(labels) if labels is not None else [str(index) for index in range(len(series))]
    if len(labels) != len(series):
        raise EvaluationInputError(f"{len(labels)} labels for {len(series)} series")

    values = np.zeros((len(series), len(series)))
    for i, j in combinations(range(len(series)), 2):
        values[i, j] = values[j, i] = dtw(series[i], series[j])
    matrix = DistanceMatrix(labels=labels, values=values)
    summary = matrix.summary()
    logger.info(f"DTW over {summary['pairs']} pairs: {summary['mean']:.3f} +/- {summary['std']:.3f}")
    return matrix
