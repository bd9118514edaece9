from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import linalg

from netreplica.exceptions import EvaluationInputError

logger = logging.getLogger("evaluation")

DEFAULT_RIDGE = 1e-6
DEFAULT_THRESHOLDS = (10.0,)


@dataclass
class CoverageReport:
    reference_mean: np.ndarray
    reference_covariance: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    median: float = 0.0
    frac_above: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "dimensions": int(self.reference_mean.size),
            "candidates": int(self.distances.size),
            "median": self.median,
            "frac_above": {str(k): v for k, v in self.frac_above.items()},
            "reference_mean": self.reference_mean.tolist(),
        }


def _matrix(points, name):
    matrix = np.asarray(points, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.ndim != 2 or matrix.size == 0:
        raise EvaluationInputError(f"{name} must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(matrix)):
        raise EvaluationInputError(f"{name} contains non-finite values")
    return matrix


def mahalanobis_distances(points, mean, covariance):
    """sqrt((x - mean)^T covariance^-1 (x - mean)) for every row x."""
    points = _matrix(points, "points")
    mean = np.asarray(mean, dtype=np.float64).ravel()
    covariance = np.asarray(covariance, dtype=np.float64)
    if points.shape[1] != mean.size or covariance.shape != (mean.size, mean.size):
        raise EvaluationInputError(
            f"dimension mismatch: points {points.shape[1]}, mean {mean.size}, covariance {covariance.shape}"
        )
    diff = points - mean
    try:
        factor = linalg.cho_factor(covariance)
    except linalg.LinAlgError as e:
        raise EvaluationInputError(f"covariance is not positive definite ({e})")
    solved = linalg.cho_solve(factor, diff.T).T
    return np.sqrt(np.maximum(np.einsum("ij,ij->i", diff, solved), 0.0))


def mahalanobis_coverage(reference, candidates, ridge=DEFAULT_RIDGE, thresholds=DEFAULT_THRESHOLDS):
    """
    Distances of candidate points from the reference distribution.

    The reference covariance gets ridge * trace / d added to its diagonal.

    Args:
        reference: (n, d) points with n > d
        candidates: (k, d) points
        ridge: relative diagonal loading
        thresholds: report the fraction of candidates above each

    Returns:
        CoverageReport
    """
    reference = _matrix(reference, "reference")
    candidates = _matrix(candidates, "candidates")
    n, d = reference.shape
    if n <= d:
        raise EvaluationInputError(f"reference needs more rows than columns, got {n}x{d}")
    if candidates.shape[1] != d:
        raise EvaluationInputError(f"dimension mismatch: reference has {d} columns, candidates {candidates.shape[1]}")
    if ridge < 0:
        raise EvaluationInputError(f"ridge must be >= 0, got {ridge}")

    mean = reference.mean(axis=0)
    covariance = np.atleast_2d(np.cov(reference, rowvar=False))
    covariance = covariance + np.eye(d) * (ridge * np.trace(covariance) / d)
    distances = mahalanobis_distances(candidates, mean, covariance)
    report = CoverageReport(
        reference_mean=mean,
        reference_covariance=covariance,
        distances=distances,
        median=float(np.median(distances)),
        frac_above={float(t): float(np.mean(distances > t)) for t in thresholds},
    )
    logger.info(f"Coverage of {len(distances)} candidates in {d}-D: median {report.median:.3f}")
    return report
