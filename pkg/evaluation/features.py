import logging

import numpy as np

from netreplica.exceptions import ArtifactIOError, EvaluationInputError

logger = logging.getLogger("evaluation")

BASE_FEATURES = ("throughput_bps", "rtt_ms", "queue_pkts", "drops")
FEATURE_COLUMNS = BASE_FEATURES + tuple(f"d_{name}" for name in BASE_FEATURES)


def trace_features(trace):
    """
    Per-bin feature rows of a simulation trace.

    Columns follow FEATURE_COLUMNS: the four telemetry series and their
    first differences (0 in the first row). Bins without an RTT sample are
    dropped after differencing.

    Returns:
        np.ndarray: (rows, 8) float matrix
    """
    base = np.column_stack([np.asarray(getattr(trace, name), dtype=np.float64) for name in BASE_FEATURES])
    diffs = np.diff(base, axis=0, prepend=base[:1])
    rows = np.hstack([base, diffs])
    return rows[np.all(np.isfinite(rows), axis=1)]


def dataset_features(traces):
    """Stack the feature rows of many traces."""
    matrices = [trace_features(trace) for trace in traces]
    matrices = [m for m in matrices if len(m)]
    if not matrices:
        return np.empty((0, len(FEATURE_COLUMNS)))
    return np.vstack(matrices)


def slow_path_filter(rows, max_throughput_bps, min_rtt_ms):
    """Keep rows with throughput <= max_throughput_bps and RTT >= min_rtt_ms."""
    rows = np.asarray(rows, dtype=np.float64)
    throughput = rows[:, FEATURE_COLUMNS.index("throughput_bps")]
    rtt = rows[:, FEATURE_COLUMNS.index("rtt_ms")]
    kept = rows[(throughput <= max_throughput_bps) & (rtt >= min_rtt_ms)]
    logger.debug(f"Slow-path filter kept {len(kept)} of {len(rows)} rows")
    return kept


def load_csv_matrix(path):
    """Read a headerless CSV of floats into a 2-D matrix."""
    try:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path} ({e})")
    except ValueError as e:
        raise EvaluationInputError(f"{path}: not a CSV of floats ({e})")
    if matrix.size == 0:
        raise EvaluationInputError(f"{path}: no values")
    return matrix


def load_csv_series(path):
    """Read a headerless CSV of floats as one flat series."""
    return load_csv_matrix(path).ravel()


def load_csv_sessions(path):
    """
    Read long-form `session,value` rows into one sequence per session.

    Session labels are free text; sessions keep the order of their first
    row and may have different lengths.

    Returns:
        list: one float array per session
    """
    try:
        rows = np.loadtxt(path, delimiter=",", dtype=str, ndmin=2)
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path} ({e})")
    except ValueError as e:
        raise EvaluationInputError(f"{path}: not a session,value CSV ({e})")
    if rows.size == 0:
        raise EvaluationInputError(f"{path}: no values")
    if rows.shape[1] != 2:
        raise EvaluationInputError(f"{path}: expected session,value rows, got {rows.shape[1]} columns")
    try:
        values = np.char.strip(rows[:, 1]).astype(np.float64)
    except ValueError as e:
        raise EvaluationInputError(f"{path}: non-numeric value ({e})")
    _, first, inverse = np.unique(np.char.strip(rows[:, 0]), return_index=True, return_inverse=True)
    return [values[inverse == label] for label in np.argsort(first)]


def write_csv_matrix(path, rows):
    np.savetxt(path, np.asarray(rows, dtype=np.float64), delimiter=",", fmt="%.10g")
