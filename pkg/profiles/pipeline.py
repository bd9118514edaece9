from dataclasses import dataclass
import logging

from traces.decompose import decompose
from .series import DEFAULT_BIN_WIDTH_MS, bins_for_span, host_series, trace_span
from .tree import LEVELS, build_prefix_tree
from .windows import extract_tree_windows, validate_durations

logger = logging.getLogger("profiles")


@dataclass
class TransformResult:
    profiles: list
    stats: object
    root: object = None
    n_bins: int = 0


def transform(
    records,
    cfg,
    durations_s,
    stride_s,
    bin_width_ms=DEFAULT_BIN_WIDTH_MS,
    levels=LEVELS,
    source_trace="",
):
    """
    Raw packets to CTPs: decompose, bin, aggregate, window.

    All host series are binned against the first packet of the whole
    trace so every node shares bin boundaries.

    Args:
        records: time-ordered PacketRecords
        cfg: IngestConfig
        durations_s: window durations in seconds, each in [1, 60]
        stride_s: window stride in seconds
        bin_width_ms: series bin width
        levels: prefix depths to emit windows for
        source_trace: name recorded in every profile

    Returns:
        TransformResult: profiles sorted by id plus decomposition stats
    """
    validate_durations(durations_s)
    groups, stats = decompose(records, cfg)
    if not groups:
        logger.warning(f"No internal hosts in {source_trace or 'trace'}; nothing to profile")
        return TransformResult(profiles=[], stats=stats)

    start, end = trace_span(records)
    n_bins = bins_for_span(start, end, bin_width_ms)
    series = {
        host: host_series(group, bin_width_ms, start_time=start, n_bins=n_bins)
        for host, group in groups.items()
    }
    root = build_prefix_tree(series)
    profiles = extract_tree_windows(root, durations_s, stride_s, levels=levels, source_trace=source_trace)
    return TransformResult(profiles=profiles, stats=stats, root=root, n_bins=n_bins)
