"""Deterministic synthetic profiles for tests and benchmarks."""
import ipaddress

import numpy as np

from traces.records import Direction
from .metrics import compute_metrics
from .series import ByteSeries
from .windows import CrossTrafficProfile


def make_profile(
    bins,
    bin_width_ms=100,
    prefix="10.0.1.0/24",
    direction=Direction.DOWN,
    window_start_s=0.0,
    host_count=1,
    flow_count=1,
    paired_bins=None,
    source_trace="synthetic",
):
    """Profile over explicit bins, metrics computed the way the pipeline does."""
    series = ByteSeries(bin_width_ms, window_start_s, np.asarray(bins, dtype=np.int64))
    paired = ByteSeries(bin_width_ms, window_start_s, np.asarray(paired_bins, dtype=np.int64)) if paired_bins is not None else None
    metrics = compute_metrics(series, host_count, flow_count, paired)
    return CrossTrafficProfile.build(
        source_trace, prefix, direction, window_start_s, len(series) * bin_width_ms / 1000.0, series, metrics
    )


def random_profiles(count, seed=0, n_bins=10, bin_width_ms=100, max_bytes=250_000, sparsity=0.3):
    """
    `count` profiles with varied intensity, burstiness and heterogeneity.

    Each profile draws a base rate and a burst factor, so mean throughput
    and PMR spread over several orders of magnitude.
    """
    rng = np.random.default_rng(seed)
    profiles = []
    for index in range(count):
        base = rng.uniform(0.0, 1.0) ** 3 * max_bytes
        burst = rng.uniform(1.0, 8.0)
        bins = rng.uniform(0.0, 1.0, size=n_bins) * base
        bins[rng.integers(0, n_bins)] *= burst
        bins[rng.random(n_bins) < sparsity] = 0
        paired = rng.uniform(0.0, max_bytes / 10, size=n_bins)
        profiles.append(
            make_profile(
                np.rint(bins).astype(np.int64),
                bin_width_ms=bin_width_ms,
                prefix=str(ipaddress.IPv4Network((0x0A000000 + (index % 4096) * 256, 24))),
                direction=Direction.UP if rng.random() < 0.4 else Direction.DOWN,
                window_start_s=float(rng.integers(0, 900)),
                host_count=int(rng.integers(0, 40)),
                flow_count=int(rng.integers(0, 400)),
                paired_bins=np.rint(paired).astype(np.int64),
            )
        )
    return profiles
