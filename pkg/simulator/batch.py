"""
Batches of isolated simulations.

Each item is simulated in its own Simulation with its own generator, so a
batch gives the same traces whether it runs in one process or many.
Results come back in input order; an invalid item yields a BatchError in
its slot and leaves the others alone.
"""
from dataclasses import dataclass
import logging
import multiprocessing
import os
import time

import numpy as np

from evaluation.distributions import distance_report, jensen_distance
from evaluation.dtw import pairwise_consistency
from netreplica.exceptions import ConfigError, NetReplicaError, SimulationConfigError
from .config import Scenario
from .engine import run_scenario

logger = logging.getLogger("simulator")


@dataclass(frozen=True)
class BatchError:
    index: int
    message: str

    def as_dict(self):
        return {"index": self.index, "error": self.message}


def _init_worker():
    import django

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "netreplica.settings")
    django.setup()


def _as_scenario(item):
    # needs configured settings; spawned workers get them in _init_worker
    from .serializers import ctp_from_data, scenario_from_data

    if isinstance(item, (tuple, list)):
        bottleneck, app, *rest = item
        ctp = rest[0] if rest else None
        telemetry_bin_ms = rest[1] if len(rest) > 1 else 100
        return Scenario(bottleneck, app, ctp_from_data(ctp), telemetry_bin_ms)
    return scenario_from_data(item)


def _run_one(indexed):
    index, item = indexed
    try:
        return run_scenario(_as_scenario(item))
    except NetReplicaError as e:
        return BatchError(index, e.message)
    except Exception as e:
        logger.exception("Batch item %d failed", index)
        return BatchError(index, f"{type(e).__name__}: {e}")


def run_batch(items, parallelism=1):
    """
    Simulate every item and return traces in input order.

    Args:
        items: Scenarios, scenario documents, or (bottleneck, app[, ctp[, telemetry_bin_ms]]) tuples
        parallelism (int): worker processes; 1 runs in-process

    Returns:
        list: SimTrace or BatchError per item
    """
    if parallelism < 1:
        raise ConfigError(f"must be >= 1, got {parallelism}", field="parallelism")
    indexed = list(enumerate(items))
    if not indexed:
        return []
    started = time.perf_counter()
    if parallelism == 1 or len(indexed) == 1:
        results = [_run_one(entry) for entry in indexed]
    else:
        context = multiprocessing.get_context("spawn")
        processes = min(parallelism, len(indexed))
        with context.Pool(processes=processes, initializer=_init_worker) as pool:
            results = pool.map(_run_one, indexed, chunksize=1)
    failures = [r for r in results if isinstance(r, BatchError)]
    for failure in failures:
        logger.warning(f"Batch item {failure.index} failed: {failure.message}")
    logger.info(
        f"Simulated {len(results) - len(failures)}/{len(results)} scenarios "
        f"with parallelism {parallelism} in {time.perf_counter() - started:.2f} s"
    )
    return results


def _series_pairs(traces):
    throughput = [t.throughput_bps for t in traces]
    rtt = [t.rtt_ms[~np.isnan(t.rtt_ms)] for t in traces]
    return throughput, rtt


def _raise_failures(results):
    failures = [r for r in results if isinstance(r, BatchError)]
    if failures:
        raise SimulationConfigError(f"scenario {failures[0].index}: {failures[0].message}")
    return results


def consistency_experiment(scenario, iterations, parallelism=1):
    """
    Repeat one scenario under seeds seed .. seed+iterations-1.

    Returns:
        dict: pairwise DTW summaries of the throughput and RTT series
    """
    if iterations < 2:
        raise ConfigError(f"must be >= 2, got {iterations}", field="iterations")
    scenario = _as_scenario(scenario)
    base = scenario.app.seed
    runs = [scenario.with_seed(base + i) for i in range(iterations)]
    traces = _raise_failures(run_batch(runs, parallelism))
    throughput, rtt = _series_pairs(traces)
    labels = [f"seed={base + i}" for i in range(iterations)]
    report = {
        "iterations": iterations,
        "throughput": pairwise_consistency(throughput, labels).summary(),
    }
    if all(len(values) for values in rtt):
        report["rtt"] = pairwise_consistency(rtt, labels).summary()
    else:
        report["rtt"] = None
        logger.warning("Some runs produced no RTT samples; RTT consistency skipped")
    return report


def scaling_check(scenarios, parallelism, bins=20):
    """
    Compare a sequential batch against a parallel one.

    Returns:
        dict: whether the traces are identical, and the Jensen distance
        between the pairwise-DTW distributions of the two batches
    """
    scenarios = [_as_scenario(s) for s in scenarios]
    sequential = _raise_failures(run_batch(scenarios, 1))
    parallel = _raise_failures(run_batch(scenarios, parallelism))
    identical = all(a == b for a, b in zip(sequential, parallel))
    seq_dtw = pairwise_consistency([t.throughput_bps for t in sequential]).off_diagonal()
    par_dtw = pairwise_consistency([t.throughput_bps for t in parallel]).off_diagonal()
    return {
        "scenarios": len(scenarios),
        "parallelism": parallelism,
        "identical": identical,
        "jensen": distance_report(jensen_distance(seq_dtw, par_dtw, bins=bins)),
    }
