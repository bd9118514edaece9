"""
Stages of the toolchain, shared by the single-stage subcommands and `run`.

`run` chains transform -> select -> trim -> sample -> simulate -> eval into
one output directory:

    profiles.jsonl      every extracted profile
    selected.jsonl      profiles matching the selection query
    trimmed.jsonl       selected profiles scaled under the trim threshold
    trim_report.jsonl   one TrimReport per selected profile
    sample.jsonl        stratified sample of the trimmed profiles
    traces/<n>.json     one SimTrace per grid point
    eval.json           evaluation summary
    features.csv        per-bin feature rows of every trace

Every artifact gets a `<name>.manifest.json`; the run itself writes
run.manifest.json.
"""
from contextlib import contextmanager
from itertools import product
from pathlib import Path
import json
import logging
import math

import numpy as np

from evaluation.dtw import pairwise_consistency
from evaluation.features import dataset_features, write_csv_matrix
from netreplica.exceptions import ArtifactIOError, NetReplicaError, SimulationConfigError
from profiles.pipeline import transform
from profiles.serializers import write_profiles_jsonl
from replay.sampling import stratified_sample
from replay.serializers import write_jsonl
from replay.trimming import trim_profiles
from simulator.batch import BatchError, run_batch
from simulator.config import Scenario
from simulator.telemetry import write_trace_json
from store.query import ProfileQuery
from store.store import ProfileStore, store_paths
from traces.parsers import parse_trace
from .manifest import ManifestTracker

logger = logging.getLogger("runner")


@contextmanager
def stage(name):
    """Prefix any failure inside the block with the stage name."""
    logger.info(f"Stage {name}")
    try:
        yield
    except NetReplicaError as e:
        e.message = f"{name} stage failed: {e.message}"
        logger.error(e.message)
        raise
    except OSError as e:
        message = f"{name} stage failed: {e.strerror or e}" + (f": {e.filename}" if e.filename else "")
        logger.error(message)
        raise ArtifactIOError(message) from e


def transform_trace(trace_path, settings):
    """Parse a capture and extract its profiles."""
    records = parse_trace(trace_path, settings.trace_format)
    result = transform(
        records,
        settings.ingest_config(),
        durations_s=settings.window_durations_s,
        stride_s=settings.stride_s,
        bin_width_ms=settings.bin_width_ms,
        levels=tuple(settings.levels),
        source_trace=Path(trace_path).name,
    )
    stats = result.stats
    logger.info(
        f"Retained {stats.retained_packets}/{stats.input_packets} packets "
        f"({stats.total_dropped_packets} dropped), {len(result.profiles)} profiles"
    )
    return result


def open_store(path, must_exist=False):
    jsonl_path, _ = store_paths(path)
    if must_exist and not jsonl_path.is_file():
        raise ArtifactIOError(f"profile store not found: {jsonl_path}")
    return ProfileStore(path)


def select_profiles(store, settings):
    query = ProfileQuery.parse(settings.filter, limit=settings.limit, order_by=settings.order_by)
    return store.select(query)


def trim_threshold(settings):
    """Explicit threshold_bps, else the lowest shaping rate of the grid."""
    return settings.threshold_bps if settings.threshold_bps is not None else min(settings.rates_bps)


def grid_scenarios(sample, settings):
    """
    Scenarios for every rate x latency x AQM x profile combination.

    Seeds run seed, seed+1, ... in grid order.
    """
    latencies = settings.resolve_latencies()
    scenarios = []
    for index, (rate, latency, aqm, ctp) in enumerate(product(settings.rates_bps, latencies, settings.aqms, sample)):
        scenarios.append(
            Scenario(
                bottleneck=settings.bottleneck(rate, latency, aqm),
                app=settings.app(settings.seed + index),
                ctp=ctp,
                telemetry_bin_ms=settings.telemetry_ms,
                label=f"rate={rate:g} latency={latency:g} aqm={aqm} ctp={ctp.id}",
            )
        )
    return scenarios


def simulate_all(scenarios, jobs):
    results = run_batch(scenarios, parallelism=jobs)
    failures = [r for r in results if isinstance(r, BatchError)]
    if failures:
        first = failures[0]
        raise SimulationConfigError(
            f"{len(failures)} of {len(results)} simulations failed; first: {scenarios[first.index].label}: {first.message}"
        )
    return results


def _mean_finite(values):
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else None


def evaluate_traces(traces, sample_report=None):
    """Summary of a grid: per-AQM means and the pairwise DTW spread of throughput."""
    report = {"traces": len(traces)}
    if sample_report is not None:
        report["sample"] = sample_report.as_dict()
    per_aqm = {}
    for trace in traces:
        per_aqm.setdefault(trace.config["bottleneck"]["aqm"], []).append(trace)
    report["per_aqm"] = {
        aqm: {
            "runs": len(group),
            "mean_throughput_bps": float(np.mean([t.mean_throughput_bps() for t in group])),
            "mean_rtt_ms": _mean_finite([t.mean_rtt_ms() for t in group]),
        }
        for aqm, group in sorted(per_aqm.items())
    }
    if len(traces) >= 2:
        report["throughput_dtw"] = pairwise_consistency([t.throughput_bps for t in traces]).summary()
    return report


def run_pipeline(trace_path, out_dir, settings):
    """
    End-to-end run into `out_dir`.

    Completed upstream artifacts stay on disk when a later stage fails.

    Returns:
        dict: counts per stage
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    parameters = settings.as_parameters()
    tracker = ManifestTracker("run", parameters)
    trace_path = Path(trace_path)
    summary = {}

    with stage("transform"):
        result = transform_trace(trace_path, settings)
        profiles_path = out_dir / "profiles.jsonl"
        summary["profiles"] = write_profiles_jsonl(profiles_path, result.profiles)
        ManifestTracker("transform", parameters).track(profiles_path, inputs=[trace_path])

    with stage("select"):
        store = open_store(out_dir / "store.jsonl")
        try:
            store.ingest(result.profiles)
            selected = select_profiles(store, settings)
        finally:
            store.close()
        selected_path = out_dir / "selected.jsonl"
        summary["selected"] = write_profiles_jsonl(selected_path, selected)
        ManifestTracker("select", parameters).track(selected_path, inputs=[profiles_path])

    with stage("trim"):
        trimmed, reports = trim_profiles(selected, trim_threshold(settings))
        trimmed_path = out_dir / "trimmed.jsonl"
        report_path = out_dir / "trim_report.jsonl"
        summary["trimmed"] = write_profiles_jsonl(trimmed_path, trimmed)
        write_jsonl(report_path, reports)
        ManifestTracker("trim", parameters).track(trimmed_path, inputs=[selected_path], outputs=[trimmed_path, report_path])

    with stage("sample"):
        sample, sample_report = stratified_sample(trimmed, settings.sampling_plan(settings.seed))
        sample_path = out_dir / "sample.jsonl"
        summary["sampled"] = write_profiles_jsonl(sample_path, sample)
        ManifestTracker("sample", parameters).track(sample_path, inputs=[trimmed_path])

    traces = []
    trace_paths = []
    with stage("simulate"):
        if not sample:
            logger.warning("Sample is empty; simulate stage skipped")
        else:
            scenarios = grid_scenarios(sample, settings)
            traces = simulate_all(scenarios, settings.jobs)
            simulate_tracker = ManifestTracker("simulate", parameters)
            for index, trace in enumerate(traces):
                path = write_trace_json(out_dir / "traces" / f"{index}.json", trace)
                simulate_tracker.track(path, inputs=[sample_path])
                trace_paths.append(path)
        summary["traces"] = len(traces)

    with stage("eval"):
        eval_path = out_dir / "eval.json"
        report = evaluate_traces(traces, sample_report)
        outputs = [eval_path]
        if traces:
            features_path = out_dir / "features.csv"
            write_csv_matrix(features_path, dataset_features(traces))
            outputs.append(features_path)
        eval_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        ManifestTracker("eval", parameters).track(eval_path, inputs=trace_paths, outputs=outputs)

    artifacts = [profiles_path, selected_path, trimmed_path, report_path, sample_path, *trace_paths, *outputs]
    tracker.track(None, inputs=[trace_path], outputs=artifacts, path=out_dir / "run.manifest.json")
    logger.info(
        f"Run complete: {summary['profiles']} profiles, {summary['selected']} selected, "
        f"{summary['sampled']} sampled, {summary['traces']} traces"
    )
    return summary
