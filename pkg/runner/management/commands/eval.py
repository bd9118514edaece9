from pathlib import Path

from evaluation.autocorr import autocorrelation_distances
from evaluation.coverage import mahalanobis_coverage
from evaluation.distributions import distance_report, jensen_distance
from evaluation.dtw import pairwise_consistency
from evaluation.features import (
    dataset_features,
    load_csv_matrix,
    load_csv_series,
    load_csv_sessions,
    slow_path_filter,
    write_csv_matrix,
)
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker
from simulator.telemetry import load_trace_json


def load_series(path):
    """A headerless CSV series, or the throughput series of a SimTrace JSON."""
    if Path(path).suffix.lower() == ".json":
        return load_trace_json(path).throughput_bps
    return load_csv_series(path)


class Command(NetReplicaCommand):
    help = "Compare time series and datasets: dtw, jensen, coverage, autocorr or features."

    def add_command_arguments(self, parser):
        metrics = parser.add_subparsers(dest="metric", required=True)

        dtw = metrics.add_parser("dtw", help="pairwise DTW distances between series")
        dtw.add_argument("--traces", nargs="+", required=True, help="CSV series or SimTrace JSON files")
        dtw.add_argument("--out")

        jensen = metrics.add_parser("jensen", help="Jensen distance between two samples")
        jensen.add_argument("--a", required=True)
        jensen.add_argument("--b", required=True)
        jensen.add_argument("--bins", type=int)
        jensen.add_argument("--out")

        coverage = metrics.add_parser("coverage", help="Mahalanobis distances of candidates from a reference")
        coverage.add_argument("--reference", required=True, help="CSV matrix, one point per row")
        coverage.add_argument("--candidates", required=True, help="CSV matrix, one point per row")
        coverage.add_argument("--thresholds", dest="coverage_thresholds")
        coverage.add_argument("--ridge", type=float)
        coverage.add_argument("--out")

        autocorr = metrics.add_parser("autocorr", help="per-lag Jensen distance of autocorrelations")
        autocorr.add_argument("--a", required=True, help="long-form CSV of session,value rows")
        autocorr.add_argument("--b", required=True, help="long-form CSV of session,value rows")
        autocorr.add_argument("--max-lag", dest="max_lag", type=int)
        autocorr.add_argument("--bins", type=int)
        autocorr.add_argument("--out")

        features = metrics.add_parser("features", help="per-bin feature rows of SimTraces as CSV")
        features.add_argument("--traces", nargs="+", required=True, help="SimTrace JSON files")
        features.add_argument("--out", required=True)
        features.add_argument("--max-throughput-bps", dest="max_throughput_bps", type=float)
        features.add_argument("--min-rtt-ms", dest="min_rtt_ms", type=float)

    def run(self, settings, /, **options):
        metric = options["metric"]
        tracker = ManifestTracker(f"eval {metric}", settings.as_parameters())
        if metric == "features":
            self.eval_features(settings, options, tracker)
            return
        inputs, result = getattr(self, f"eval_{metric}")(settings, options)
        out = self.emit_json(result, options["out"])
        if out is not None:
            tracker.track(out, inputs=inputs)
            self.success(f"Wrote {out}")

    def eval_dtw(self, settings, options):
        paths = [self.require_file(p, "series") for p in options["traces"]]
        matrix = pairwise_consistency([load_series(p) for p in paths], labels=[str(p) for p in paths])
        return paths, matrix.as_dict()

    def eval_jensen(self, settings, options):
        a = self.require_file(options["a"], "sample")
        b = self.require_file(options["b"], "sample")
        distance = jensen_distance(load_csv_series(a), load_csv_series(b), settings.bins)
        return [a, b], {**distance_report(distance), "bins": settings.bins}

    def eval_coverage(self, settings, options):
        reference = self.require_file(options["reference"], "reference")
        candidates = self.require_file(options["candidates"], "candidates")
        report = mahalanobis_coverage(
            load_csv_matrix(reference),
            load_csv_matrix(candidates),
            ridge=settings.ridge,
            thresholds=tuple(settings.coverage_thresholds),
        )
        return [reference, candidates], report.as_dict()

    def eval_autocorr(self, settings, options):
        a = self.require_file(options["a"], "sequences")
        b = self.require_file(options["b"], "sequences")
        distances = autocorrelation_distances(
            load_csv_sessions(a), load_csv_sessions(b), settings.max_lag, settings.bins
        )
        return [a, b], {"max_lag": settings.max_lag, "lags": {str(lag): distance_report(d) for lag, d in distances.items()}}

    def eval_features(self, settings, options, tracker):
        paths = [self.require_file(p, "trace") for p in options["traces"]]
        rows = dataset_features([load_trace_json(p) for p in paths])
        if options["max_throughput_bps"] is not None or options["min_rtt_ms"] is not None:
            rows = slow_path_filter(
                rows,
                float("inf") if options["max_throughput_bps"] is None else options["max_throughput_bps"],
                float("-inf") if options["min_rtt_ms"] is None else options["min_rtt_ms"],
            )
        out = Path(options["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv_matrix(out, rows)
        tracker.track(out, inputs=paths)
        self.success(f"Wrote {len(rows)} feature rows to {out}")
