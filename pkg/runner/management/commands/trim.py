from pathlib import Path

from profiles.serializers import read_profiles_jsonl, write_profiles_jsonl
from replay.mechanisms import compare_mechanisms
from replay.serializers import write_jsonl
from replay.trimming import trim_profiles
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker
from runner.pipeline import trim_threshold


class Command(NetReplicaCommand):
    help = "Scale profiles so that no bin exceeds the shaping threshold."

    def add_command_arguments(self, parser):
        parser.add_argument("--in", dest="source", required=True, help="profiles JSONL")
        parser.add_argument("--threshold-bps", dest="threshold_bps", type=float, help="default: lowest grid rate")
        parser.add_argument("--out", required=True, help="trimmed profiles JSONL")
        parser.add_argument("--report", help="TrimReport JSONL (default: trim_report.jsonl next to --out)")
        parser.add_argument(
            "--compare", help="also write a filtering vs trimming comparison (JSON) to this path"
        )
        parser.add_argument("--mean-floor-bps", dest="mean_floor_bps", type=float)
        parser.add_argument("--bins", type=int)

    def run(self, settings, /, **options):
        source = self.require_file(options["source"], "profiles file")
        out = Path(options["out"])
        report = Path(options["report"]) if options["report"] else out.with_name("trim_report.jsonl")
        threshold = trim_threshold(settings)
        tracker = ManifestTracker("trim", settings.as_parameters())

        profiles = read_profiles_jsonl(source)
        trimmed, reports = trim_profiles(profiles, threshold)
        write_profiles_jsonl(out, trimmed)
        write_jsonl(report, reports)
        outputs = [out, report]
        if options["compare"]:
            comparison = compare_mechanisms(profiles, threshold, settings.mean_floor_bps, settings.bins)
            outputs.append(self.emit_json(comparison.as_dict(), options["compare"]))
        tracker.track(out, inputs=[source], outputs=outputs)

        scaled = sum(1 for r in reports if r.scale_factor < 1.0)
        self.success(f"Trimmed {scaled} of {len(reports)} profiles at {threshold:g} bps into {out}")
