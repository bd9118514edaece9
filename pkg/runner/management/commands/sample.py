from pathlib import Path

from profiles.serializers import read_profiles_jsonl, write_profiles_jsonl
from replay.sampling import stratified_sample
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker


class Command(NetReplicaCommand):
    help = "Draw a sample of profiles stratified by ON/OFF toggle count."

    def add_command_arguments(self, parser):
        parser.add_argument("--in", dest="source", required=True, help="profiles JSONL")
        parser.add_argument("--out", required=True, help="sampled profiles JSONL")
        parser.add_argument("--report", help="per-bucket report JSON (default: sample_report.json next to --out)")
        parser.add_argument("--per-bucket", dest="per_bucket", type=int)
        parser.add_argument("--toggle-min", dest="toggle_min", type=int)
        parser.add_argument("--toggle-max", dest="toggle_max", type=int)
        parser.add_argument("--on-threshold-bps", dest="on_threshold_bps", type=float)
        parser.add_argument("--segment-ms", dest="segment_ms", type=int)

    def run(self, settings, /, **options):
        source = self.require_file(options["source"], "profiles file")
        out = Path(options["out"])
        report_path = Path(options["report"]) if options["report"] else out.with_name("sample_report.json")
        tracker = ManifestTracker("sample", settings.as_parameters())

        sample, report = stratified_sample(read_profiles_jsonl(source), settings.sampling_plan(settings.seed))
        write_profiles_jsonl(out, sample)
        self.emit_json(report.as_dict(), report_path)
        tracker.track(out, inputs=[source], outputs=[out, report_path])

        short = report.short_buckets(settings.per_bucket)
        if short:
            self.stderr.write(self.style.WARNING(f"{len(short)} toggle buckets hold fewer than {settings.per_bucket} profiles"))
        self.success(f"Sampled {len(sample)} profiles into {out}")
