from django.conf import settings as django_settings
from django.utils import timezone

from runner.base import NetReplicaCommand
from runner.pipeline import run_pipeline


class Command(NetReplicaCommand):
    help = "Run transform, select, trim, sample, simulate and eval end to end into one directory."

    def add_command_arguments(self, parser):
        parser.add_argument("--trace", required=True, help="capture file (.pcap, .pcapng or packet CSV)")
        parser.add_argument("--out-dir", dest="out_dir", help="default: <NETREPLICA_DATA_DIR>/run-<UTC timestamp>")
        parser.add_argument("--format", dest="trace_format")
        parser.add_argument("--internal-prefix", dest="internal_prefix", action="append")
        parser.add_argument("--window-s", dest="window_durations_s", type=float, nargs="+")
        parser.add_argument("--stride-s", dest="stride_s", type=float)
        parser.add_argument("--filter")
        parser.add_argument("--limit", type=int)
        parser.add_argument("--order-by", dest="order_by")
        parser.add_argument("--threshold-bps", dest="threshold_bps", type=float)
        parser.add_argument("--per-bucket", dest="per_bucket", type=int)
        parser.add_argument("--toggle-min", dest="toggle_min", type=int)
        parser.add_argument("--toggle-max", dest="toggle_max", type=int)
        parser.add_argument("--rates-bps", dest="rates_bps", help="comma separated shaping rates")
        parser.add_argument("--latencies-ms", dest="latencies_ms", help="comma separated base latencies")
        parser.add_argument("--latency-source", dest="latency_source", help="CSV of observed minimum RTTs (ms)")
        parser.add_argument("--aqms", help="comma separated: pfifo, codel, fq_codel")
        parser.add_argument("--duration-s", dest="duration_s", type=float)
        parser.add_argument("--telemetry-ms", dest="telemetry_ms", type=int)
        parser.add_argument("--jobs", type=int, help="parallel simulations (default NETREPLICA_JOBS)")

    def run(self, settings, /, **options):
        trace = self.require_file(options["trace"], "trace file")
        out_dir = options["out_dir"] or django_settings.NETREPLICA["DATA_DIR"] / timezone.now().strftime("run-%Y%m%dT%H%M%SZ")
        summary = run_pipeline(trace, out_dir, settings)
        self.success(
            f"{summary['profiles']} profiles, {summary['selected']} selected, {summary['sampled']} sampled, "
            f"{summary['traces']} traces in {out_dir}"
        )
