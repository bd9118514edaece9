from pathlib import Path

from profiles.serializers import write_profiles_jsonl
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker
from runner.pipeline import open_store, transform_trace


class Command(NetReplicaCommand):
    help = "Turn a packet capture into cross-traffic profiles (JSONL)."

    def add_command_arguments(self, parser):
        parser.add_argument("trace", help="capture file (.pcap, .pcapng or packet CSV)")
        parser.add_argument("--out", required=True, help="profiles JSONL to write")
        parser.add_argument("--format", dest="trace_format", help="pcap, pcapng or packet_csv (default: from suffix)")
        parser.add_argument(
            "--internal-prefix", dest="internal_prefix", action="append", help="internal CIDR prefix (repeatable)"
        )
        parser.add_argument(
            "--keep-non-crossing",
            dest="drop_non_crossing",
            action="store_const",
            const=False,
            help="keep packets between two internal hosts",
        )
        parser.add_argument("--bin-ms", dest="bin_width_ms", type=int)
        parser.add_argument("--window-s", dest="window_durations_s", type=float, nargs="+")
        parser.add_argument("--stride-s", dest="stride_s", type=float)
        parser.add_argument("--levels", help="prefix depths, comma separated (default 32,24,16,8,0)")
        parser.add_argument("--store", help="also ingest the profiles into this store")

    def run(self, settings, /, **options):
        trace = self.require_file(options["trace"], "trace file")
        tracker = ManifestTracker("transform", settings.as_parameters())
        result = transform_trace(trace, settings)
        out = Path(options["out"])
        count = write_profiles_jsonl(out, result.profiles)
        tracker.track(out, inputs=[trace])
        self.stdout.write(f"{result.stats.retained_packets}/{result.stats.input_packets} packets retained")
        if options["store"]:
            with open_store(options["store"]) as store:
                stored = store.ingest(result.profiles)
            self.stdout.write(f"Store {options['store']} now holds {stored} profiles")
        self.success(f"Wrote {count} profiles to {out}")
