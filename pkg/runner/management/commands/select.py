from pathlib import Path

from profiles.serializers import write_profiles_jsonl
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker
from runner.pipeline import open_store, select_profiles
from store.query import ProfileQuery


class Command(NetReplicaCommand):
    help = "Select profiles from a store by their indexed attributes."

    def add_command_arguments(self, parser):
        parser.add_argument("--store", required=True, help="profile store (.jsonl)")
        parser.add_argument("--filter", help='conjunctive filter, e.g. "pmr95>=2 && direction=DOWN"')
        parser.add_argument("--limit", type=int)
        parser.add_argument("--order-by", dest="order_by", help="attr, attr:asc or attr:desc")
        parser.add_argument("--out", required=True, help="JSONL of the selected profiles")
        parser.add_argument("--count", action="store_true", help="print the number of matches only")

    def run(self, settings, /, **options):
        with open_store(options["store"], must_exist=True) as store:
            if options["count"]:
                query = ProfileQuery.parse(settings.filter)
                self.stdout.write(str(store.count(query)))
                return
            tracker = ManifestTracker("select", settings.as_parameters())
            profiles = select_profiles(store, settings)
            inputs = [store.jsonl_path]
        out = Path(options["out"])
        count = write_profiles_jsonl(out, profiles)
        tracker.track(out, inputs=inputs)
        self.success(f"Selected {count} profiles into {out}")
