from pathlib import Path

from netreplica.exceptions import ArtifactIOError, ConfigError
from profiles.serializers import read_profiles_jsonl
from runner.base import NetReplicaCommand
from runner.manifest import ManifestTracker
from runner.pipeline import open_store
from simulator.batch import consistency_experiment
from simulator.config import Scenario
from simulator.engine import run_scenario
from simulator.telemetry import write_trace_csv, write_trace_json

GRID_FIELDS = ("rates_bps", "latencies_ms", "latency_source", "latency_percentiles", "aqms")


class Command(NetReplicaCommand):
    help = "Simulate one application flow through a shaped bottleneck, optionally with cross traffic."

    def add_command_arguments(self, parser):
        parser.add_argument("--rate-bps", dest="rate_bps", type=float, required=True)
        parser.add_argument("--latency-ms", dest="latency_ms", type=float, required=True)
        parser.add_argument("--aqm", default="pfifo", help="pfifo, codel or fq_codel")
        parser.add_argument("--queue-pkts", dest="queue_pkts", type=int)
        parser.add_argument("--ctp", help="profile id (with --store) or a profiles JSONL holding one profile")
        parser.add_argument("--store", help="profile store to look --ctp up in")
        parser.add_argument("--duration-s", dest="duration_s", type=float)
        parser.add_argument("--telemetry-ms", dest="telemetry_ms", type=int)
        parser.add_argument("--mtu", dest="mtu_bytes", type=int)
        parser.add_argument("--burst-bytes", dest="burst_bytes", type=int)
        parser.add_argument("--shape-uplink", dest="shape_uplink", action="store_const", const=True)
        parser.add_argument("--start-jitter-ms", dest="start_jitter_ms", type=float)
        parser.add_argument("--iterations", type=int, help="repeat under consecutive seeds and report consistency")
        parser.add_argument("--jobs", type=int)
        parser.add_argument("--out", required=True, help="SimTrace JSON (consistency report with --iterations)")
        parser.add_argument("--csv", help="also export the trace as CSV")

    def load_ctp(self, ctp, store_path):
        """Returns (profile, input paths for the manifest)."""
        if ctp is None:
            return None, []
        if store_path:
            with open_store(store_path, must_exist=True) as store:
                profile = store.get(ctp)
                inputs = [store.jsonl_path]
            if profile is None:
                raise ConfigError(f"no profile {ctp!r} in {store_path}", field="ctp")
            return profile, inputs
        path = Path(ctp)
        if not path.is_file():
            raise ArtifactIOError(f"profiles file not found: {path} (give --store to look up an id)")
        profiles = read_profiles_jsonl(path)
        if len(profiles) != 1:
            raise ConfigError(f"{path} holds {len(profiles)} profiles; expected exactly one", field="ctp")
        return profiles[0], [path]

    def parameters(self, settings, scenario, options):
        """Effective run parameters; the grid lists do not apply to a single scenario."""
        parameters = {k: v for k, v in settings.as_parameters().items() if k not in GRID_FIELDS}
        parameters.update(
            rate_bps=scenario.bottleneck.shaping_rate_bps,
            latency_ms=scenario.bottleneck.base_latency_ms,
            aqm=scenario.bottleneck.aqm.value,
            ctp=options["ctp"],
            ctp_id=scenario.ctp.id if scenario.ctp is not None else None,
            store=options["store"],
            iterations=options["iterations"],
            scenario=scenario.echo(),
        )
        return parameters

    def run(self, settings, /, **options):
        ctp, inputs = self.load_ctp(options["ctp"], options["store"])
        scenario = Scenario(
            bottleneck=settings.bottleneck(options["rate_bps"], options["latency_ms"], options["aqm"]),
            app=settings.app(settings.seed),
            ctp=ctp,
            telemetry_bin_ms=settings.telemetry_ms,
        )
        tracker = ManifestTracker("simulate", self.parameters(settings, scenario, options))
        out = Path(options["out"])

        if options["iterations"] is not None:
            report = consistency_experiment(scenario, options["iterations"], settings.jobs)
            tracker.track(self.emit_json(report, out), inputs=inputs)
            self.success(f"Consistency over {options['iterations']} runs written to {out}")
            return

        trace = run_scenario(scenario)
        outputs = [write_trace_json(out, trace)]
        if options["csv"]:
            outputs.append(write_trace_csv(options["csv"], trace))
        tracker.track(out, inputs=inputs, outputs=outputs)
        self.success(
            f"Mean throughput {trace.mean_throughput_bps() / 1e6:.2f} Mbps over {trace.duration_s:g} s, written to {out}"
        )
