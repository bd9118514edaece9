from io import StringIO
from pathlib import Path
from unittest import mock
import json
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from netreplica import __version__
from netreplica.exceptions import ArtifactIOError, ConfigError
from profiles.serializers import read_profiles_jsonl, write_profiles_jsonl
from profiles.synthetic import make_profile
from settings import RunSettings, load_run_settings
from simulator.telemetry import load_trace_json
from traces.synthetic import generate_trace, write_packet_csv
from .manifest import ManifestTracker, manifest_path, sha256_file

INTERNAL = ["10.0.0.0/16"]


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.work = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()

    def write_config(self, text, name="run.env"):
        path = self.work / name
        path.write_text(text, encoding="utf-8")
        return path

    def write_trace(self, name="trace.csv", seed=3):
        records = generate_trace(
            internal_hosts=("10.0.1.2", "10.0.2.7"), packets=2000, duration_s=10.0, seed=seed
        )
        path = self.work / name
        write_packet_csv(path, records)
        return path

    def call(self, name, *args, **options):
        out = StringIO()
        call_command(name, *args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()


class RunSettingsTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        clean = {k: v for k, v in os.environ.items() if not k.startswith("NETREPLICA_")}
        patcher = mock.patch.dict(os.environ, clean, clear=True)
        patcher.start()
        self.addCleanup(patcher.stop)

    def test_defaults(self):
        settings = load_run_settings()
        self.assertEqual(settings.seed, 0)
        self.assertEqual(settings.rates_bps, [4e6, 6e6, 8e6, 10e6])
        self.assertEqual(settings.aqms, ["PFIFO"])
        self.assertEqual(settings.levels, [32, 24, 16, 8, 0])
        self.assertEqual(settings.jobs, 1)

    def test_environment_seed_fallback(self):
        os.environ["NETREPLICA_SEED"] = "7"
        self.assertEqual(load_run_settings().seed, 7)

    def test_file_over_environment(self):
        os.environ["NETREPLICA_SEED"] = "7"
        config = self.write_config("# grid\nseed=5\n")
        self.assertEqual(load_run_settings(config).seed, 5)

    def test_cli_over_file(self):
        config = self.write_config("seed=5\nqueue_pkts=200\n")
        settings = load_run_settings(config, seed=9)
        self.assertEqual(settings.seed, 9)
        self.assertEqual(settings.queue_pkts, 200)

    def test_none_override_is_not_given(self):
        config = self.write_config("seed=5\n")
        self.assertEqual(load_run_settings(config, seed=None).seed, 5)

    def test_comma_lists(self):
        config = self.write_config("rates_bps=1e6, 2e6\naqms=pfifo,fq_codel\nINTERNAL_PREFIX=10.0.0.0/8,192.168.0.0/16\n")
        settings = load_run_settings(config)
        self.assertEqual(settings.rates_bps, [1e6, 2e6])
        self.assertEqual(settings.aqms, ["PFIFO", "FQ_CODEL"])
        self.assertEqual(settings.internal_prefix, ["10.0.0.0/8", "192.168.0.0/16"])

    def test_environment_lists(self):
        os.environ["NETREPLICA_AQMS"] = "codel"
        self.assertEqual(load_run_settings().aqms, ["CODEL"])

    def test_unknown_key(self):
        config = self.write_config("rate_bsp=1e6\n")
        with self.assertRaises(ConfigError) as ctx:
            load_run_settings(config)
        self.assertEqual(ctx.exception.field, "rate_bsp")

    def test_missing_file(self):
        with self.assertRaises(ArtifactIOError):
            load_run_settings(self.work / "absent.env")

    def test_invalid_value_names_field(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_settings(telemetry_ms=250)
        self.assertEqual(ctx.exception.field, "telemetry_ms")
        with self.assertRaises(ConfigError) as ctx:
            load_run_settings(aqms="red")
        self.assertEqual(ctx.exception.field, "aqms")

    def test_seed_range(self):
        with self.assertRaises(ConfigError):
            load_run_settings(seed=-1)
        self.assertEqual(load_run_settings(seed=2**64 - 1).seed, 2**64 - 1)

    def test_latencies_from_source(self):
        source = self.work / "rtts.csv"
        source.write_text("\n".join(str(v) for v in range(1, 101)) + "\n")
        settings = load_run_settings(latency_source=source, latency_percentiles="0,50,100")
        np.testing.assert_allclose(settings.resolve_latencies(), [1.0, 50.5, 100.0])

    def test_latencies_required(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_settings().resolve_latencies()
        self.assertEqual(ctx.exception.field, "latencies_ms")

    def test_parameters_are_json(self):
        parameters = load_run_settings(self.write_config("seed=3\n")).as_parameters()
        self.assertNotIn("config_file", parameters)
        self.assertEqual(json.loads(json.dumps(parameters))["seed"], 3)
        self.assertEqual(set(parameters), set(RunSettings.model_fields) - {"config_file"})


class ManifestTests(TempDirMixin, SimpleTestCase):
    def test_named_after_artifact(self):
        self.assertEqual(manifest_path(Path("out/trace.json")), Path("out/trace.manifest.json"))
        self.assertEqual(manifest_path("profiles.jsonl"), Path("profiles.manifest.json"))

    def test_contents(self):
        source = self.work / "in.txt"
        source.write_text("input")
        artifact = self.work / "out.txt"
        artifact.write_text("output")
        path = ManifestTracker("trim", {"seed": 1}).track(artifact, inputs=[source])
        data = json.loads(path.read_text())
        self.assertEqual(data["subcommand"], "trim")
        self.assertEqual(data["tool_version"], __version__)
        self.assertEqual(data["parameters"], {"seed": 1})
        self.assertEqual(data["inputs"], {str(source): sha256_file(source)})
        self.assertEqual(data["outputs"], {str(artifact): sha256_file(artifact)})
        self.assertGreaterEqual(data["wall_clock_s"], 0.0)

    def test_missing_output(self):
        with self.assertRaises(ArtifactIOError):
            ManifestTracker("trim", {}).track(self.work / "absent.jsonl")


class TransformCommandTests(TempDirMixin, SimpleTestCase):
    def transform(self, trace, out, **options):
        options = {"internal_prefix": INTERNAL, "window_durations_s": [5.0], "stride_s": 5.0, "levels": "32", **options}
        return self.call("transform", str(trace), out=str(out), **options)

    def test_two_windows_per_host_direction(self):
        out = self.work / "profiles.jsonl"
        self.transform(self.write_trace(), out, seed=4)
        profiles = read_profiles_jsonl(out)
        self.assertEqual(len(profiles), 2 * 2 * 2)
        manifest = json.loads(manifest_path(out).read_text())
        self.assertEqual(manifest["subcommand"], "transform")
        self.assertEqual(manifest["parameters"]["seed"], 4)
        self.assertEqual(manifest["outputs"], {str(out): sha256_file(out)})

    def test_rerun_is_byte_identical(self):
        trace = self.write_trace()
        first, second = self.work / "a.jsonl", self.work / "b.jsonl"
        self.transform(trace, first)
        self.transform(trace, second)
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_missing_trace(self):
        out = self.work / "profiles.jsonl"
        with self.assertRaises(CommandError) as ctx:
            self.transform(self.work / "absent.pcap", out)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse(out.exists())
        self.assertFalse(manifest_path(out).exists())

    def test_config_file(self):
        config = self.write_config("internal_prefix=10.0.0.0/16\nwindow_durations_s=5\nstride_s=5\nlevels=32\n")
        out = self.work / "profiles.jsonl"
        self.call("transform", str(self.write_trace()), out=str(out), config_file=str(config))
        self.assertEqual(len(read_profiles_jsonl(out)), 8)

    def test_invalid_level(self):
        with self.assertRaises(CommandError) as ctx:
            self.transform(self.write_trace(), self.work / "p.jsonl", levels="12")
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("levels", str(ctx.exception))

    def test_store_then_select(self):
        store = self.work / "ctp.jsonl"
        self.transform(self.write_trace(), self.work / "profiles.jsonl", store=str(store))
        out = self.work / "down.jsonl"
        self.call("select", store=str(store), filter="direction=DOWN", out=str(out))
        selected = read_profiles_jsonl(out)
        self.assertEqual(len(selected), 4)
        self.assertTrue(all(p.direction.value == "DOWN" for p in selected))
        self.assertTrue(manifest_path(out).is_file())

    def test_select_missing_store(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("select", store=str(self.work / "absent.jsonl"), out=str(self.work / "x.jsonl"))
        self.assertEqual(ctx.exception.returncode, 2)


class PrepCommandTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.source = self.work / "profiles.jsonl"
        write_profiles_jsonl(
            self.source,
            [
                make_profile([100_000] * 10, prefix="10.0.1.2/32"),
                make_profile([0, 50_000] * 5, prefix="10.0.1.3/32"),
            ],
        )

    def test_trim(self):
        out = self.work / "trimmed.jsonl"
        self.call("trim", source=str(self.source), threshold_bps=4e6, out=str(out), compare=str(self.work / "cmp.json"))
        trimmed = read_profiles_jsonl(out)
        self.assertEqual(len(trimmed), 2)
        self.assertTrue(all(p.metrics.max_throughput_bps <= 4e6 for p in trimmed))
        reports = [json.loads(line) for line in (self.work / "trim_report.jsonl").read_text().splitlines()]
        self.assertEqual(len(reports), 2)
        comparison = json.loads((self.work / "cmp.json").read_text())
        self.assertEqual(comparison["candidates"], 2)
        self.assertEqual(comparison["trimmed"], 2)
        manifest = json.loads(manifest_path(out).read_text())
        self.assertEqual(len(manifest["outputs"]), 3)

    def test_sample(self):
        out = self.work / "sample.jsonl"
        self.call("sample", source=str(self.source), toggle_min=0, toggle_max=20, per_bucket=5, out=str(out))
        sampled = read_profiles_jsonl(out)
        self.assertEqual(len(sampled), 2)
        report = json.loads((self.work / "sample_report.json").read_text())
        self.assertEqual(report["drawn"], 2)

    def test_sample_bad_range(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("sample", source=str(self.source), toggle_min=5, toggle_max=1, out=str(self.work / "s.jsonl"))
        self.assertEqual(ctx.exception.returncode, 1)


class SimulateCommandTests(TempDirMixin, SimpleTestCase):
    def simulate(self, **options):
        options = {"rate_bps": 1e7, "latency_ms": 10.0, "duration_s": 2.0, **options}
        return self.call("simulate", **options)

    def test_without_cross_traffic(self):
        out = self.work / "trace.json"
        self.simulate(out=str(out), csv=str(self.work / "trace.csv"), seed=3)
        trace = load_trace_json(out)
        self.assertEqual(len(trace), 20)
        self.assertGreater(trace.mean_throughput_bps(), 0)
        self.assertEqual(trace.config["app"]["seed"], 3)
        manifest = json.loads(manifest_path(out).read_text())
        self.assertEqual(manifest["subcommand"], "simulate")
        self.assertEqual(len(manifest["outputs"]), 2)

    def test_profile_file(self):
        ctp = self.work / "one.jsonl"
        write_profiles_jsonl(ctp, [make_profile([50_000] * 20)])
        out = self.work / "trace.json"
        self.simulate(ctp=str(ctp), aqm="fq_codel", out=str(out))
        trace = load_trace_json(out)
        self.assertEqual(trace.config["bottleneck"]["aqm"], "FQ_CODEL")
        self.assertIsNotNone(trace.config["ctp_id"])
        self.assertIn(str(ctp), json.loads(manifest_path(out).read_text())["inputs"])

    def test_manifest_records_effective_scenario(self):
        profile = make_profile([50_000] * 20)
        ctp = self.work / "one.jsonl"
        write_profiles_jsonl(ctp, [profile])
        out = self.work / "trace.json"
        self.simulate(rate_bps=5e6, latency_ms=40.0, aqm="codel", ctp=str(ctp), out=str(out))
        parameters = json.loads(manifest_path(out).read_text())["parameters"]
        self.assertEqual(parameters["rate_bps"], 5e6)
        self.assertEqual(parameters["latency_ms"], 40.0)
        self.assertEqual(parameters["aqm"], "CODEL")
        self.assertEqual(parameters["ctp"], str(ctp))
        self.assertEqual(parameters["ctp_id"], profile.id)
        self.assertEqual(parameters["scenario"]["bottleneck"]["shaping_rate_bps"], 5e6)
        self.assertNotIn("rates_bps", parameters)
        self.assertNotIn("aqms", parameters)

    def test_unknown_aqm(self):
        with self.assertRaises(CommandError) as ctx:
            self.simulate(aqm="red", out=str(self.work / "t.json"))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("aqm", str(ctx.exception))

    def test_iterations(self):
        out = self.work / "consistency.json"
        self.simulate(iterations=2, duration_s=1.0, out=str(out))
        report = json.loads(out.read_text())
        self.assertEqual(report["iterations"], 2)
        self.assertEqual(report["throughput"]["pairs"], 1)


class EvalCommandTests(TempDirMixin, SimpleTestCase):
    def csv(self, name, values):
        path = self.work / name
        np.savetxt(path, np.asarray(values, dtype=float), delimiter=",")
        return path

    def test_jensen_identical(self):
        a = self.csv("a.csv", np.arange(50))
        out = self.work / "jensen.json"
        self.call("eval", "jensen", "--a", str(a), "--b", str(a), "--out", str(out))
        report = json.loads(out.read_text())
        self.assertEqual(report["distance"], 0.0)
        self.assertTrue(report["insignificant"])
        self.assertTrue(manifest_path(out).is_file())

    def test_autocorr_long_form_sessions(self):
        rng = np.random.default_rng(5)
        path = self.work / "sessions.csv"
        rows = [f"s{index},{value:.17g}" for index, length in enumerate((20, 35, 12, 28)) for value in rng.random(length)]
        path.write_text("\n".join(rows) + "\n")
        out = self.work / "autocorr.json"
        self.call("eval", "autocorr", "--a", str(path), "--b", str(path), "--max-lag", "3", "--out", str(out))
        report = json.loads(out.read_text())
        self.assertEqual(report["max_lag"], 3)
        self.assertEqual(sorted(report["lags"]), ["1", "2", "3"])
        self.assertTrue(all(lag["distance"] == 0.0 for lag in report["lags"].values()))

    def test_dtw_to_stdout(self):
        a = self.csv("a.csv", [1, 2, 3])
        b = self.csv("b.csv", [1, 2, 2, 3])
        output = self.call("eval", "dtw", "--traces", str(a), str(b))
        report = json.loads(output)
        self.assertEqual(report["pairs"], 1)
        self.assertEqual(report["values"][0][1], 0.0)

    def test_coverage(self):
        rng = np.random.default_rng(0)
        reference = self.csv("ref.csv", rng.normal(size=(200, 2)))
        candidates = self.csv("cand.csv", [[0.0, 0.0], [100.0, 100.0]])
        output = self.call("eval", "coverage", "--reference", str(reference), "--candidates", str(candidates))
        report = json.loads(output)
        self.assertEqual(report["candidates"], 2)
        self.assertEqual(report["frac_above"]["10.0"], 0.5)

    def test_missing_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("eval", "jensen", "--a", str(self.work / "x.csv"), "--b", str(self.work / "y.csv"))
        self.assertEqual(ctx.exception.returncode, 2)


class RunCommandTests(TempDirMixin, SimpleTestCase):
    def run_pipeline(self, out_dir, **options):
        options = {
            "internal_prefix": INTERNAL,
            "window_durations_s": [5.0],
            "stride_s": 5.0,
            "levels": "32",
            "rates_bps": "4e6,8e6",
            "latencies_ms": "10,50",
            "aqms": "pfifo",
            "duration_s": 1.0,
            **options,
        }
        return self.call("run", trace=str(self.write_trace()), out_dir=str(out_dir), **options)

    def test_grid(self):
        out_dir = self.work / "run"
        self.run_pipeline(out_dir, limit=3, toggle_min=0, toggle_max=1000, per_bucket=100, seed=11)
        traces = sorted((out_dir / "traces").glob("*.json"))
        manifests = [p for p in traces if p.name.endswith(".manifest.json")]
        self.assertEqual(len(traces) - len(manifests), 12)
        self.assertEqual(len(manifests), 12)
        for name in ("profiles", "selected", "trimmed", "sample", "eval"):
            self.assertTrue(manifest_path(out_dir / f"{name}.json").is_file(), name)
        report = json.loads((out_dir / "eval.json").read_text())
        self.assertEqual(report["traces"], 12)
        self.assertEqual(report["per_aqm"]["PFIFO"]["runs"], 12)
        seeds = {load_trace_json(out_dir / "traces" / f"{i}.json").config["app"]["seed"] for i in range(12)}
        self.assertEqual(seeds, set(range(11, 23)))
        run_manifest = json.loads((out_dir / "run.manifest.json").read_text())
        self.assertEqual(run_manifest["subcommand"], "run")
        self.assertIn(str(out_dir / "eval.json"), run_manifest["outputs"])

    def test_empty_sample(self):
        out_dir = self.work / "run"
        self.run_pipeline(out_dir, toggle_min=50, toggle_max=60)
        self.assertEqual(read_profiles_jsonl(out_dir / "sample.jsonl"), [])
        self.assertFalse((out_dir / "traces").exists())
        self.assertEqual(json.loads((out_dir / "eval.json").read_text())["traces"], 0)

    def test_unknown_aqm(self):
        out_dir = self.work / "run"
        with self.assertRaises(CommandError) as ctx:
            self.run_pipeline(out_dir, aqms="pfifo,red")
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("aqms", str(ctx.exception))
        self.assertFalse(out_dir.exists())
