from pathlib import Path
import json
import operator
import tempfile
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from netreplica.exceptions import ProfileFormatError, QueryError
from profiles.serializers import dumps_profile
from profiles.synthetic import make_profile, random_profiles
from .query import QUERY_ATTRIBUTES, ProfileQuery, parse_filter
from .store import ProfileStore, store_paths

ORACLE_OPS = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
}


def load_documents(jsonl_path):
    with open(jsonl_path) as handle:
        return [json.loads(text) for text in handle]


def oracle_select(documents, predicates):
    """Linear scan over the JSONL documents with plain Python comparisons."""
    selected = []
    for doc in documents:
        values = dict(doc["metrics"], window_duration_s=doc["window_duration_s"], direction=doc["direction"])
        if all(ORACLE_OPS[op](values[attr], value) for attr, op, value in predicates):
            selected.append(doc["id"])
    return sorted(selected)


class StoreTestMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.work = Path(self._tmp.name)
        self.store = ProfileStore(self.work / "ctp.jsonl")
        self.addCleanup(self._tmp.cleanup)
        self.addCleanup(self.store.close)


class IngestTests(StoreTestMixin, SimpleTestCase):
    def test_distinct_profiles(self):
        profiles = random_profiles(100, seed=1)
        self.assertEqual(self.store.ingest(profiles), len({p.id for p in profiles}))
        self.assertEqual(len(self.store), 100)

    def test_duplicate_id_last_write_wins(self):
        first = make_profile([100, 200], host_count=1)
        second = make_profile([100, 200], host_count=9)
        self.assertEqual(first.id, second.id)
        self.assertEqual(self.store.ingest([first, second]), 1)
        self.assertEqual(self.store.get(first.id).metrics.host_count, 9)

    def test_ingest_merges_with_existing(self):
        self.store.ingest(random_profiles(10, seed=2))
        self.assertEqual(self.store.ingest(random_profiles(5, seed=3)), 15)
        self.assertEqual(self.store.ingest(random_profiles(5, seed=3)), 15)

    def test_malformed_line_leaves_store_unchanged(self):
        self.store.ingest(random_profiles(3, seed=4))
        before = self.store.jsonl_path.read_bytes()

        source = self.work / "incoming.jsonl"
        lines = [dumps_profile(p) for p in random_profiles(10, seed=5)]
        lines[6] = lines[6][:-10]
        source.write_text("\n".join(lines) + "\n")
        with self.assertRaises(ProfileFormatError) as ctx:
            self.store.ingest(source)
        self.assertEqual(ctx.exception.line, 7)
        self.assertIn("line 7", str(ctx.exception))
        self.assertEqual(len(self.store), 3)
        self.assertEqual(self.store.jsonl_path.read_bytes(), before)

    def test_jsonl_sorted_by_id(self):
        self.store.ingest(random_profiles(20, seed=6))
        ids = [json.loads(line)["id"] for line in self.store.jsonl_path.read_text().splitlines()]
        self.assertEqual(ids, sorted(ids))

    def test_sidecar_index_path(self):
        jsonl, index = store_paths(self.work / "campus")
        self.assertEqual(jsonl.name, "campus.jsonl")
        self.assertEqual(index.name, "campus.idx.sqlite3")
        self.assertTrue(self.store.index_path.exists())

    def test_reopen_sees_committed_ingest(self):
        profiles = random_profiles(8, seed=7)
        self.store.ingest(profiles)
        self.store.close()
        with ProfileStore(self.work / "ctp.jsonl") as reopened:
            self.assertEqual(len(reopened), 8)
            self.assertEqual(reopened.get(profiles[0].id), profiles[0])

    def test_generations_pair_index_with_data_file(self):
        first = random_profiles(4, seed=8)
        self.store.ingest(first)
        data_path, locations = self.store._locate(self.store._rows().order_by("profile_id"))
        self.store.ingest(random_profiles(4, seed=9))
        self.assertNotEqual(self.store.data_path, data_path)
        # offsets taken before the second ingest still read the file they came from
        loaded = self.store._load(data_path, locations)
        self.assertEqual([p.id for p in loaded], sorted({p.id for p in first}))
        self.assertEqual(self.store.jsonl_path.read_bytes(), self.store.data_path.read_bytes())
        self.store.ingest(random_profiles(2, seed=10))
        self.assertFalse(data_path.exists())
        self.assertEqual(len(list(self.work.glob("ctp.jsonl.g*"))), 2)

    def test_failed_commit_keeps_committed_generation(self):
        profiles = random_profiles(3, seed=11)
        self.store.ingest(profiles)
        data_path = self.store.data_path
        before = self.store.jsonl_path.read_bytes()
        with mock.patch("store.store._index_row", side_effect=RuntimeError("disk full")):
            with self.assertRaises(RuntimeError):
                self.store.ingest(random_profiles(3, seed=12))
        self.assertEqual(self.store.data_path, data_path)
        self.assertEqual(self.store.jsonl_path.read_bytes(), before)
        self.assertEqual(sorted(p.id for p in self.store.select()), sorted({p.id for p in profiles}))
        self.assertEqual(list(self.work.glob("ctp.jsonl.g*")), [data_path])


class SelectTests(StoreTestMixin, SimpleTestCase):
    def test_pmr95_threshold(self):
        profiles = [
            make_profile([1000] * 19 + [1000], window_start_s=0.0),  # pmr95 1
            make_profile([0] * 10 + [100] * 9 + [2000], window_start_s=1.0),
            make_profile([0] * 18 + [5000, 5000], window_start_s=2.0),
        ]
        self.store.ingest(profiles)
        expected = sorted(p.id for p in profiles if p.metrics.pmr95 >= 1)
        selected = self.store.select(ProfileQuery.parse("pmr95>=1"))
        self.assertEqual([p.id for p in selected], expected)

    def test_empty_store(self):
        self.assertEqual(self.store.select(ProfileQuery.parse("pmr>0")), [])
        self.assertEqual(self.store.count(), 0)

    def test_order_and_limit(self):
        self.store.ingest(random_profiles(50, seed=8))
        top = self.store.select(ProfileQuery.parse("", limit=5, order_by="mean_throughput_bps:desc"))
        means = [p.metrics.mean_throughput_bps for p in top]
        self.assertEqual(len(top), 5)
        self.assertEqual(means, sorted(means, reverse=True))
        everything = self.store.select(ProfileQuery.parse(""))
        self.assertEqual([p.id for p in everything], sorted(p.id for p in everything))

    def test_direction_and_integer_bounds(self):
        profiles = random_profiles(200, seed=9)
        self.store.ingest(profiles)
        got = {p.id for p in self.store.select(ProfileQuery.parse("direction=up && host_count<2.5"))}
        want = {p.id for p in profiles if p.direction.value == "UP" and p.metrics.host_count < 2.5}
        self.assertEqual(got, want)
        self.assertEqual(self.store.count(ProfileQuery.parse("flow_count=3.5")), 0)

    def test_select_is_read_only(self):
        self.store.ingest(random_profiles(30, seed=10))
        query = ProfileQuery.parse("cov>0.5")
        self.assertEqual(self.store.select(query), self.store.select(query))

    def test_query_errors(self):
        for expression in ("speed>1", "pmr>>1", "direction>UP", "direction=LEFT", "pmr>abc", "pmr>nan"):
            with self.assertRaises(QueryError, msg=expression):
                parse_filter(expression)
        with self.assertRaises(QueryError):
            ProfileQuery.parse("", order_by="pmr:sideways")

    def test_unicode_operators(self):
        self.assertEqual(parse_filter("pmr ≥ 2 && cov ≤ 1"), parse_filter("pmr>=2 && cov<=1"))


class OracleEquivalenceTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls._tmp = tempfile.TemporaryDirectory()
        cls.store = ProfileStore(Path(cls._tmp.name) / "big.jsonl")
        cls.profiles = random_profiles(10_000, seed=42)
        cls.store.ingest(cls.profiles)
        cls.documents = load_documents(cls.store.jsonl_path)

    @classmethod
    def tearDownClass(cls):
        cls.store.close()
        cls._tmp.cleanup()
        super().tearDownClass()

    def random_predicates(self, rng):
        predicates = []
        for _ in range(rng.integers(1, 4)):
            attribute = QUERY_ATTRIBUTES[rng.integers(0, len(QUERY_ATTRIBUTES))]
            if attribute == "direction":
                predicates.append(("direction", "=", "UP" if rng.random() < 0.5 else "DOWN"))
                continue
            op = list(ORACLE_OPS)[rng.integers(0, len(ORACLE_OPS))]
            sample = self.profiles[rng.integers(0, len(self.profiles))]
            if attribute == "window_duration_s":
                value = sample.window_duration_s
            else:
                value = getattr(sample.metrics, attribute)
            predicates.append((attribute, op, value))
        return predicates

    def test_select_matches_linear_scan(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            predicates = self.random_predicates(rng)
            expression = " && ".join(f"{a}{op}{v!r}" if a != "direction" else f"{a}{op}{v}" for a, op, v in predicates)
            selected = [p.id for p in self.store.select(ProfileQuery.parse(expression))]
            self.assertEqual(selected, oracle_select(self.documents, predicates), expression)

    def test_mean_threshold_fraction(self):
        want = sum(1 for p in self.profiles if p.metrics.mean_throughput_bps > 1e6)
        self.assertEqual(self.store.count(ProfileQuery.parse("mean_throughput_bps>1e6")), want)
