from pathlib import Path
from types import SimpleNamespace
import tempfile

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from netreplica.exceptions import ArtifactIOError, EvaluationInputError
from .autocorr import autocorrelation_distances, autocorrelation_profile
from .coverage import mahalanobis_coverage, mahalanobis_distances
from .distributions import distance_report, jensen_distance
from .dtw import dtw, pairwise_consistency
from .features import (
    FEATURE_COLUMNS,
    load_csv_matrix,
    load_csv_series,
    load_csv_sessions,
    slow_path_filter,
    trace_features,
    write_csv_matrix,
)


def brute_force_dtw(a, b):
    n, m = len(a), len(b)
    acc = [[float("inf")] * (m + 1) for _ in range(n + 1)]
    acc[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = abs(float(a[i - 1]) - float(b[j - 1]))
            acc[i][j] = cost + min(acc[i - 1][j - 1], acc[i - 1][j], acc[i][j - 1])
    return acc[n][m]


def pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = (sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)) ** 0.5
    return num / den


class DtwTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(dtw([0, 0], [1, 1]), 2.0)
        self.assertEqual(dtw([3, 1, 4, 1, 5], [3, 1, 4, 1, 5]), 0.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = rng.normal(size=rng.integers(1, 12))
            b = rng.normal(size=rng.integers(1, 12))
            self.assertEqual(dtw(a, b), brute_force_dtw(a, b))
            self.assertEqual(dtw(a, b), dtw(b, a))

    def test_empty_series(self):
        with self.assertRaises(EvaluationInputError):
            dtw([], [1.0])

    def test_pairwise_counts(self):
        rng = np.random.default_rng(8)
        traces = [rng.random(20) for _ in range(10)]
        self.assertEqual(pairwise_consistency(traces).summary()["pairs"], 45)
        self.assertEqual(pairwise_consistency(traces[:2]).summary()["pairs"], 1)

    def test_identical_traces_are_consistent(self):
        matrix = pairwise_consistency([[1, 2, 3]] * 3, labels=["a", "b", "c"])
        self.assertFalse(matrix.values.any())
        self.assertEqual(matrix.summary(), {"pairs": 3, "mean": 0.0, "std": 0.0})

    def test_matrix_is_symmetric(self):
        rng = np.random.default_rng(9)
        matrix = pairwise_consistency([rng.random(8) for _ in range(4)])
        np.testing.assert_array_equal(matrix.values, matrix.values.T)
        np.testing.assert_array_equal(np.diag(matrix.values), 0)

    def test_needs_two_traces(self):
        with self.assertRaises(EvaluationInputError):
            pairwise_consistency([[1.0, 2.0]])


class JensenTests(SimpleTestCase):
    def test_identical_samples(self):
        self.assertEqual(jensen_distance([1, 2, 3, 4], [1, 2, 3, 4]), 0.0)

    def test_disjoint_supports(self):
        self.assertAlmostEqual(jensen_distance([0, 0.1, 0.2], [9, 9.5, 10]), 1.0, places=12)

    def test_equal_histograms(self):
        self.assertEqual(jensen_distance([0, 0, 1, 1], [0, 1], bins=2), 0.0)

    def test_degenerate_range(self):
        self.assertEqual(jensen_distance([5, 5], [5]), 0.0)

    def test_bounds_on_random_pairs(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            a = rng.normal(size=rng.integers(1, 30))
            b = rng.normal(loc=rng.random() * 3, size=rng.integers(1, 30))
            distance = jensen_distance(a, b)
            self.assertGreaterEqual(distance, 0.0)
            self.assertLessEqual(distance, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
    )
    def test_symmetric(self, a, b):
        self.assertAlmostEqual(jensen_distance(a, b), jensen_distance(b, a), places=12)

    def test_input_errors(self):
        with self.assertRaises(EvaluationInputError):
            jensen_distance([], [1.0])
        with self.assertRaises(EvaluationInputError):
            jensen_distance([1.0], [2.0], bins=1)

    def test_report_flag(self):
        self.assertTrue(distance_report(0.1)["insignificant"])
        self.assertFalse(distance_report(0.3)["insignificant"])


class AutocorrelationTests(SimpleTestCase):
    def test_alternating_sequence(self):
        profile = autocorrelation_profile([[1, -1] * 5], max_lag=7)
        self.assertAlmostEqual(profile.per_lag[1][0], -1.0, places=12)
        self.assertAlmostEqual(profile.per_lag[2][0], 1.0, places=12)

    def test_ramp_matches_direct_formula(self):
        ramp = list(range(10))
        profile = autocorrelation_profile([ramp], max_lag=3)
        for lag in (1, 2, 3):
            self.assertAlmostEqual(profile.per_lag[lag][0], pearson(ramp[:-lag], ramp[lag:]), places=12)

    def test_constant_sequence_skipped(self):
        profile = autocorrelation_profile([[4] * 12, list(range(12))], max_lag=2)
        self.assertEqual(profile.zero_variance, 1)
        self.assertEqual(len(profile.per_lag[1]), 1)

    def test_all_too_short(self):
        with self.assertRaises(EvaluationInputError):
            autocorrelation_profile([[1, 2, 3]], max_lag=7)

    def test_distances_per_lag(self):
        rng = np.random.default_rng(11)
        sequences = [rng.random(30) for _ in range(20)]
        distances = autocorrelation_distances(sequences, sequences, max_lag=7)
        self.assertEqual(sorted(distances), list(range(1, 8)))
        self.assertTrue(all(d == 0.0 for d in distances.values()))


class CoverageTests(SimpleTestCase):
    def test_known_covariance(self):
        distances = mahalanobis_distances([[2.0, 1.0]], [0.0, 0.0], [[2.0, 0.0], [0.0, 0.5]])
        self.assertAlmostEqual(distances[0], 2.0, places=12)

    def test_identity_covariance_is_euclidean(self):
        rng = np.random.default_rng(12)
        points = rng.normal(size=(50, 4))
        center = rng.normal(size=4)
        got = mahalanobis_distances(points, center, np.eye(4))
        np.testing.assert_allclose(got, np.linalg.norm(points - center, axis=1), rtol=0, atol=1e-9)

    def test_mean_candidate(self):
        rng = np.random.default_rng(13)
        reference = rng.normal(size=(100, 3))
        report = mahalanobis_coverage(reference, reference.mean(axis=0, keepdims=True))
        self.assertAlmostEqual(report.distances[0], 0.0, places=9)

    def test_affine_invariance(self):
        rng = np.random.default_rng(14)
        reference = rng.normal(size=(300, 3))
        candidates = rng.normal(scale=3.0, size=(40, 3))
        transform = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        shift = rng.normal(size=3)
        plain = mahalanobis_coverage(reference, candidates, ridge=0.0).distances
        moved = mahalanobis_coverage(reference @ transform.T + shift, candidates @ transform.T + shift, ridge=0.0).distances
        np.testing.assert_allclose(moved, plain, rtol=1e-6)

    def test_report_fields(self):
        rng = np.random.default_rng(15)
        reference = rng.normal(size=(200, 2))
        candidates = np.vstack([np.zeros((3, 2)), np.full((1, 2), 100.0)])
        report = mahalanobis_coverage(reference, candidates, thresholds=(10,))
        self.assertEqual(report.frac_above, {10.0: 0.25})
        self.assertTrue((report.distances >= 0).all())
        self.assertEqual(report.as_dict()["candidates"], 4)

    def test_input_errors(self):
        with self.assertRaises(EvaluationInputError):
            mahalanobis_coverage(np.zeros((2, 3)), np.zeros((1, 3)))
        with self.assertRaises(EvaluationInputError):
            mahalanobis_coverage(np.random.default_rng(0).normal(size=(10, 2)), np.zeros((1, 3)))


class FeatureTests(SimpleTestCase):
    def trace(self):
        return SimpleNamespace(
            throughput_bps=[1e6, 2e6, 4e6, 3e6],
            rtt_ms=[20.0, float("nan"), 30.0, 50.0],
            queue_pkts=[0.0, 1.0, 2.0, 2.0],
            drops=[0, 0, 1, 0],
        )

    def test_rows_and_differences(self):
        rows = trace_features(self.trace())
        self.assertEqual(rows.shape, (2, len(FEATURE_COLUMNS)))
        self.assertEqual(rows[0].tolist(), [1e6, 20.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        self.assertEqual(rows[1].tolist(), [3e6, 50.0, 2.0, 0.0, -1e6, 20.0, 0.0, -1.0])

    def test_slow_path_filter(self):
        rows = trace_features(self.trace())
        kept = slow_path_filter(rows, max_throughput_bps=2e6, min_rtt_ms=10)
        self.assertEqual(kept[:, 0].tolist(), [1e6])

    def test_csv_round_trip_and_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "m.csv"
            write_csv_matrix(path, [[1.5, 2.0], [3.0, 4.25]])
            self.assertEqual(load_csv_matrix(path).tolist(), [[1.5, 2.0], [3.0, 4.25]])
            self.assertEqual(load_csv_series(path).tolist(), [1.5, 2.0, 3.0, 4.25])
            (Path(tmp) / "bad.csv").write_text("1,x\n")
            with self.assertRaises(EvaluationInputError):
                load_csv_matrix(Path(tmp) / "bad.csv")
            with self.assertRaises(ArtifactIOError):
                load_csv_matrix(Path(tmp) / "missing.csv")

    def test_sessions_of_different_lengths(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "sessions.csv"
            path.write_text("b,1\nb,2\na,5\nb,3\na,6\nc,0.5\n")
            sessions = load_csv_sessions(path)
            self.assertEqual([s.tolist() for s in sessions], [[1.0, 2.0, 3.0], [5.0, 6.0], [0.5]])
            (Path(tmp) / "wide.csv").write_text("1,2,3\n")
            with self.assertRaisesMessage(EvaluationInputError, "session,value"):
                load_csv_sessions(Path(tmp) / "wide.csv")
            (Path(tmp) / "text.csv").write_text("a,x\n")
            with self.assertRaises(EvaluationInputError):
                load_csv_sessions(Path(tmp) / "text.csv")
