"""Simulated oracle and experiment runner tests."""

import csv
import json

import numpy as np
import pytest

import activerank as ar
from activerank.datasets import Dataset
from activerank.evaluation import CSV_COLUMNS, run_single_session


@pytest.fixture(scope="module")
def small_dataset():
    features, gt, probes = ar.generate_synthetic(seed=42, n_clusters=4, per_cluster=8, dim=16)
    return Dataset(name="small", features=features, ground_truth=gt, probe_ids=probes)


def small_params(**overrides):
    defaults = dict(alpha=0.01, k=32, q=3, rounds=2)
    defaults.update(overrides)
    return ar.SessionParams(**defaults)


class TestSimulatedOracle:
    def test_relevant_id_answered_relevant(self, small_dataset):
        probe = small_dataset.probe_ids[0]
        gallery_ids = small_dataset.gallery_ids
        oracle = ar.simulated_oracle(small_dataset.ground_truth, probe, gallery_ids)
        relevant = small_dataset.ground_truth.for_probe(probe)
        rel_index = gallery_ids.index(next(iter(relevant)))
        irrel_index = next(
            i for i, g in enumerate(gallery_ids) if g not in relevant
        )
        answers = oracle([rel_index, irrel_index])
        assert answers[rel_index] == ar.RELEVANT
        assert answers[irrel_index] == ar.IRRELEVANT

    def test_unsure_pattern_reproducible(self, small_dataset):
        probe = small_dataset.probe_ids[0]
        ids = small_dataset.gallery_ids
        first = ar.simulated_oracle(small_dataset.ground_truth, probe, ids, 0.9, seed=5)
        second = ar.simulated_oracle(small_dataset.ground_truth, probe, ids, 0.9, seed=5)
        queries = [[0, 1, 2], [3, 4], [5]]
        assert [first(q) for q in queries] == [second(q) for q in queries]

    def test_unknown_index_errors(self, small_dataset):
        probe = small_dataset.probe_ids[0]
        oracle = ar.simulated_oracle(small_dataset.ground_truth, probe, small_dataset.gallery_ids)
        with pytest.raises(IndexError):
            oracle([10_000])

    def test_invalid_unsure_rate(self, small_dataset):
        with pytest.raises(ValueError, match="unsure_rate"):
            ar.simulated_oracle(
                small_dataset.ground_truth,
                small_dataset.probe_ids[0],
                small_dataset.gallery_ids,
                unsure_rate=1.0,
            )


class TestProbeSession:
    def test_session_metrics_need_ground_truth(self, small_dataset):
        stripped = Dataset(
            name="nogt",
            features=small_dataset.features,
            ground_truth=None,
            probe_ids=small_dataset.probe_ids,
        )
        session = ar.ProbeSession(stripped, stripped.probe_ids[0], small_params())
        session.run_round()
        with pytest.raises(ValueError, match="ground truth"):
            session.ap()

    def test_merged_ranking_is_full_gallery_permutation(self, small_dataset):
        session = ar.ProbeSession(small_dataset, small_dataset.probe_ids[1], small_params())
        session.run_round()
        merged = session.merged_ranking()
        assert sorted(merged) == sorted(small_dataset.gallery_ids)

    def test_k_truncation_limits_candidates(self, small_dataset):
        session = ar.ProbeSession(small_dataset, small_dataset.probe_ids[0], small_params(k=10))
        assert session.k == 10
        assert session.candidates.n_samples == 10
        assert session.affinity.shape == (11, 11)
        merged = session.merged_ranking(session.run_round())
        # tail beyond k untouched
        assert merged[10:] == session.initial_ranking_ids()[10:]

    def test_oversized_k_clamped(self, small_dataset):
        session = ar.ProbeSession(small_dataset, small_dataset.probe_ids[0], small_params(k=999))
        assert session.k == len(small_dataset.gallery_ids)

    def test_soft_init_uses_probe_affinity(self, small_dataset):
        session = ar.ProbeSession(
            small_dataset, small_dataset.probe_ids[0], small_params(soft_init=True)
        )
        expected = session.affinity[-1].copy()
        expected[-1] = 1.0
        np.testing.assert_allclose(session.state.initial_scores, expected)
        np.testing.assert_array_equal(session.state.confidence, np.ones(session.k + 1))


class TestRunExperiment:
    def test_report_shape_contract(self, small_dataset):
        report = ar.run_experiment(
            small_dataset,
            small_params(),
            [ar.Strategy("active"), ar.Strategy("random")],
            seeds=[1, 2],
        )
        assert report["schema"] == "activerank-experiment/1"
        labels = {s["label"] for s in report["strategies"]}
        assert labels == {"active", "random"}
        assert len(report["results"]) == 2 * 2 * len(small_dataset.probe_ids)
        for row in report["results"]:
            assert len(row["ap_per_round"]) == 3
            assert len(row["elapsed_ms_per_round"]) == 3
        for label in labels:
            assert len(report["summary"][label]["map_per_round"]) == 3

    def test_single_run_matches_direct_session(self, small_dataset):
        probe = small_dataset.probe_ids[2]
        strategy = ar.Strategy("active")
        report = ar.run_experiment(
            small_dataset, small_params(), [strategy], seeds=[7], probes=[probe]
        )
        direct = run_single_session(small_dataset, probe, strategy, small_params(), seed=7)
        assert report["results"][0]["ap_per_round"] == direct["ap_per_round"]
        np.testing.assert_allclose(
            report["summary"]["active"]["map_per_round"], direct["ap_per_round"]
        )

    def test_deterministic(self, small_dataset):
        args = (
            small_dataset,
            small_params(),
            [ar.Strategy("active"), ar.Strategy("mr"), ar.Strategy("random")],
            [3],
        )
        first = ar.run_experiment(*args)
        second = ar.run_experiment(*args)
        for a, b in zip(first["results"], second["results"]):
            assert a["ap_per_round"] == b["ap_per_round"]
            assert a["labels_per_round"] == b["labels_per_round"]

    def test_solver_comparison_produces_paired_columns(self, small_dataset):
        report = ar.run_experiment(
            small_dataset,
            small_params(rounds=1),
            [ar.Strategy("active"), ar.Strategy("active", solver="qp")],
            seeds=[1],
        )
        assert {s["label"] for s in report["strategies"]} == {"active", "active-qp"}
        assert set(report["summary"]) == {"active", "active-qp"}

    def test_random_strategy_differs_only_in_selection(self, small_dataset):
        probe = small_dataset.probe_ids[0]
        active = run_single_session(
            small_dataset, probe, ar.Strategy("active"), small_params(), seed=5
        )
        random = run_single_session(
            small_dataset, probe, ar.Strategy("random"), small_params(), seed=5
        )
        # identical before any feedback is applied
        assert active["ap_per_round"][0] == random["ap_per_round"][0]

    def test_duplicate_labels_rejected(self, small_dataset):
        with pytest.raises(ValueError, match="unique"):
            ar.run_experiment(
                small_dataset,
                small_params(),
                [ar.Strategy("active"), ar.Strategy("active")],
                seeds=[1],
            )

    def test_empty_strategy_or_seeds(self, small_dataset):
        with pytest.raises(ValueError, match="strategy"):
            ar.run_experiment(small_dataset, small_params(), [], seeds=[1])
        with pytest.raises(ValueError, match="seed"):
            ar.run_experiment(small_dataset, small_params(), [ar.Strategy("active")], seeds=[])

    def test_report_written_with_csv(self, small_dataset, tmp_path):
        report = ar.run_experiment(
            small_dataset, small_params(rounds=1), [ar.Strategy("active")], seeds=[1]
        )
        csv_path = ar.write_report(report, tmp_path / "report.json")
        loaded = json.loads((tmp_path / "report.json").read_text())
        assert loaded["summary"]["active"]["map_per_round"] == report["summary"]["active"][
            "map_per_round"
        ]
        with csv_path.open() as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 1 + len(report["results"]) * 2  # rounds+1 lines per session


class TestUnsureHandling:
    def test_unsure_labels_never_reenter_pool(self, small_dataset):
        probe = small_dataset.probe_ids[0]
        session = ar.ProbeSession(small_dataset, probe, small_params(rounds=3, q=2))
        always_unsure = lambda suggestions: {i: ar.UNSURE for i in suggestions}
        ar.run_probe_session(session, always_unsure)
        suggested = [i for batch in session.labels_log for i in batch]
        assert len(set(suggested)) == len(suggested)
        assert session.state.labeled == {session.state.probe: 1}
        assert len(session.state.skipped) == 6
