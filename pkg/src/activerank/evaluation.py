"""Simulated-oracle benchmarking: strategy sweeps, reports, CSV export.

The experiment runner replays ground truth through a deterministic oracle
for every (strategy, probe, seed) combination and records per-round average
precision plus wall-clock. Strategies:

* ``active`` -- confidence-driven suggestions, confidence-weighted ranking;
* ``mr``     -- uniform diffusion confidence before every ranking step
  (classic manifold ranking), same suggestion step;
* ``random`` -- seeded uniform candidate sampling, same ranking step.

Each strategy can run with either solver, so solver comparisons come out as
paired columns of the same report.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .datasets import Dataset, GroundTruth
from .engine import IRRELEVANT, RELEVANT, UNSURE, SessionParams
from .sessions import ProbeSession, run_probe_session

REPORT_SCHEMA = "activerank-experiment/1"
CSV_COLUMNS = ["strategy", "probe", "seed", "round", "map", "elapsed_ms"]

POLICIES = ("active", "mr", "random")


def simulated_oracle(
    ground_truth: GroundTruth,
    probe_id: str,
    ids: Sequence[str],
    unsure_rate: float = 0.0,
    seed: int = 0,
) -> Callable[[Sequence[int]], dict[int, str]]:
    """Ground-truth label source over session indices.

    Answers ``relevant``/``irrelevant`` according to co-membership, except
    that with probability ``unsure_rate`` it abstains (deterministic in
    ``seed`` and the query sequence).
    """
    if not 0.0 <= unsure_rate < 1.0:
        raise ValueError(f"unsure_rate must lie in [0, 1), got {unsure_rate}")
    relevant = ground_truth.for_probe(probe_id)
    rng = np.random.default_rng(seed)

    def oracle(suggestions: Sequence[int]) -> dict[int, str]:
        answers: dict[int, str] = {}
        for index in suggestions:
            if not 0 <= index < len(ids):
                raise IndexError(f"suggested index {index} outside the candidate list")
            if unsure_rate > 0.0 and rng.random() < unsure_rate:
                answers[index] = UNSURE
            else:
                answers[index] = RELEVANT if ids[index] in relevant else IRRELEVANT
        return answers

    return oracle


@dataclass(frozen=True)
class Strategy:
    """A named (selection policy, solver) combination."""

    policy: str
    solver: str = "approximate"
    label: str | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.label is None:
            suffix = "" if self.solver == "approximate" else f"-{self.solver}"
            object.__setattr__(self, "label", f"{self.policy}{suffix}")

    def session_params(self, base: SessionParams) -> SessionParams:
        return replace(base, solver=self.solver, mr_baseline=self.policy == "mr")


def _probe_seed(seed: int, probe_index: int) -> int:
    return seed * 100_003 + probe_index


def run_single_session(
    dataset: Dataset,
    probe_id: str,
    strategy: Strategy,
    params: SessionParams,
    seed: int,
    unsure_rate: float = 0.0,
) -> dict:
    """Run one (probe, strategy, seed) session and return its result row."""
    session = ProbeSession(dataset, probe_id, strategy.session_params(params))
    probe_index = dataset.probe_ids.index(probe_id)
    oracle = simulated_oracle(
        dataset.ground_truth,
        probe_id,
        session.candidates.ids,
        unsure_rate=unsure_rate,
        seed=_probe_seed(seed, probe_index),
    )
    selection_rng = None
    if strategy.policy == "random":
        selection_rng = np.random.default_rng(_probe_seed(seed, probe_index) + 1)
    run_probe_session(
        session,
        oracle,
        selection="random" if strategy.policy == "random" else "model",
        rng=selection_rng,
    )
    return {
        "strategy": strategy.label,
        "probe": probe_id,
        "seed": seed,
        "ap_per_round": session.ap_per_round(),
        "elapsed_ms_per_round": [r.elapsed * 1000.0 for r in session.rounds],
        "labels_per_round": [
            {session.candidate_id(i): lab for i, lab in batch.items()}
            for batch in session.labels_log
        ],
    }


def run_experiment(
    dataset: Dataset,
    params: SessionParams,
    strategies: Sequence[Strategy],
    seeds: Sequence[int],
    unsure_rate: float = 0.0,
    probes: Sequence[str] | None = None,
) -> dict:
    """Sweep strategies x probes x seeds and assemble the report.

    The report carries one result row per session plus per-strategy
    summaries (mean and std of mAP per round over probes and seeds, mean
    per-round wall clock).  Fully deterministic in its arguments.  Failures
    propagate after the completed rows are attached to the exception.
    """
    if dataset.ground_truth is None:
        raise ValueError("experiments need a dataset with ground truth")
    if not strategies:
        raise ValueError("at least one strategy is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    labels = [s.label for s in strategies]
    if len(set(labels)) != len(labels):
        raise ValueError(f"strategy labels must be unique, got {labels}")
    probe_ids = list(probes) if probes is not None else list(dataset.probe_ids)

    started = time.perf_counter()
    results: list[dict] = []
    try:
        for strategy in strategies:
            for seed in seeds:
                for probe_id in probe_ids:
                    results.append(
                        run_single_session(
                            dataset, probe_id, strategy, params, seed, unsure_rate
                        )
                    )
    except Exception as exc:
        exc.partial_results = results
        raise

    rounds = params.rounds + 1
    summary: dict[str, dict] = {}
    for strategy in strategies:
        rows = [r for r in results if r["strategy"] == strategy.label]
        ap = np.array([r["ap_per_round"] for r in rows])
        elapsed = np.array([r["elapsed_ms_per_round"] for r in rows])
        summary[strategy.label] = {
            "map_per_round": ap.mean(axis=0).tolist(),
            "map_std_per_round": ap.std(axis=0).tolist(),
            "mean_elapsed_ms_per_round": elapsed.mean(axis=0).tolist(),
            "sessions": len(rows),
        }

    return {
        "schema": REPORT_SCHEMA,
        "dataset": dataset.name,
        "params": {
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "k": params.k,
            "q": params.q,
            "rounds": params.rounds,
        },
        "strategies": [
            {"label": s.label, "policy": s.policy, "solver": s.solver} for s in strategies
        ],
        "seeds": list(seeds),
        "probes": probe_ids,
        "unsure_rate": unsure_rate,
        "rounds_per_session": rounds,
        "results": results,
        "summary": summary,
        "total_elapsed_s": time.perf_counter() - started,
    }


def write_report(report: Mapping, json_path: str | Path) -> Path:
    """Write the JSON report; a CSV with per-round rows lands alongside it."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report, indent=2))
    csv_path = json_path.with_suffix(".csv")
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in report["results"]:
            for round_index, (ap, ms) in enumerate(
                zip(row["ap_per_round"], row["elapsed_ms_per_round"])
            ):
                writer.writerow(
                    [row["strategy"], row["probe"], row["seed"], round_index, ap, ms]
                )
    return csv_path
