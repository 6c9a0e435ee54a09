"""Per-probe session harness: truncation, affinity, rounds, merging.

Wires the dataset layer to the core optimizer for one probe: builds the
initial Euclidean ranking, truncates to the top-K candidates, constructs
the affinity matrix over candidates + probe, and exposes stepwise round
execution plus final-list merging.  Adds no numerical behavior of its own;
a transcript replayed through the core functions directly reproduces the
same scores bit for bit.
"""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

import numpy as np

from . import engine
from .affinity import cosine_affinity, temporal_affinity
from .datasets import Dataset, initial_ranking
from .engine import RankingState, RoundResult, SessionParams
from .metrics import average_precision

logger = logging.getLogger(__name__)


class ProbeSession:
    """One probe's interactive refinement over its top-K initial candidates."""

    def __init__(
        self,
        dataset: Dataset,
        probe_id: str,
        params: SessionParams,
        affinity_kind: str = "cosine",
        temporal_decay: float = 0.005,
    ):
        self.dataset = dataset
        self.probe_id = probe_id
        self.params = params
        self.gallery = dataset.gallery()
        self.probe_vector = dataset.probe_vector(probe_id)

        # global gallery indices, nearest first
        self.initial_order = initial_ranking(self.gallery, self.probe_vector)
        n = self.gallery.n_samples
        self.k = min(params.k, n)
        if params.k > n:
            logger.warning("k=%d exceeds gallery size %d; clamping", params.k, n)

        self.top_indices = self.initial_order[: self.k]
        self.candidates = self.gallery.subset(self.top_indices)
        if affinity_kind == "cosine":
            self.affinity = cosine_affinity(self.candidates, self.probe_vector)
        elif affinity_kind == "temporal":
            self.affinity = temporal_affinity(self.candidates, self.probe_vector, temporal_decay)
        else:
            raise ValueError(f"unknown affinity kind {affinity_kind!r}")

        # candidates are already in initial-rank order, so the position of
        # session index i is i; the probe sits last with no meaningful rank
        self.positions = np.arange(self.k + 1)

        initial_scores = None
        if params.soft_init:
            initial_scores = self.affinity[-1].copy()
            initial_scores[-1] = 1.0
        self.state: RankingState = engine.init_state(
            self.k + 1, self.k, params, initial_scores=initial_scores
        )
        self.rounds: list[RoundResult] = []
        self.labels_log: list[dict[int, str]] = []

    # -- stepping ---------------------------------------------------------

    def run_round(self) -> RoundResult:
        result = engine.run_round(self.affinity, self.state, self.params, self.positions)
        self.rounds.append(result)
        return result

    def apply_labels(self, labels: Mapping[int, str]) -> None:
        engine.apply_feedback(self.state, dict(labels))
        self.labels_log.append(dict(labels))

    def eligible_pool(self) -> list[int]:
        """Session indices that may still be suggested."""
        blocked = set(self.state.labeled) | self.state.skipped | {self.state.probe}
        return [i for i in range(self.k) if i not in blocked]

    # -- id mapping -------------------------------------------------------

    def candidate_id(self, session_index: int) -> str:
        return self.candidates.ids[session_index]

    def session_index(self, sample_id: str) -> int:
        return self.candidates.index_of(sample_id)

    def suggestion_ids(self, result: RoundResult) -> list[str]:
        return [self.candidate_id(i) for i in result.suggestions]

    # -- results ----------------------------------------------------------

    def merged_ranking(self, result: RoundResult | None = None) -> list[str]:
        """Full gallery ranking with the refined top-K merged back in."""
        if result is None:
            if not self.rounds:
                raise RuntimeError("no round has been run yet")
            result = self.rounds[-1]
        refined = result.refined_scores[: self.k]
        merged = engine.merge_topk(self.initial_order, refined, self.k)
        return [self.gallery.ids[i] for i in merged]

    def initial_ranking_ids(self) -> list[str]:
        return [self.gallery.ids[i] for i in self.initial_order]

    def ap(self, result: RoundResult | None = None) -> float:
        if self.dataset.ground_truth is None:
            raise ValueError("dataset has no ground truth")
        relevant = self.dataset.ground_truth.for_probe(self.probe_id)
        return average_precision(self.merged_ranking(result), relevant)

    def ap_per_round(self) -> list[float]:
        return [self.ap(r) for r in self.rounds]


def run_probe_session(
    session: ProbeSession,
    oracle,
    selection: str = "model",
    rng: np.random.Generator | None = None,
) -> list[RoundResult]:
    """Drive a session to completion against a label source.

    ``selection="model"`` labels the optimizer's own suggestions;
    ``selection="random"`` replaces candidate selection with seeded uniform
    sampling over the eligible pool (everything else identical), the
    standard control for isolating the suggestion policy.
    """
    if selection not in ("model", "random"):
        raise ValueError(f"unknown selection policy {selection!r}")
    if selection == "random" and rng is None:
        raise ValueError("random selection needs an explicit rng")
    params = session.params
    for t in range(params.rounds + 1):
        result = session.run_round()
        if t == params.rounds:
            break
        if selection == "model":
            chosen = result.suggestions
        else:
            pool = session.eligible_pool()
            size = min(params.q, len(pool))
            chosen = sorted(rng.choice(pool, size=size, replace=False).tolist()) if size else []
        answers = oracle(chosen)
        session.apply_labels({i: answers[i] for i in chosen})
    return session.rounds
