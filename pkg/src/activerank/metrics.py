"""Retrieval quality metrics: AP, mAP, 11-point interpolated PR, smoothing loss."""

from __future__ import annotations

from typing import Hashable, Sequence

import numpy as np

RECALL_LEVELS = np.linspace(0.0, 1.0, 11)


def average_precision(ranking: Sequence[Hashable], relevant: set) -> float:
    """Average precision of a ranked list against a set of relevant items.

    Precision is sampled at every hit and averaged over the total number of
    relevant items, so relevant items missing from the list count as misses.
    """
    if not relevant:
        raise ValueError("relevant set must not be empty")
    hits = 0
    total = 0.0
    for position, item in enumerate(ranking, start=1):
        if item in relevant:
            hits += 1
            total += hits / position
    return total / len(relevant)


def mean_ap(values: Sequence[float]) -> float:
    """Arithmetic mean of per-probe average precisions."""
    if len(values) == 0:
        raise ValueError("cannot average an empty list of AP values")
    return float(np.mean(values))


def interpolated_pr_11pt(ranking: Sequence[Hashable], relevant: set) -> np.ndarray:
    """Interpolated precision at recall levels 0.0, 0.1, ..., 1.0.

    The interpolated precision at level ``r`` is the maximum precision over
    all cutoffs whose recall reaches at least ``r`` (0 when unreachable),
    which makes the curve non-increasing by construction.
    """
    if not relevant:
        raise ValueError("relevant set must not be empty")
    is_hit = np.array([item in relevant for item in ranking], dtype=bool)
    cum_hits = np.cumsum(is_hit)
    cutoffs = np.arange(1, len(ranking) + 1)
    precision = cum_hits / cutoffs if len(ranking) else np.zeros(0)
    recall = cum_hits / len(relevant) if len(ranking) else np.zeros(0)
    curve = np.zeros(len(RECALL_LEVELS))
    for i, level in enumerate(RECALL_LEVELS):
        reachable = recall >= level - 1e-12
        curve[i] = precision[reachable].max() if reachable.any() else 0.0
    return curve


def manifold_smoothing_loss(affinity: np.ndarray, indicator: Sequence[float]) -> float:
    """Average edge disagreement of a binary labeling over the graph.

    ``sum_ij a_ij (y_i - y_j)^2 / m^2`` -- high values mean the relevance
    labels do not vary smoothly over the similarity structure, the regime
    where diffusion-based refinement struggles.
    """
    affinity = np.asarray(affinity, dtype=np.float64)
    y = np.asarray(indicator, dtype=np.float64)
    m = y.shape[0]
    if affinity.shape != (m, m):
        raise ValueError(f"affinity must have shape ({m}, {m}), got {affinity.shape}")
    diff = y[:, None] - y[None, :]
    return float((affinity * diff**2).sum() / (m * m))
