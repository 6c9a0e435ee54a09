"""Affinity matrix construction over gallery samples plus the probe.

All builders return a dense ``(n + 1) x (n + 1)`` float64 matrix with the
probe in the last row/column: symmetric, entries in [0, 1] (negative
similarities are clipped to zero), zero diagonal.
"""

from __future__ import annotations

import numpy as np

from .datasets import FeatureSet


def validate_affinity(entries: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Check the affinity matrix invariants, returning the validated array."""
    entries = np.asarray(entries, dtype=np.float64)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"affinity must be square, got shape {entries.shape}")
    if not np.allclose(entries, entries.T, atol=atol, rtol=0.0):
        raise ValueError("affinity must be symmetric")
    if entries.min() < -atol or entries.max() > 1.0 + atol:
        raise ValueError("affinity entries must lie in [0, 1]")
    if np.abs(np.diagonal(entries)).max() > atol:
        raise ValueError("affinity diagonal must be zero")
    return entries


def _normalized_rows(features: FeatureSet, probe_vector: np.ndarray) -> np.ndarray:
    probe = np.asarray(probe_vector, dtype=np.float64)
    if probe.shape != (features.dim,):
        raise ValueError(f"probe vector must have dim {features.dim}, got {probe.shape}")
    stacked = np.vstack([features.vectors.astype(np.float64), probe[None, :]])
    norms = np.linalg.norm(stacked, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        offender = "probe" if bad[0] == features.n_samples else features.ids[bad[0]]
        raise ValueError(f"zero-norm feature vector for sample {offender!r}")
    return stacked / norms[:, None]


def cosine_affinity(features: FeatureSet, probe_vector: np.ndarray) -> np.ndarray:
    """Clipped cosine similarity between all samples and the probe (last)."""
    rows = _normalized_rows(features, probe_vector)
    sim = rows @ rows.T
    sim = np.clip((sim + sim.T) / 2.0, 0.0, 1.0)
    np.fill_diagonal(sim, 0.0)
    return sim


def temporal_affinity(
    features: FeatureSet, probe_vector: np.ndarray, decay: float = 0.005
) -> np.ndarray:
    """Cosine affinity damped by temporal distance between gallery samples.

    Gallery-gallery entries are multiplied by ``exp(-decay * |t_i - t_j|)``;
    probe edges stay pure cosine because the probe carries no timestamp.
    """
    if features.timestamps is None:
        raise ValueError("temporal affinity requires timestamps for every gallery sample")
    if not np.all(np.isfinite(features.timestamps)):
        raise ValueError("timestamps must be finite for every gallery sample")
    base = cosine_affinity(features, probe_vector)
    t = features.timestamps
    damping = np.exp(-decay * np.abs(t[:, None] - t[None, :]))
    n = features.n_samples
    base[:n, :n] *= damping
    np.fill_diagonal(base, 0.0)
    return base
