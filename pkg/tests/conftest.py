import numpy as np
import pytest

from activerank import SessionParams, init_state


def random_affinity(rng: np.random.Generator, m: int) -> np.ndarray:
    """Random valid affinity matrix: symmetric, [0, 1], zero diagonal."""
    raw = rng.random((m, m))
    sym = (raw + raw.T) / 2.0
    np.fill_diagonal(sym, 0.0)
    return sym


def random_state(rng: np.random.Generator, m: int, n_extra_labels: int | None = None):
    """A plausible mid-session state: probe labeled plus a few random labels."""
    params = SessionParams(alpha=float(rng.uniform(0.005, 0.5)), k=max(1, m - 1), q=1, rounds=0)
    state = init_state(m, m - 1, params)
    if n_extra_labels is None:
        n_extra_labels = int(rng.integers(0, max(1, m - 1)))
    chosen = rng.choice(m - 1, size=min(n_extra_labels, m - 1), replace=False)
    for idx in chosen:
        score = int(rng.integers(0, 2))
        state.labeled[int(idx)] = score
        state.reference[idx] = float(score)
        state.confidence[idx] = 1.0
        state.scores[idx] = float(score)
    state.scores = rng.random(m)
    labeled = state.labeled_indices()
    state.scores[labeled] = state.reference[labeled]
    return state, params


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
