"""Confidence-weighted graph ranking with active feedback suggestion.

The optimizer couples two vectors over a similarity graph of ``m`` samples
(the gallery plus the probe, probe always last):

* ranking scores -- refined by diffusing reference scores through a
  confidence-weighted graph Laplacian (the *ranking step*), and
* confidence scores -- estimated from each sample's accumulated pairwise
  ranking loss (the *suggestion step*); the least confident unlabeled
  samples are suggested for human feedback.

Both steps exist in two flavours: an exact box-constrained QP solved by
projected gradient descent, and the fast closed-form approximation (one
linear solve / one row-sum pass per round).  All functions are pure w.r.t.
module state; the session state travels explicitly.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"
UNSURE = "unsure"

#: feedback label -> binary feedback score
LABEL_SCORES = {RELEVANT: 1, IRRELEVANT: 0}

SOLVER_APPROXIMATE = "approximate"
SOLVER_QP = "qp"


class OracleError(RuntimeError):
    """Oracle failed mid-session; ``partial`` holds the rounds finished so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SessionParams:
    """Session hyperparameters.

    ``alpha`` balances graph smoothness against fitting the reference
    scores; ``beta`` (QP suggestion path only) is the loss threshold that
    splits confident from unconfident samples, ``None`` means "pick it per
    round, just above the largest mean row loss, so no unlabeled confidence
    clamps to zero"; ``gamma`` weights the confidence regularizer.  ``k`` is
    the top-K truncation count, ``q`` the number of suggestions per round
    and ``rounds`` the number of labeled feedback batches (the session
    performs ``rounds + 1`` ranking passes, one before any feedback and one
    after each batch).
    """

    alpha: float = 0.01
    beta: float | None = None
    gamma: float = 1.0
    k: int = 300
    q: int = 5
    rounds: int = 4
    solver: str = SOLVER_APPROXIMATE
    mr_baseline: bool = False
    soft_init: bool = False
    qp_tol: float = 1e-8
    qp_max_iter: int = 10_000
    alternation_cycles: int = 20
    alternation_tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta is not None and self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.q < 1:
            raise ValueError(f"q must be at least 1, got {self.q}")
        if self.rounds < 0:
            raise ValueError(f"rounds must be non-negative, got {self.rounds}")
        if self.solver not in (SOLVER_APPROXIMATE, SOLVER_QP):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.qp_tol <= 0.0 or self.qp_max_iter < 1:
            raise ValueError("qp_tol must be positive and qp_max_iter at least 1")
        if self.alternation_cycles < 1:
            raise ValueError("alternation_cycles must be at least 1")


@dataclass
class RankingState:
    """Mutable per-session vectors and bookkeeping.

    ``scores``, ``confidence`` and ``reference`` all have length ``m`` and
    stay elementwise in [0, 1].  ``labeled`` maps sample index to its binary
    feedback score; the probe (index ``m - 1``) is always labeled relevant.
    ``skipped`` holds indices the user declined to judge: they are never
    suggested again but contribute no reference/confidence pin.
    """

    scores: np.ndarray
    confidence: np.ndarray
    reference: np.ndarray
    labeled: dict[int, int]
    skipped: set[int]
    probe: int
    round_index: int = 0
    initial_scores: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.scores.shape[0]

    def labeled_indices(self) -> np.ndarray:
        return np.asarray(sorted(self.labeled), dtype=np.intp)

    def copy(self) -> "RankingState":
        return RankingState(
            scores=self.scores.copy(),
            confidence=self.confidence.copy(),
            reference=self.reference.copy(),
            labeled=dict(self.labeled),
            skipped=set(self.skipped),
            probe=self.probe,
            round_index=self.round_index,
            initial_scores=None if self.initial_scores is None else self.initial_scores.copy(),
        )


@dataclass
class RoundResult:
    """Outcome of one feedback round."""

    refined_scores: np.ndarray
    suggestions: list[int]
    round_index: int
    elapsed: float


@dataclass
class SessionRun:
    """Full session transcript: final gallery scores plus per-round results."""

    final_scores: np.ndarray
    rounds: list[RoundResult]
    labels_per_round: list[dict[int, str]]


def init_state(
    m: int,
    probe_index: int,
    params: SessionParams,
    initial_scores: Sequence[float] | np.ndarray | None = None,
) -> RankingState:
    """Create the session state with only the probe labeled (score 1).

    In soft-init mode the first round diffuses the provided initial ranking
    scores with uniform confidence instead of the binary probe indicator,
    which helps when the features alone are too weak to bootstrap.
    """
    if m < 2:
        raise ValueError(f"need at least one gallery sample and the probe, got m={m}")
    if probe_index != m - 1:
        raise ValueError(f"probe must be the last index {m - 1}, got {probe_index}")

    init = None
    if initial_scores is not None:
        init = np.asarray(initial_scores, dtype=np.float64).copy()
        if init.shape != (m,):
            raise ValueError(f"initial_scores must have shape ({m},), got {init.shape}")
        if init.min() < 0.0 or init.max() > 1.0:
            raise ValueError("initial_scores must lie in [0, 1]")
    if params.soft_init and init is None:
        raise ValueError("soft_init requires initial_scores")

    reference = np.zeros(m)
    confidence = np.zeros(m)
    reference[probe_index] = 1.0
    confidence[probe_index] = 1.0
    if params.soft_init:
        reference = init.copy()
        reference[probe_index] = 1.0
        confidence = np.ones(m)
    return RankingState(
        scores=reference.copy(),
        confidence=confidence,
        reference=reference,
        labeled={probe_index: 1},
        skipped=set(),
        probe=probe_index,
        initial_scores=init,
    )


def _check_square(matrix: np.ndarray, m: int, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (m, m):
        raise ValueError(f"{name} must have shape ({m}, {m}), got {matrix.shape}")
    return matrix


def pairwise_loss(state: RankingState, affinity: np.ndarray, alpha: float) -> np.ndarray:
    """Pairwise ranking loss: smoothness on each edge plus both fitting terms.

    ``loss[i, j] = a_ij (f_i - f_j)^2 + alpha (f_i - y_i)^2 + alpha (f_j - y_j)^2``.
    Symmetric, nonnegative; the diagonal carries twice the fitting term.
    """
    affinity = _check_square(affinity, state.m, "affinity")
    f = state.scores
    fit = alpha * (f - state.reference) ** 2
    diff = f[:, None] - f[None, :]
    return affinity * diff**2 + fit[:, None] + fit[None, :]


def confidence_weighted_system(
    affinity: np.ndarray, confidence: np.ndarray, alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the ranking-step system matrix and fitting weights.

    Edges are reweighted by the summed endpoint confidence, giving the
    weighted adjacency, its degree matrix and the Laplacian; the fitting
    weights ``fit[i] = alpha * (m * conf[i] + sum(conf))`` land on the
    diagonal.  Returns ``(H, fit)`` with ``H = laplacian + diag(fit)``,
    positive definite whenever any confidence is positive.
    """
    m = confidence.shape[0]
    pair_conf = confidence[:, None] + confidence[None, :]
    weighted = pair_conf * affinity
    degree = weighted.sum(axis=1)
    fit = alpha * (m * confidence + confidence.sum())
    system = -weighted
    idx = np.diag_indices(m)
    system[idx] = degree + fit
    return system, fit


def solve_score_system(affinity: np.ndarray, state: RankingState, alpha: float) -> np.ndarray:
    """Solve the unconstrained ranking system ``H f = fit * reference``.

    Uses a Cholesky factorization (the system is symmetric positive
    definite) plus one step of iterative refinement so the residual stays at
    solver precision even for badly scaled confidence patterns.
    """
    if state.confidence.max() <= 0.0:
        raise ValueError("at least one sample (the probe) must carry positive confidence")
    affinity = _check_square(affinity, state.m, "affinity")
    system, fit = confidence_weighted_system(affinity, state.confidence, alpha)
    rhs = fit * state.reference
    factor = scipy.linalg.cho_factor(system, lower=True)
    solution = scipy.linalg.cho_solve(factor, rhs)
    residual = rhs - system @ solution
    if np.max(np.abs(residual)) > 1e-12:
        solution = solution + scipy.linalg.cho_solve(factor, residual)
    if not np.all(np.isfinite(solution)):
        raise ArithmeticError("ranking solve produced non-finite scores")
    return solution


def ranking_step_approx(affinity: np.ndarray, state: RankingState, alpha: float) -> np.ndarray:
    """Closed-form ranking step: one linear solve, then min-max rescaling.

    Labeled samples keep their reference score; unlabeled ones are rescaled
    by the minimum and maximum of the full solution vector.  When the solve
    is flat (max == min) unlabeled scores collapse to 0.
    """
    raw = solve_score_system(affinity, state, alpha)
    lo = raw.min()
    hi = raw.max()
    if hi > lo:
        scores = (raw - lo) / (hi - lo)
    else:
        scores = np.zeros_like(raw)
    labeled = state.labeled_indices()
    scores[labeled] = state.reference[labeled]
    return scores


def _project_box(x: np.ndarray, pins: np.ndarray, pin_values: np.ndarray) -> np.ndarray:
    out = np.clip(x, 0.0, 1.0)
    out[pins] = pin_values
    return out


def _power_lambda_max(matrix: np.ndarray, iterations: int = 20) -> float:
    m = matrix.shape[0]
    vec = 1.0 + 1e-3 * np.arange(m)
    vec /= np.linalg.norm(vec)
    for _ in range(iterations):
        nxt = matrix @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        vec = nxt / norm
    return float(vec @ (matrix @ vec))


def ranking_step_qp(
    affinity: np.ndarray,
    state: RankingState,
    alpha: float,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    return_info: bool = False,
) -> np.ndarray | tuple[np.ndarray, dict]:
    """Exact ranking step: box-constrained QP by projected gradient descent.

    Minimizes ``f' H f - 2 f' (fit * reference)`` over ``[0, 1]^m`` with
    labeled coordinates pinned to their reference score.  Spectral
    (Barzilai-Borwein) step lengths keep the iteration count low; every
    iterate is projected onto the box and re-pinned.  Stops once the
    projected-gradient infinity norm drops to ``tol``; at ``max_iter`` the
    best iterate found is returned and a warning is logged.
    """
    if state.confidence.max() <= 0.0:
        raise ValueError("at least one sample (the probe) must carry positive confidence")
    affinity = _check_square(affinity, state.m, "affinity")
    system, fit = confidence_weighted_system(affinity, state.confidence, alpha)
    rhs = fit * state.reference

    pins = state.labeled_indices()
    pin_values = state.reference[pins]
    x = _project_box(state.scores.astype(np.float64, copy=True), pins, pin_values)

    lam_max = _power_lambda_max(system)
    base_step = 1.0 / (2.0 * lam_max * 1.01) if lam_max > 0 else 1.0

    best_obj = np.inf
    best_x = x.copy()
    x_prev: np.ndarray | None = None
    grad_prev: np.ndarray | None = None
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        hx = system @ x
        grad = 2.0 * (hx - rhs)
        objective = float(x @ hx - 2.0 * (x @ rhs))
        if objective < best_obj:
            best_obj = objective
            best_x = x.copy()

        projected_grad = x - _project_box(x - grad, pins, pin_values)
        if np.max(np.abs(projected_grad)) <= tol:
            converged = True
            break

        if x_prev is None:
            step = base_step
        else:
            s = x - x_prev
            g_diff = grad - grad_prev
            denom = float(s @ g_diff)
            step = float(s @ s) / denom if denom > 1e-30 else base_step
            if not np.isfinite(step) or step <= 0.0:
                step = base_step
        x_prev = x
        grad_prev = grad
        x = _project_box(x - step * grad, pins, pin_values)

    if converged:
        result = x
    else:
        logger.warning(
            "ranking QP did not reach tol=%.1e in %d iterations; returning best iterate",
            tol,
            max_iter,
        )
        result = best_x
    if return_info:
        return result, {"converged": converged, "iterations": iterations, "objective": best_obj}
    return result


def suggestion_step_approx(loss: np.ndarray) -> np.ndarray:
    """Closed-form confidence estimate: negated loss row sums.

    Only the ordering matters for candidate selection, so no rescaling or
    clamping is applied; large accumulated loss means low confidence.
    """
    loss = np.asarray(loss, dtype=np.float64)
    if loss.ndim != 2 or loss.shape[0] != loss.shape[1]:
        raise ValueError(f"loss must be square, got shape {loss.shape}")
    return -loss.sum(axis=1)


def suggestion_step_qp(
    loss: np.ndarray,
    beta: float,
    gamma: float,
    labeled: Iterable[int],
    tol: float | None = None,
    max_iter: int | None = None,
) -> np.ndarray:
    """Exact confidence estimate: the separable box QP in closed form.

    Minimizes ``gamma/m * ||v||^2 + 2/m^2 * sum_i v_i * sum_j (l_ij - beta)``
    over ``[0, 1]^m`` with labeled coordinates pinned to 1.  The problem is
    separable, so each coordinate is solved exactly; ``tol``/``max_iter``
    are accepted for interface symmetry with the ranking QP and ignored.
    """
    del tol, max_iter
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    loss = np.asarray(loss, dtype=np.float64)
    if loss.ndim != 2 or loss.shape[0] != loss.shape[1]:
        raise ValueError(f"loss must be square, got shape {loss.shape}")
    m = loss.shape[0]
    shifted_row_sums = loss.sum(axis=1) - m * beta
    confidence = np.clip(-shifted_row_sums / (gamma * m), 0.0, 1.0)
    labeled_idx = np.asarray(sorted(set(labeled)), dtype=np.intp)
    if labeled_idx.size:
        confidence[labeled_idx] = 1.0
    return confidence


def select_candidates(
    selection_scores: np.ndarray,
    state: RankingState,
    q: int,
    initial_positions: np.ndarray,
) -> list[int]:
    """Pick up to ``q`` feedback candidates with the lowest confidence.

    Eligible samples are the unlabeled, non-skipped, non-probe indices.
    Ties break by the sample's position in the initial ranking, then by
    index, so transcripts are deterministic.
    """
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    selection_scores = np.asarray(selection_scores, dtype=np.float64)
    m = state.m
    if selection_scores.shape != (m,):
        raise ValueError(f"selection scores must have shape ({m},)")
    initial_positions = np.asarray(initial_positions)
    if initial_positions.shape != (m,):
        raise ValueError(f"initial positions must have shape ({m},)")

    eligible = np.ones(m, dtype=bool)
    eligible[state.labeled_indices()] = False
    if state.skipped:
        eligible[np.asarray(sorted(state.skipped), dtype=np.intp)] = False
    eligible[state.probe] = False
    pool = np.flatnonzero(eligible)
    if pool.size == 0:
        return []
    order = np.lexsort((pool, initial_positions[pool], selection_scores[pool]))
    return pool[order][:q].tolist()


def apply_feedback(state: RankingState, labels: Mapping[int, str]) -> RankingState:
    """Fold a batch of user judgments into the state (mutates and returns it).

    ``relevant``/``irrelevant`` enter the labeled set with feedback score
    1/0; ``unsure`` marks the sample skipped, never to be suggested again.
    Afterwards the reference and confidence vectors are re-pinned: labeled
    samples get their feedback score with confidence 1, everything else 0.
    """
    for index, label in labels.items():
        if not 0 <= index < state.m:
            raise IndexError(f"label index {index} out of range for m={state.m}")
        if index == state.probe:
            raise ValueError("the probe cannot be relabeled")
        if index in state.labeled:
            raise ValueError(f"sample {index} is already labeled")
        if label not in (RELEVANT, IRRELEVANT, UNSURE):
            raise ValueError(f"unknown label {label!r} for sample {index}")

    for index, label in labels.items():
        if label == UNSURE:
            state.skipped.add(index)
        else:
            state.skipped.discard(index)
            state.labeled[index] = LABEL_SCORES[label]

    reference = np.zeros(state.m)
    confidence = np.zeros(state.m)
    for index, score in state.labeled.items():
        reference[index] = float(score)
        confidence[index] = 1.0
    state.reference = reference
    state.confidence = confidence
    labeled_idx = state.labeled_indices()
    state.scores[labeled_idx] = reference[labeled_idx]
    return state


def _reset_round_vectors(state: RankingState, params: SessionParams) -> None:
    """Re-pin reference/confidence for a new round (soft-init / MR variants)."""
    reference = np.zeros(state.m)
    for index, score in state.labeled.items():
        reference[index] = float(score)
    if params.soft_init and state.round_index == 0:
        if state.initial_scores is None:
            raise ValueError("soft_init requires initial_scores")
        reference = state.initial_scores.copy()
        reference[state.probe] = 1.0
        confidence = np.ones(state.m)
    elif params.mr_baseline:
        confidence = np.ones(state.m)
    else:
        confidence = np.zeros(state.m)
        confidence[state.labeled_indices()] = 1.0
    state.reference = reference
    state.confidence = confidence
    labeled_idx = state.labeled_indices()
    state.scores[labeled_idx] = reference[labeled_idx]


def coupled_objective(loss: np.ndarray, confidence: np.ndarray, beta: float, gamma: float) -> float:
    """Joint objective used to monitor the QP alternation for convergence."""
    m = confidence.shape[0]
    pair_conf = confidence[:, None] + confidence[None, :]
    coupling = float((pair_conf * (loss - beta)).sum()) / (m * m)
    return coupling + gamma / m * float(confidence @ confidence)


def run_round(
    affinity: np.ndarray,
    state: RankingState,
    params: SessionParams,
    initial_positions: np.ndarray,
) -> RoundResult:
    """Execute one feedback round: re-pin, rank, score confidence, suggest.

    The approximate solver performs exactly one ranking and one suggestion
    pass.  The QP solver alternates the two exact steps until the joint
    objective stops improving (or the cycle cap is hit); the loss threshold
    ``beta`` is frozen from the first cycle's loss matrix when not given.
    Mutates ``state`` (scores, confidence, round counter) and returns the
    refined scores plus the suggested candidate indices.
    """
    start = time.perf_counter()
    this_round = state.round_index
    _reset_round_vectors(state, params)

    if params.solver == SOLVER_APPROXIMATE:
        state.scores = ranking_step_approx(affinity, state, params.alpha)
        loss = pairwise_loss(state, affinity, params.alpha)
        selection_scores = suggestion_step_approx(loss)
    else:
        labeled_idx = state.labeled_indices()
        beta_round = params.beta
        previous_objective = None
        selection_scores = state.confidence
        for _ in range(params.alternation_cycles):
            if params.mr_baseline:
                state.confidence = np.ones(state.m)
            state.scores = ranking_step_qp(
                affinity, state, params.alpha, tol=params.qp_tol, max_iter=params.qp_max_iter
            )
            loss = pairwise_loss(state, affinity, params.alpha)
            if beta_round is None:
                # just above the largest mean row loss: keeps every unlabeled
                # confidence strictly positive, so the selection ordering
                # matches the fast path instead of collapsing into a tie at 0
                beta_round = float(loss.sum(axis=1).max()) / state.m + 1e-12
            confidence = suggestion_step_qp(loss, beta_round, params.gamma, labeled_idx)
            state.confidence = confidence
            selection_scores = confidence
            objective = coupled_objective(loss, confidence, beta_round, params.gamma)
            if previous_objective is not None and previous_objective - objective < params.alternation_tol:
                break
            previous_objective = objective

    suggestions = select_candidates(selection_scores, state, params.q, initial_positions)
    state.round_index += 1
    elapsed = time.perf_counter() - start
    return RoundResult(
        refined_scores=state.scores.copy(),
        suggestions=suggestions,
        round_index=this_round,
        elapsed=elapsed,
    )


def run_session(
    affinity: np.ndarray,
    oracle: Callable[[list[int]], Mapping[int, str]],
    params: SessionParams,
    initial_positions: np.ndarray,
    initial_scores: np.ndarray | None = None,
) -> SessionRun:
    """Run a full feedback session against a label source.

    Performs ``rounds + 1`` ranking passes.  After each of the first
    ``rounds`` passes the oracle is asked to judge that round's suggestions,
    so exactly ``q * rounds`` labels are consumed; the final pass only
    refines the scores.  Returns the gallery scores (probe dropped) along
    with every round's result and the labels that were applied.
    """
    m = affinity.shape[0]
    state = init_state(m, m - 1, params, initial_scores)
    rounds: list[RoundResult] = []
    labels_log: list[dict[int, str]] = []
    for t in range(params.rounds + 1):
        result = run_round(affinity, state, params, initial_positions)
        rounds.append(result)
        if t == params.rounds:
            break
        try:
            answers = dict(oracle(result.suggestions))
        except Exception as exc:
            partial = SessionRun(state.scores[: m - 1].copy(), rounds, labels_log)
            raise OracleError(f"oracle failed in round {t}: {exc}", partial=partial) from exc
        missing = [i for i in result.suggestions if i not in answers]
        if missing:
            partial = SessionRun(state.scores[: m - 1].copy(), rounds, labels_log)
            raise OracleError(f"oracle left suggestions unanswered: {missing}", partial=partial)
        batch = {i: answers[i] for i in result.suggestions}
        apply_feedback(state, batch)
        labels_log.append(batch)
    final_scores = rounds[-1].refined_scores[: m - 1].copy()
    return SessionRun(final_scores=final_scores, rounds=rounds, labels_per_round=labels_log)


def merge_topk(
    initial_ranking: Sequence[int] | np.ndarray,
    refined_scores: Sequence[float] | np.ndarray,
    k: int,
) -> np.ndarray:
    """Merge refined top-``k`` scores back into the full initial ranking.

    The first ``k`` entries of the initial list are re-sorted by refined
    score (descending, ties keep initial order); the remainder is appended
    untouched.  ``k`` larger than the list is clamped with a warning.
    """
    initial = np.asarray(initial_ranking)
    n = initial.shape[0]
    if k > n:
        logger.warning("k=%d exceeds gallery size %d; clamping", k, n)
        k = n
    refined = np.asarray(refined_scores, dtype=np.float64)
    if refined.shape != (k,):
        raise ValueError(f"refined scores must have shape ({k},), got {refined.shape}")
    order = np.argsort(-refined, kind="stable")
    return np.concatenate([initial[:k][order], initial[k:]])
