#!/usr/bin/env python3
"""Compare the exact QP solvers with their closed-form approximations.

Shows, on a small instance you can inspect by eye:
  * the unconstrained ranking solve and its rescaled scores,
  * the box-QP ranking solution with labeled coordinates pinned,
  * both confidence estimates and the candidate ordering they induce,
  * wall-clock for one full round at the production scale K=300.
"""

import time

import numpy as np

import activerank as ar
from activerank import engine

rng = np.random.default_rng(7)

print("-- tiny instance: 5 gallery samples + probe ------------------------")
m = 6
affinity = rng.random((m, m))
affinity = (affinity + affinity.T) / 2
np.fill_diagonal(affinity, 0.0)
params = ar.SessionParams(alpha=0.05, k=m - 1, q=2, rounds=0)
state = ar.init_state(m, m - 1, params)
ar.apply_feedback(state, {0: ar.RELEVANT, 1: ar.IRRELEVANT})

raw = engine.solve_score_system(affinity, state, params.alpha)
approx = ar.ranking_step_approx(affinity, state, params.alpha)
exact = ar.ranking_step_qp(affinity, state, params.alpha, tol=1e-12)
print("unconstrained solve:", np.round(raw, 4))
print("approximate scores: ", np.round(approx, 4), "(labeled overwritten, rest rescaled)")
print("QP scores:          ", np.round(exact, 4), "(labeled pinned inside the solve)")

state.scores = approx
loss = ar.pairwise_loss(state, affinity, params.alpha)
fast_conf = ar.suggestion_step_approx(loss)
beta = float(loss.sum(axis=1).max()) / m + 1e-12
exact_conf = ar.suggestion_step_qp(loss, beta=beta, gamma=1.0, labeled=state.labeled_indices())
positions = np.arange(m)
pick_fast = ar.select_candidates(fast_conf, state, 2, positions)
pick_exact = ar.select_candidates(exact_conf, state, 2, positions)
print("fast confidences:   ", np.round(fast_conf, 3), "-> ask about", pick_fast)
print("QP confidences:     ", np.round(exact_conf, 3), "-> ask about", pick_exact)

print("\n-- production scale: one approximate round at K=300 ----------------")
k = 300
big = rng.random((k + 1, k + 1))
big = (big + big.T) / 2
np.fill_diagonal(big, 0.0)
big_params = ar.SessionParams(alpha=0.01, k=k, q=5, rounds=4)
big_state = ar.init_state(k + 1, k, big_params)
ar.apply_feedback(big_state, {i: ar.RELEVANT if i % 2 else ar.IRRELEVANT for i in range(10)})

for solver in ("approximate", "qp"):
    solver_params = ar.SessionParams(alpha=0.01, k=k, q=5, rounds=4, solver=solver)
    timings = []
    for _ in range(3):
        fresh = big_state.copy()
        started = time.perf_counter()
        ar.run_round(big, fresh, solver_params, np.arange(k + 1))
        timings.append(time.perf_counter() - started)
    print(f"{solver:>12s}: best of 3 = {min(timings) * 1000:7.1f} ms per round")
