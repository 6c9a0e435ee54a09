/**
 * View-state machine for one labeling session.
 *
 * Holds the pending judgments for the current round's suggestion cards,
 * builds the submit payload (unset cards submit as "unsure"), and
 * reconciles with the server on stale-token conflicts by refetching the
 * session. A submit is in flight at most once; repeating it with the same
 * token is safe because the service caches the response per token.
 */

import {
  ApiError,
  Judgment,
  RoundPayload,
  SessionClient,
  SessionParamsOverride,
  SubmitResponse,
} from "./api.js";

export type CardState = Judgment | "unset";

export interface CardView {
  id: string;
  initialRank: number;
  thumbnail: string;
  state: CardState;
}

export interface UiSessionView {
  sessionId: string;
  dataset: string;
  probe: string;
  status: "awaiting_labels" | "finished";
  roundIndex: number;
  roundsBudget: number;
  submitsDone: number;
  batchSize: number;
  token: string | null;
  cards: CardView[];
  rankingPreview: string[];
  apHistory: number[];
  finalRanking: string[] | null;
  submitting: boolean;
}

function cardsFromRound(round: RoundPayload): CardView[] {
  return round.suggestions.map((card) => ({
    id: card.id,
    initialRank: card.initial_rank,
    thumbnail: card.thumbnail,
    state: "unset" as CardState,
  }));
}

export async function startSession(
  client: SessionClient,
  dataset: string,
  probe: string,
  params?: SessionParamsOverride,
): Promise<UiSessionView> {
  const created = await client.createSession(dataset, probe, params);
  const round = created.round;
  return {
    sessionId: created.session_id,
    dataset,
    probe,
    status: "awaiting_labels",
    roundIndex: round.round_index,
    roundsBudget: created.rounds_budget,
    submitsDone: 0,
    batchSize: round.suggestions.length,
    token: round.token,
    cards: cardsFromRound(round),
    rankingPreview: round.preview,
    apHistory: round.ap === undefined ? [] : [round.ap],
    finalRanking: null,
    submitting: false,
  };
}

/** Toggle a judgment on a card; clicking the active judgment clears it. */
export function setLabel(view: UiSessionView, cardId: string, state: CardState): UiSessionView {
  const cards = view.cards.map((card) =>
    card.id === cardId ? { ...card, state: card.state === state ? "unset" : state } : card,
  );
  return { ...view, cards };
}

/** Judgments to send: explicit choices plus "unsure" for untouched cards. */
export function submitPayload(view: UiSessionView): Record<string, Judgment> {
  const labels: Record<string, Judgment> = {};
  for (const card of view.cards) {
    labels[card.id] = card.state === "unset" ? "unsure" : card.state;
  }
  return labels;
}

export function canSubmit(view: UiSessionView): boolean {
  return view.status === "awaiting_labels" && view.token !== null && !view.submitting;
}

function applySubmitResponse(view: UiSessionView, response: SubmitResponse): UiSessionView {
  if (response.status === "finished") {
    return {
      ...view,
      status: "finished",
      token: null,
      cards: [],
      submitsDone: view.submitsDone + 1,
      finalRanking: response.final_ranking ?? null,
      rankingPreview: (response.final_ranking ?? view.rankingPreview).slice(0, 20),
      apHistory: response.metrics ? response.metrics.ap_per_round : view.apHistory,
      submitting: false,
    };
  }
  const round = response.round;
  if (!round) {
    throw new Error("awaiting session without a round payload");
  }
  return {
    ...view,
    roundIndex: round.round_index,
    submitsDone: view.submitsDone + 1,
    token: round.token,
    cards: cardsFromRound(round),
    rankingPreview: round.preview,
    apHistory: round.ap === undefined ? view.apHistory : [...view.apHistory, round.ap],
    submitting: false,
  };
}

/** Rebuild the view from a server snapshot after a conflict. */
export async function refreshSession(
  client: SessionClient,
  view: UiSessionView,
): Promise<UiSessionView> {
  const snapshot = await client.getSession(view.sessionId);
  const awaiting = snapshot.status === "awaiting_labels";
  let round: Partial<RoundPayload> | null = null;
  for (let i = snapshot.history.length - 1; i >= 0; i -= 1) {
    const entry = snapshot.history[i];
    if (entry && entry.round && entry.round.token) {
      round = entry.round;
      break;
    }
  }
  return {
    ...view,
    status: awaiting ? "awaiting_labels" : "finished",
    roundIndex: round?.round_index ?? view.roundIndex,
    submitsDone: snapshot.submits_done,
    token: awaiting && round?.token ? round.token : null,
    cards: awaiting && round?.suggestions ? cardsFromRound(round as RoundPayload) : [],
    rankingPreview: snapshot.current_ranking_preview,
    apHistory: snapshot.metrics?.ap_per_round ?? view.apHistory,
    finalRanking: snapshot.final_ranking ?? null,
    submitting: false,
  };
}

/**
 * Submit the current round. On a stale-token conflict the session is
 * refetched and the reconciled view returned, so a double click or a
 * concurrent tab never double-applies labels.
 */
export async function labelAndSubmit(
  client: SessionClient,
  view: UiSessionView,
): Promise<UiSessionView> {
  if (!canSubmit(view) || view.token === null) {
    return view;
  }
  const pending = { ...view, submitting: true };
  try {
    const response = await client.submitLabels(view.sessionId, view.token, submitPayload(view));
    return applySubmitResponse(pending, response);
  } catch (error) {
    if (error instanceof ApiError && error.isStaleToken) {
      return refreshSession(client, pending);
    }
    throw error;
  }
}
