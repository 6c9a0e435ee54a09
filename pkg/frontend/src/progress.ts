/** Purely presentational progress model derived from the session view. */

import type { UiSessionView } from "./session.js";

export interface ProgressState {
  roundLabel: string;
  percent: number;
  labelsConsumed: number;
  finished: boolean;
  apSparkline: number[];
}

export function progressOf(view: UiSessionView): ProgressState {
  const budget = Math.max(view.roundsBudget, 1);
  const percent = Math.min(100, Math.round((view.submitsDone / budget) * 100));
  return {
    roundLabel:
      view.status === "finished"
        ? `finished after ${view.submitsDone} round${view.submitsDone === 1 ? "" : "s"}`
        : `round ${view.submitsDone + 1} of ${budget}`,
    percent,
    labelsConsumed: view.submitsDone * view.batchSize,
    finished: view.status === "finished",
    apSparkline: view.apHistory,
  };
}
