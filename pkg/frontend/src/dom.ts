/**
 * DOM rendering for the labeling UI.
 *
 * Keyboard shortcuts: 1 = relevant, 2 = irrelevant, 3 = unsure for the
 * focused card, arrow keys move focus, Enter submits the round.  All state
 * transitions go through session.ts; this module only draws.
 */

import type { CardState, CardView, UiSessionView } from "./session.js";
import { progressOf } from "./progress.js";

export interface RenderCallbacks {
  onLabel: (cardId: string, state: CardState) => void;
  onSubmit: () => void;
}

const JUDGMENT_KEYS: Record<string, CardState> = {
  "1": "relevant",
  "2": "irrelevant",
  "3": "unsure",
};

export function renderError(root: HTMLElement, message: string, onRetry: () => void): void {
  root.replaceChildren();
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.textContent = message;
  const retry = document.createElement("button");
  retry.textContent = "retry";
  retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
  root.appendChild(banner);
}

function renderCard(card: CardView, callbacks: RenderCallbacks): HTMLElement {
  const element = document.createElement("div");
  element.className = `card ${card.state}`;
  element.tabIndex = 0;
  element.dataset.id = card.id;

  const image = document.createElement("img");
  image.src = card.thumbnail;
  image.alt = card.id;
  element.appendChild(image);

  const caption = document.createElement("div");
  caption.className = "caption";
  caption.textContent = `${card.id} (#${card.initialRank + 1})`;
  element.appendChild(caption);

  const buttons = document.createElement("div");
  buttons.className = "judgments";
  for (const state of ["relevant", "irrelevant", "unsure"] as CardState[]) {
    const button = document.createElement("button");
    button.textContent = state;
    button.className = card.state === state ? "active" : "";
    button.addEventListener("click", () => callbacks.onLabel(card.id, state));
    buttons.appendChild(button);
  }
  element.appendChild(buttons);
  return element;
}

export function renderSession(
  root: HTMLElement,
  view: UiSessionView,
  callbacks: RenderCallbacks,
): void {
  root.replaceChildren();

  const progress = progressOf(view);
  const header = document.createElement("div");
  header.className = "progress";
  const bar = document.createElement("div");
  bar.className = "progress-bar";
  bar.style.width = `${progress.percent}%`;
  header.appendChild(bar);
  const label = document.createElement("span");
  label.textContent = `${progress.roundLabel} - ${progress.labelsConsumed} labels sent`;
  header.appendChild(label);
  if (progress.apSparkline.length > 0) {
    const spark = document.createElement("span");
    spark.className = "sparkline";
    spark.textContent = progress.apSparkline.map((v) => v.toFixed(3)).join(" → ");
    header.appendChild(spark);
  }
  root.appendChild(header);

  if (view.status === "finished") {
    const summary = document.createElement("div");
    summary.className = "summary";
    summary.textContent = `session finished - final ranking of ${view.finalRanking?.length ?? 0} items`;
    root.appendChild(summary);
    root.appendChild(renderGrid(view.finalRanking ?? [], "final ranking"));
    return;
  }

  const cardsHost = document.createElement("div");
  cardsHost.className = "cards";
  for (const card of view.cards) {
    cardsHost.appendChild(renderCard(card, callbacks));
  }
  root.appendChild(cardsHost);

  const submit = document.createElement("button");
  submit.className = "submit";
  submit.textContent = view.submitting ? "submitting…" : "submit round";
  submit.disabled = view.submitting;
  submit.addEventListener("click", callbacks.onSubmit);
  root.appendChild(submit);

  root.appendChild(renderGrid(view.rankingPreview, "current top of list"));
}

function renderGrid(ids: string[], title: string): HTMLElement {
  const wrapper = document.createElement("div");
  wrapper.className = "grid";
  const heading = document.createElement("h3");
  heading.textContent = title;
  wrapper.appendChild(heading);
  const list = document.createElement("ol");
  for (const id of ids.slice(0, 40)) {
    const item = document.createElement("li");
    const image = document.createElement("img");
    image.src = `/thumbnails/${id}`;
    image.alt = id;
    image.title = id;
    item.appendChild(image);
    list.appendChild(item);
  }
  wrapper.appendChild(list);
  return wrapper;
}

export function bindKeyboard(root: HTMLElement, callbacks: RenderCallbacks): void {
  root.addEventListener("keydown", (event) => {
    const state = JUDGMENT_KEYS[event.key];
    if (state) {
      const focused = document.activeElement as HTMLElement | null;
      const cardId = focused?.closest<HTMLElement>(".card")?.dataset.id;
      if (cardId) {
        callbacks.onLabel(cardId, state);
        event.preventDefault();
      }
    } else if (event.key === "Enter") {
      callbacks.onSubmit();
      event.preventDefault();
    }
  });
}
