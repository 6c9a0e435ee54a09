/** Bootstrap: dataset/probe pickers plus the live session panel. */

import { SessionClient } from "./api.js";
import { bindKeyboard, renderError, renderSession } from "./dom.js";
import { CardState, labelAndSubmit, setLabel, startSession, UiSessionView } from "./session.js";

const client = new SessionClient(window.location.origin);

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  let view: UiSessionView | null = null;

  const callbacks = {
    onLabel(cardId: string, state: CardState) {
      if (!view) return;
      view = setLabel(view, cardId, state);
      renderSession(root, view, callbacks);
    },
    onSubmit() {
      if (!view) return;
      void labelAndSubmit(client, view)
        .then((next) => {
          view = next;
          renderSession(root, view, callbacks);
        })
        .catch((error) => renderError(root, String(error), boot));
    },
  };

  bindKeyboard(root, callbacks);

  try {
    const datasets = await client.listDatasets();
    if (datasets.length === 0) {
      renderError(root, "the service has no datasets loaded", boot);
      return;
    }
    const picker = document.getElementById("picker");
    if (picker) {
      picker.replaceChildren();
      const datasetSelect = document.createElement("select");
      for (const info of datasets) {
        const option = document.createElement("option");
        option.value = info.name;
        option.textContent = `${info.name} (${info.n_gallery} items)`;
        datasetSelect.appendChild(option);
      }
      const probeSelect = document.createElement("select");
      const fillProbes = () => {
        probeSelect.replaceChildren();
        const info = datasets.find((d) => d.name === datasetSelect.value) ?? datasets[0];
        for (const probe of info?.probes ?? []) {
          const option = document.createElement("option");
          option.value = probe;
          option.textContent = probe;
          probeSelect.appendChild(option);
        }
      };
      datasetSelect.addEventListener("change", fillProbes);
      fillProbes();
      const start = document.createElement("button");
      start.textContent = "start session";
      start.addEventListener("click", () => {
        void startSession(client, datasetSelect.value, probeSelect.value)
          .then((created) => {
            view = created;
            renderSession(root, view, callbacks);
          })
          .catch((error) => renderError(root, String(error), boot));
      });
      picker.append(datasetSelect, probeSelect, start);
    }
  } catch (error) {
    renderError(root, `service unreachable: ${String(error)}`, boot);
  }
}

void boot();
