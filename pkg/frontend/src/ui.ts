/** Plain-DOM views. Every score and overlap value shown here comes from
 * the service responses held in session state. */

import { ConsoleSession } from "./session.js";
import type { SessionState } from "./session.js";

const TOKEN_RE = /[\p{L}\p{N}]+/gu;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Wrap tokens reported by the overlap endpoint in <mark> nodes. */
export function highlightMatches(text: string, matched: string[]): HTMLElement {
  const container = el("span", "cn-text");
  const matchedSet = new Set(matched.flatMap((m) => m.split(" ")));
  let last = 0;
  for (const hit of text.matchAll(TOKEN_RE)) {
    const start = hit.index ?? 0;
    const token = hit[0];
    if (start > last) container.append(text.slice(last, start));
    if (matchedSet.has(token.toLowerCase())) {
      container.append(el("mark", "kn-hit", token));
    } else {
      container.append(token);
    }
    last = start + token.length;
  }
  if (last < text.length) container.append(text.slice(last));
  return container;
}

function chipView(session: ConsoleSession, text: string, index: number): HTMLElement {
  const chip = el("span", "chip");
  const input = el("input", "chip-input");
  input.value = text;
  input.size = Math.max(text.length, 3);
  input.addEventListener("change", () => {
    void session.editKeyphrase(index, input.value);
  });
  const remove = el("button", "chip-remove", "×");
  remove.type = "button";
  remove.title = "remove keyphrase";
  remove.addEventListener("click", () => void session.removeKeyphrase(index));
  chip.append(input, remove);
  return chip;
}

function chipsPanel(session: ConsoleSession, state: SessionState): HTMLElement {
  const panel = el("section", "panel chips-panel");
  panel.append(el("h2", undefined, "Query keyphrases"));
  const row = el("div", "chip-row");
  state.keyphrases.forEach((text, i) => row.append(chipView(session, text, i)));
  const add = el("input", "chip-add");
  add.placeholder = "add keyphrase";
  add.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void session.addKeyphrase(add.value);
      add.value = "";
    }
  });
  row.append(add);
  panel.append(row);
  return panel;
}

function sentencesPanel(session: ConsoleSession, state: SessionState): HTMLElement {
  const panel = el("section", "panel sentences-panel");
  panel.append(el("h2", undefined, "Knowledge sentences"));
  if (!state.sentences.length) {
    panel.append(el("p", "empty-note", "No sentences retrieved."));
    return panel;
  }
  const list = el("ul", "sentence-list");
  state.sentences.forEach((row, i) => {
    const item = el("li", "sentence");
    const label = el("label");
    const box = el("input");
    box.type = "checkbox";
    box.checked = row.selected;
    box.addEventListener("change", () => session.toggleSentence(i));
    label.append(
      box,
      el("span", "sentence-score", row.score.toFixed(3)),
      el("span", "sentence-text", row.text),
      el("span", "sentence-source", `${row.articleId}#${row.sentIndex}`),
    );
    item.append(label);
    list.append(item);
  });
  panel.append(list);
  return panel;
}

function candidatesPanel(state: SessionState): HTMLElement {
  const panel = el("section", "panel candidates-panel");
  panel.append(el("h2", undefined, "Candidates"));
  for (const candidate of state.candidates) {
    const card = el("article", "candidate");
    const meta = el("div", "candidate-meta");
    meta.append(el("span", "backend", candidate.backendId));
    if (candidate.unterminated) meta.append(el("span", "badge warn", "unterminated"));
    if (candidate.overlap) {
      meta.append(
        el("span", "badge", `kn overlap (n=${candidate.overlap.n}): ${candidate.overlap.overlap.toFixed(2)}`),
      );
    }
    card.append(meta);
    const shown = candidate.cn ?? candidate.text;
    card.append(highlightMatches(shown, candidate.overlap?.matched ?? []));
    panel.append(card);
  }
  return panel;
}

function statusPanel(state: SessionState): HTMLElement {
  const panel = el("div", "status");
  if (state.warning) panel.append(el("div", "warning", state.warning));
  if (state.error) {
    panel.append(
      el("div", "error", `[${state.error.stage}] ${state.error.code}: ${state.error.message}`),
    );
  }
  if (state.busy) panel.append(el("div", "busy", "working…"));
  return panel;
}

export function renderApp(session: ConsoleSession, root: HTMLElement): void {
  const draw = (state: SessionState) => {
    root.replaceChildren();

    const inputPanel = el("section", "panel input-panel");
    inputPanel.append(el("h2", undefined, "Message"));
    const hsInput = el("textarea", "hs-input");
    hsInput.rows = 3;
    hsInput.placeholder = "Paste the message to counter…";
    hsInput.value = state.hs;
    const configSelect = el("select", "config-select");
    for (const config of ["q_hs", "q_gen", "q_hs_gen"]) {
      const option = el("option", undefined, config);
      option.value = config;
      if (config === state.config) option.selected = true;
      configSelect.append(option);
    }
    const submit = el("button", "primary", "Retrieve");
    submit.type = "button";
    submit.addEventListener("click", () => {
      void session.submitMessage(hsInput.value, configSelect.value);
    });
    const generate = el("button", "primary", "Generate");
    generate.type = "button";
    generate.disabled = !state.hs;
    generate.addEventListener("click", () => void session.generate());
    const controls = el("div", "controls");
    controls.append(configSelect, submit, generate);
    inputPanel.append(hsInput, controls);

    root.append(
      inputPanel,
      statusPanel(state),
      chipsPanel(session, state),
      sentencesPanel(session, state),
      candidatesPanel(state),
    );
  };
  session.subscribe(draw);
  draw(session.state);
}
