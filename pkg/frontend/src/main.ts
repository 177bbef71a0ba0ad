/** DOM wiring: renders the store's state, forwards user input to it. */
import { ApiClient } from "./api.js";
import { renderGraphSvg } from "./graph.js";
import { CONDITIONAL_CAPTION, WhatIfStore, type AppState } from "./store.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8035";

const api = new ApiClient(SERVICE_URL);
const store = new WhatIfStore(api);

const el = (id: string): HTMLElement => {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found;
};

function renderBanner(state: AppState): void {
  const banner = el("banner");
  if (state.connection === "down") {
    banner.textContent = `Service unreachable at ${SERVICE_URL}. Start it with: riskbn serve --model ... --target ...`;
    banner.hidden = false;
  } else {
    banner.hidden = true;
  }
  el("content").hidden = state.connection !== "ok";
}

function renderEvidenceForm(state: AppState): void {
  const form = el("evidence-form");
  if (form.childElementCount > 0 || !state.model) return; // build once
  for (const variable of store.evidenceVariables()) {
    const row = document.createElement("label");
    row.className = "field";
    const caption = document.createElement("span");
    caption.textContent = variable.name;
    const select = document.createElement("select");
    select.dataset.variable = variable.name;
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "unobserved";
    select.appendChild(blank);
    for (const stateLabel of variable.states) {
      const option = document.createElement("option");
      option.value = stateLabel;
      option.textContent = stateLabel;
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      store.setEvidence(variable.name, select.value === "" ? null : select.value);
    });
    row.append(caption, select);
    form.appendChild(row);
  }
}

function distributionTable(distribution: Record<string, { text: string; title: string; raw: number }>): HTMLElement {
  const table = document.createElement("div");
  table.className = "dist";
  for (const [stateLabel, value] of Object.entries(distribution)) {
    const row = document.createElement("div");
    row.className = "dist-row";
    const name = document.createElement("span");
    name.textContent = stateLabel;
    const bar = document.createElement("span");
    bar.className = "bar";
    bar.style.width = `${Math.round(Math.max(0, Math.min(1, value.raw)) * 160)}px`;
    const number = document.createElement("span");
    number.className = "value";
    number.textContent = value.text;
    number.title = value.title;
    row.append(name, bar, number);
    table.appendChild(row);
  }
  return table;
}

function renderPosterior(state: AppState): void {
  const panel = el("posterior");
  panel.replaceChildren();
  const heading = document.createElement("h3");
  heading.textContent = state.target ? `P(${state.target} | evidence)` : "posterior";
  panel.appendChild(heading);
  if (state.evidenceError) {
    const error = document.createElement("p");
    error.className = "inline-error";
    error.textContent = state.evidenceError;
    panel.appendChild(error);
    return;
  }
  if (state.posterior) panel.appendChild(distributionTable(state.posterior));
}

function renderGraph(state: AppState): void {
  if (!state.model) return;
  el("graph").innerHTML = renderGraphSvg(state.model, state.threshold);
  el("threshold-value").textContent = state.threshold.toFixed(2);
}

function describeAssignment(assignment: Record<string, string>): string {
  return Object.entries(assignment)
    .map(([name, value]) => `${name}=${value}`)
    .join(", ");
}

function renderScenarios(state: AppState): void {
  const list = el("alternatives");
  list.replaceChildren();
  state.alternatives.forEach((assignment, index) => {
    const item = document.createElement("li");
    item.textContent = describeAssignment(assignment);
    const remove = document.createElement("button");
    remove.textContent = "remove";
    remove.addEventListener("click", () => store.removeAlternative(index));
    item.appendChild(remove);
    list.appendChild(item);
  });

  const results = el("scenario-results");
  results.replaceChildren();
  if (state.whatIfError) {
    const error = document.createElement("p");
    error.className = "inline-error";
    error.textContent = state.whatIfError;
    results.appendChild(error);
    return;
  }
  if (!state.whatIf) return;

  const base = document.createElement("div");
  base.className = "scenario";
  const baseTitle = document.createElement("h4");
  baseTitle.textContent = "base evidence";
  base.append(baseTitle, distributionTable(state.whatIf.base));
  results.appendChild(base);

  for (const scenario of state.whatIf.scenarios) {
    const card = document.createElement("div");
    card.className = "scenario";
    const title = document.createElement("h4");
    title.textContent = describeAssignment(scenario.assignment);
    card.append(title, distributionTable(scenario.posterior));
    const deltaTitle = document.createElement("p");
    deltaTitle.textContent = "delta vs. base:";
    card.appendChild(deltaTitle);
    card.appendChild(distributionTable(scenario.delta));
    results.appendChild(card);
  }
}

function buildScenarioControls(state: AppState): void {
  const variablePick = el("scenario-variable") as HTMLSelectElement;
  if (variablePick.childElementCount > 0 || !state.model) return;
  for (const variable of store.evidenceVariables()) {
    const option = document.createElement("option");
    option.value = variable.name;
    option.textContent = variable.name;
    variablePick.appendChild(option);
  }
  const statePick = el("scenario-state") as HTMLSelectElement;
  const fillStates = () => {
    statePick.replaceChildren();
    const variable = state.model?.nodes.find((n) => n.name === variablePick.value);
    for (const label of variable?.states ?? []) {
      const option = document.createElement("option");
      option.value = label;
      option.textContent = label;
      statePick.appendChild(option);
    }
  };
  variablePick.addEventListener("change", fillStates);
  fillStates();
  el("add-alternative").addEventListener("click", () => {
    if (variablePick.value && statePick.value) {
      store.addAlternative({ [variablePick.value]: statePick.value });
    }
  });
  el("run-scenarios").addEventListener("click", () => void store.runScenarios());
}

function render(state: AppState): void {
  renderBanner(state);
  if (state.connection !== "ok") return;
  renderEvidenceForm(state);
  buildScenarioControls(state);
  renderPosterior(state);
  renderGraph(state);
  renderScenarios(state);
}

el("caption").textContent = CONDITIONAL_CAPTION;
(el("threshold") as HTMLInputElement).addEventListener("input", (event) => {
  store.setThreshold(Number((event.target as HTMLInputElement).value));
});

store.subscribe(render);
void store.initialize();
