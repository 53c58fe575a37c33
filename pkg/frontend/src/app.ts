/**
 * Browser entry point: wires the taxonomy browser, curve view, probability
 * slider, and edit history onto the DOM. All state flows from the service;
 * this file only routes payloads between fetches and render helpers.
 */
import { ApiClient } from "./api.js";
import { renderCurveSvg } from "./curveView.js";
import { curveStatCards, editReportCards, type StatCard } from "./format.js";
import { EditSession, type HistoryEntry } from "./session.js";
import { searchTree, taxonomyTree, pairKey, type TreeNode } from "./taxonomyView.js";
import type { CurvePayload, ManifestInfo } from "./types.js";

const api = new ApiClient(
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8321",
);

interface AppState {
  manifests: ManifestInfo[];
  manifestId: string | null;
  pair: string | null;
  curve: CurvePayload | null;
  curveText: string | null;
  probability: number;
  session: EditSession | null;
  seed: number;
}

const state: AppState = {
  manifests: [],
  manifestId: null,
  pair: null,
  curve: null,
  curveText: null,
  probability: 0.6,
  session: null,
  seed: 0,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string, retry?: () => void): void {
  const box = el<HTMLDivElement>("banner");
  box.innerHTML = "";
  if (message === "") {
    box.hidden = true;
    return;
  }
  box.hidden = false;
  box.textContent = message;
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "retry";
    button.addEventListener("click", retry);
    box.appendChild(button);
  }
}

function renderStatCards(target: HTMLElement, cards: StatCard[]): void {
  target.innerHTML = "";
  for (const card of cards) {
    const div = document.createElement("div");
    div.className = "stat-card";
    const label = document.createElement("span");
    label.className = "stat-label";
    label.textContent = card.label;
    const value = document.createElement("code");
    value.className = "stat-value";
    value.textContent = card.value;
    div.append(label, value);
    target.appendChild(div);
  }
}

function renderTreeNodes(nodes: TreeNode[], trail: string[]): HTMLElement {
  const list = document.createElement("ul");
  for (const node of nodes) {
    const item = document.createElement("li");
    item.className = `tree-${node.kind}`;
    const label = document.createElement("span");
    label.textContent = node.label;
    item.appendChild(label);
    if (node.kind === "context") {
      const [category, subcategory, concept] = trail as [string, string, string];
      const key = pairKey(category, subcategory, concept, node.label);
      label.classList.add("selectable");
      label.addEventListener("click", () => void selectPair(key));
    } else {
      item.appendChild(renderTreeNodes(node.children, [...trail, node.label]));
    }
    list.appendChild(item);
  }
  return list;
}

async function loadTaxonomy(): Promise<void> {
  try {
    const { json } = await api.taxonomy();
    banner("");
    const tree = taxonomyTree(json);
    const render = () => {
      const query = el<HTMLInputElement>("search").value;
      const filtered = searchTree(tree, query);
      const host = el<HTMLDivElement>("taxonomy");
      host.innerHTML = "";
      host.appendChild(renderTreeNodes(filtered, []));
    };
    el<HTMLInputElement>("search").addEventListener("input", render);
    render();
  } catch (err) {
    banner(`taxonomy unavailable: ${String(err)}`, () => void loadTaxonomy());
  }
}

async function loadManifests(): Promise<void> {
  try {
    state.manifests = await api.manifests();
    const select = el<HTMLSelectElement>("manifest");
    select.innerHTML = "";
    for (const manifest of state.manifests) {
      const option = document.createElement("option");
      option.value = manifest.id;
      option.textContent = `${manifest.id.slice(0, 12)}… (${manifest.pairs.length} pairs)`;
      select.appendChild(option);
    }
    state.manifestId = state.manifests.at(-1)?.id ?? null;
    if (state.manifestId !== null) select.value = state.manifestId;
    select.addEventListener("change", () => {
      state.manifestId = select.value;
      if (state.pair !== null) void selectPair(state.pair);
    });
  } catch (err) {
    banner(`manifests unavailable: ${String(err)}`, () => void loadManifests());
  }
}

async function selectPair(key: string): Promise<void> {
  const manifestId =
    state.manifests.find((m) => m.pairs.includes(key))?.id ?? state.manifestId;
  if (manifestId == null) {
    banner("no manifest covers this pair; run a sweep first");
    return;
  }
  try {
    const { text, json } = await api.curve(manifestId, key);
    state.manifestId = manifestId;
    state.pair = key;
    state.curve = json;
    state.curveText = text;
    state.session = new EditSession(api, key, state.seed, manifestId);
    el<HTMLElement>("pair-name").textContent = key;
    renderStatCards(el<HTMLDivElement>("curve-stats"), curveStatCards(text));
    el<HTMLDivElement>("history").innerHTML = "";
    banner("");
    updateSelection();
  } catch (err) {
    banner(`curve unavailable for ${key}: ${String(err)}`);
  }
}

function updateSelection(): void {
  const slider = el<HTMLInputElement>("probability");
  state.probability = Number(slider.value);
  el<HTMLElement>("probability-value").textContent = slider.value;
  const runButton = el<HTMLButtonElement>("run-edit");
  if (state.curve === null || state.session === null) {
    runButton.disabled = true;
    el<HTMLElement>("proposal").textContent = "select a concept context to load its curve";
    return;
  }
  try {
    const proposal = state.session.selectIntervention(state.curve, state.probability);
    el<HTMLElement>("proposal").textContent =
      `switch step ${proposal.stepK} (tau ${proposal.tau}), curve value ${proposal.predicted}`;
    el<HTMLDivElement>("curve-plot").innerHTML = renderCurveSvg(state.curve, {
      probability: proposal.probability,
      stepK: proposal.stepK,
      tau: proposal.tau,
    });
    runButton.disabled = false;
  } catch (err) {
    runButton.disabled = true;
    el<HTMLElement>("proposal").textContent = `slider disabled: ${String(err)}`;
    el<HTMLDivElement>("curve-plot").innerHTML = renderCurveSvg(state.curve, null);
  }
}

function historyCard(entry: HistoryEntry): HTMLElement {
  const card = document.createElement("div");
  card.className = `history-card ${entry.status}`;
  const title = document.createElement("h4");
  title.textContent = `p=${entry.probability} -> step ${entry.stepK}`;
  card.appendChild(title);
  if (entry.status === "failed") {
    const msg = document.createElement("p");
    msg.className = "error";
    msg.textContent = entry.error ?? "failed";
    card.appendChild(msg);
    return card;
  }
  const pictures = document.createElement("div");
  pictures.className = "pair-images";
  for (const [label, ref] of [["base", entry.baseImageRef], ["edited", entry.imageRef]] as const) {
    if (ref === undefined) continue;
    const figure = document.createElement("figure");
    const img = document.createElement("img");
    img.src = api.imageUrl(ref);
    img.alt = `${label} image`;
    const caption = document.createElement("figcaption");
    caption.textContent = label;
    figure.append(img, caption);
    pictures.appendChild(figure);
  }
  card.appendChild(pictures);
  if (entry.jobText !== undefined) {
    const stats = document.createElement("div");
    renderStatCards(stats, editReportCards(entry.jobText));
    card.appendChild(stats);
  }
  return card;
}

async function runEdit(): Promise<void> {
  if (state.session === null) return;
  const button = el<HTMLButtonElement>("run-edit");
  button.disabled = true;
  try {
    const entry = await state.session.runEdit(state.probability);
    el<HTMLDivElement>("history").prepend(historyCard(entry));
  } catch (err) {
    banner(`edit failed to submit: ${String(err)}`);
  } finally {
    button.disabled = false;
  }
}

function main(): void {
  el<HTMLInputElement>("probability").addEventListener("input", updateSelection);
  el<HTMLButtonElement>("run-edit").addEventListener("click", () => void runEdit());
  const seedInput = el<HTMLInputElement>("seed");
  seedInput.addEventListener("change", () => {
    state.seed = Number(seedInput.value);
    if (state.pair !== null) void selectPair(state.pair);
  });
  void loadTaxonomy();
  void loadManifests();
  updateSelection();
}

main();
