// DOM rendering. The corpus is synthetic, so cards draw as color tiles
// derived from the signature, with dots overlaid at their box positions.
// Suppressed dots (show=false) are not rendered at all.

import type { ConsoleState, GridItem } from "./state.js";
import type { DocumentSummary, Dot } from "./types.js";

export function colorFor(signature: string): string {
  const hue = parseInt(signature.slice(0, 4), 16) % 360;
  const sat = 35 + (parseInt(signature.slice(4, 6), 16) % 40);
  return `hsl(${hue}, ${sat}%, 62%)`;
}

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

export function renderCardTile(doc: DocumentSummary): HTMLElement {
  const tile = el("div", "card-tile");
  tile.dataset.signature = doc.signature;
  tile.style.background = colorFor(doc.signature);
  tile.appendChild(el("span", "card-sig", doc.signature.slice(0, 8)));
  const terms = doc.annotations.map((a) => a.term).join(", ");
  tile.appendChild(el("span", "card-terms", terms));
  return tile;
}

export function renderDot(dot: Dot, card: DocumentSummary): HTMLElement {
  const [x, y, w, h] = dot.box;
  const node = el("button", "dot");
  node.dataset.category = dot.category;
  node.dataset.box = JSON.stringify(dot.box);
  node.title = dot.category;
  node.style.left = `${((x + w / 2) / card.width) * 100}%`;
  node.style.top = `${((y + h / 2) / card.height) * 100}%`;
  return node;
}

export function renderCardView(state: ConsoleState): HTMLElement {
  const view = el("div", "card-view");
  if (!state.card) {
    view.appendChild(el("p", "placeholder", "Pick a card to start searching."));
    return view;
  }
  const image = el("div", "card-image");
  image.dataset.signature = state.card.signature;
  image.style.background = colorFor(state.card.signature);
  image.style.aspectRatio = `${state.card.width} / ${state.card.height}`;
  for (const dot of state.activeDots) {
    if (dot.show) image.appendChild(renderDot(dot, state.card));
  }
  if (state.cropRect) {
    const crop = el("div", "crop-rect");
    crop.style.left = `${(state.cropRect.x / state.card.width) * 100}%`;
    crop.style.top = `${(state.cropRect.y / state.card.height) * 100}%`;
    crop.style.width = `${(state.cropRect.w / state.card.width) * 100}%`;
    crop.style.height = `${(state.cropRect.h / state.card.height) * 100}%`;
    image.appendChild(crop);
  }
  view.appendChild(image);
  const caption = el(
    "p",
    "card-caption",
    `${state.card.signature.slice(0, 12)} (${state.card.width}x${state.card.height})`,
  );
  view.appendChild(caption);
  return view;
}

export function renderChips(state: ConsoleState): HTMLElement {
  const bar = el("div", "chips");
  for (const term of state.refineTerms) {
    bar.appendChild(el("span", "chip chip-active", term));
  }
  for (const chip of state.chips) {
    if (state.refineTerms.includes(chip.term)) continue;
    const node = el("button", "chip", `${chip.term} ${chip.weight.toFixed(2)}`);
    node.dataset.term = chip.term;
    bar.appendChild(node);
  }
  return bar;
}

export function renderGrid(items: GridItem[]): HTMLElement {
  const grid = el("div", "grid");
  for (const item of items) {
    const cell = el("div", "grid-cell");
    if (item.kind === "result") {
      cell.dataset.signature = item.result.signature;
      cell.dataset.source = item.result.source;
      cell.style.background = colorFor(item.result.signature);
      cell.appendChild(el("span", "cell-sig", item.result.signature.slice(0, 8)));
      cell.appendChild(
        el("span", "cell-score", `sim ${item.result.similarity.toFixed(3)}`),
      );
    } else {
      cell.dataset.signature = item.scene.signature;
      cell.dataset.source = "objectSearch";
      cell.style.background = colorFor(item.scene.signature);
      cell.appendChild(el("span", "cell-sig", item.scene.signature.slice(0, 8)));
      cell.appendChild(el("span", "cell-score", `dist ${item.scene.distance}`));
    }
    grid.appendChild(cell);
  }
  return grid;
}

export function renderError(message: string | null): HTMLElement {
  const banner = el("div", message ? "error-banner" : "error-banner hidden");
  if (message) banner.textContent = message;
  return banner;
}

export function renderConsole(state: ConsoleState, cards: DocumentSummary[]): HTMLElement {
  const root = el("div", "console");
  root.appendChild(renderError(state.error));
  const cardList = el("div", "card-list");
  for (const doc of cards) cardList.appendChild(renderCardTile(doc));
  root.appendChild(cardList);
  const workspace = el("div", "workspace");
  workspace.appendChild(renderCardView(state));
  const side = el("div", "results");
  side.appendChild(renderChips(state));
  if (state.conformity !== null) {
    side.appendChild(el("p", "conformity", `conformity ${state.conformity.toFixed(3)}`));
  }
  side.appendChild(renderGrid(state.grid));
  workspace.appendChild(side);
  root.appendChild(workspace);
  return root;
}
