// DOM rendering of a GridModel plus small UI helpers. All musical state
// lives in state.ts; this layer only draws and forwards clicks.

import type { GridModel } from "./grid.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GridCallbacks {
  onCellClick(track: number, bar: number): void;
  onTrackClick(track: number): void;
}

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value));
  return node;
}

export function renderGrid(container: HTMLElement, model: GridModel, callbacks: GridCallbacks): void {
  container.textContent = "";
  const svg = el("svg", { width: model.width, height: model.height, class: "pianoroll" });

  for (const cell of model.cells) {
    const rect = el("rect", {
      x: cell.x,
      y: cell.y,
      width: cell.width,
      height: cell.height,
      class: cell.selected ? "cell selected" : "cell",
      "data-track": cell.track,
      "data-bar": cell.bar,
    });
    rect.addEventListener("click", () => callbacks.onCellClick(cell.track, cell.bar));
    svg.appendChild(rect);
  }

  for (const x of model.barLineXs) {
    svg.appendChild(el("line", { x1: x, y1: 0, x2: x, y2: model.height, class: "barline" }));
  }

  for (const band of model.bands) {
    const label = el("text", {
      x: 8,
      y: band.y + 14,
      class: band.marked ? "track-label marked" : "track-label",
    });
    label.textContent = `${band.index}: ${band.name} (density ${band.density})`;
    label.addEventListener("click", () => callbacks.onTrackClick(band.index));
    svg.appendChild(label);
    if (band.marked) {
      svg.appendChild(
        el("rect", {
          x: 0,
          y: band.y,
          width: model.width,
          height: band.height,
          class: "track-mark",
        }),
      );
    }
  }

  for (const note of model.notes) {
    svg.appendChild(
      el("rect", {
        x: note.x,
        y: note.y,
        width: Math.max(note.width, 1),
        height: note.height,
        class: "note",
        "data-pitch": note.pitch,
      }),
    );
  }

  container.appendChild(svg);
}

export function showToast(message: string, kind: "error" | "info" = "info"): void {
  const host = document.getElementById("toasts");
  if (!host) return;
  const toast = document.createElement("div");
  toast.className = `toast ${kind}`;
  toast.textContent = message;
  host.appendChild(toast);
  setTimeout(() => toast.remove(), 6000);
}

export function showBanner(messages: string[]): void {
  const banner = document.getElementById("banner");
  if (!banner) return;
  banner.textContent = messages.join("; ");
  banner.style.display = messages.length ? "block" : "none";
}
