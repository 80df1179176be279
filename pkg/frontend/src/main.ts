// Browser entry: wires the state store, grid, constraint form, and API
// client together. One generation request in flight at a time.

import { ApiClient, ApiError } from "./api.js";
import { renderGrid, showBanner, showToast } from "./dom.js";
import { buildGridModel } from "./grid.js";
import { INSTRUMENT_NAMES } from "./names.js";
import { buildRequest } from "./request.js";
import {
  applyResult,
  currentPiece,
  goBack,
  initialState,
  loadPiece,
  setNewTrackCount,
  setSampler,
  toggleCell,
  toggleTrackMark,
  updateTrackForm,
  type UiState,
} from "./state.js";
import { validatePianoroll } from "./validate.js";

const api = new ApiClient(serviceBase());
let state: UiState = initialState();
let busy = false;

function serviceBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "";
}

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function setState(next: UiState): void {
  state = next;
  render();
}

function render(): void {
  const piece = currentPiece(state);
  const host = $("grid");
  if (!piece) {
    host.textContent = "Upload a MIDI file to begin.";
  } else {
    const problems = validatePianoroll(piece);
    showBanner(problems);
    if (!problems.length) {
      renderGrid(host, buildGridModel(piece, state.cells, state.trackMarks), {
        onCellClick: (t, b) => setState(toggleCell(state, t, b)),
        onTrackClick: (t) => setState(toggleTrackMark(state, t)),
      });
    }
  }
  ($("back") as HTMLButtonElement).disabled = busy || state.history.length <= 1;
  ($("generate") as HTMLButtonElement).disabled = busy || !piece;
  const download = $("download") as HTMLAnchorElement;
  if (piece) {
    download.href = api.midiUrl(piece.id);
    download.classList.remove("disabled");
  } else {
    download.removeAttribute("href");
    download.classList.add("disabled");
  }
  $("status").textContent = piece
    ? `piece ${piece.id} | ${piece.tracks.length} tracks x ${piece.n_bars} bars | history ${state.history.length}`
    : "no piece";
  renderForms();
}

function renderForms(): void {
  const host = $("new-tracks");
  host.textContent = "";
  state.newTracks.forEach((form, index) => {
    const row = document.createElement("div");
    row.className = "track-form";

    const select = document.createElement("select");
    select.multiple = true;
    select.size = 4;
    INSTRUMENT_NAMES.forEach((name, program) => {
      const option = document.createElement("option");
      option.value = String(program);
      option.textContent = `${program}: ${name}`;
      option.selected = form.instruments.includes(program);
      select.appendChild(option);
    });
    select.addEventListener("change", () => {
      const chosen = [...select.selectedOptions].map((o) => Number(o.value));
      setState(updateTrackForm(state, index, { ...form, instruments: chosen }));
    });

    const density = document.createElement("input");
    density.type = "range";
    density.min = "-1";
    density.max = "9";
    density.value = String(form.density ?? -1);
    density.title = "density level (-1 = model's choice)";
    density.addEventListener("change", () => {
      const value = Number(density.value);
      setState(updateTrackForm(state, index, { ...form, density: value < 0 ? null : value }));
    });

    const caption = document.createElement("span");
    caption.textContent = `new track ${index + 1} (density ${form.density ?? "free"})`;

    row.append(caption, select, density);
    host.appendChild(row);
  });
}

async function onUpload(file: File): Promise<void> {
  try {
    const { pianoroll } = await api.uploadMidi(await file.arrayBuffer(), file.name);
    setState(loadPiece(state, pianoroll));
    showToast(`loaded ${file.name}`, "info");
  } catch (error) {
    showToast(error instanceof ApiError ? error.message : String(error), "error");
  }
}

async function onGenerate(): Promise<void> {
  const piece = currentPiece(state);
  if (!piece || busy) return;
  const built = buildRequest(state);
  if (!built.ok) {
    showBanner(built.errors);
    return;
  }
  showBanner([]);
  busy = true;
  render();
  try {
    const response = await api.generate(piece.id, built.request);
    setState(applyResult(state, response.pianoroll));
    showToast(`generated ${response.id} (seed ${response.seed})`, "info");
  } catch (error) {
    showToast(error instanceof ApiError ? error.message : String(error), "error");
  } finally {
    busy = false;
    render();
  }
}

function wire(): void {
  ($("file") as HTMLInputElement).addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    if (input.files?.length) void onUpload(input.files[0]);
  });
  $("generate").addEventListener("click", () => void onGenerate());
  $("back").addEventListener("click", () => setState(goBack(state)));
  ($("count") as HTMLInputElement).addEventListener("change", (event) => {
    setState(setNewTrackCount(state, Number((event.target as HTMLInputElement).value)));
  });
  for (const [id, field] of [
    ["temperature", "temperature"],
    ["top-p", "topP"],
  ] as const) {
    ($(id) as HTMLInputElement).addEventListener("change", (event) => {
      const value = Number((event.target as HTMLInputElement).value);
      if (Number.isFinite(value) && value > 0) setState(setSampler(state, { [field]: value }));
    });
  }
  ($("seed") as HTMLInputElement).addEventListener("change", (event) => {
    const raw = (event.target as HTMLInputElement).value.trim();
    setState(setSampler(state, { seed: raw === "" ? null : Math.abs(Math.floor(Number(raw))) }));
  });

  void api
    .health()
    .then((health) => {
      $("health").textContent = `service: ${health.status}${health.model ? ` (${health.model})` : ""}`;
    })
    .catch(() => {
      $("health").textContent = "service: unreachable";
    });
  render();
}

wire();
