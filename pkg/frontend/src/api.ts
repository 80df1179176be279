// Thin fetch client for the generation service.

import type { GenerateResponse, GenerationRequest, HealthResponse, Pianoroll } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function throwFrom(response: Response): Promise<never> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, message);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  async health(): Promise<HealthResponse> {
    const response = await fetch(`${this.base}/health`);
    if (!response.ok) await throwFrom(response);
    return response.json();
  }

  async uploadMidi(data: ArrayBuffer | Uint8Array | Blob, filename = "upload.mid"): Promise<{ id: string; pianoroll: Pianoroll }> {
    const form = new FormData();
    const blob = data instanceof Blob ? data : new Blob([data as BlobPart], { type: "audio/midi" });
    form.append("file", blob, filename);
    const response = await fetch(`${this.base}/pieces`, { method: "POST", body: form });
    if (!response.ok) await throwFrom(response);
    return response.json();
  }

  async getPiece(id: string): Promise<Pianoroll> {
    const response = await fetch(`${this.base}/pieces/${id}`);
    if (!response.ok) await throwFrom(response);
    return response.json();
  }

  async generate(id: string, request: GenerationRequest): Promise<GenerateResponse> {
    const response = await fetch(`${this.base}/pieces/${id}/generate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) await throwFrom(response);
    return response.json();
  }

  async downloadMidi(id: string): Promise<ArrayBuffer> {
    const response = await fetch(this.midiUrl(id));
    if (!response.ok) await throwFrom(response);
    return response.arrayBuffer();
  }

  midiUrl(id: string): string {
    return `${this.base}/pieces/${id}/midi`;
  }
}
