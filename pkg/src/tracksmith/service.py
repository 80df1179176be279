"""HTTP facade: upload MIDI, inspect pianorolls, generate, download MIDI.

Pieces are immutable records in a content-addressed on-disk store, so
generation always creates a new id and identical content always maps to
the same id (which makes seeded requests reproducible end to end over the
wire). Request and response shapes are published JSON schemas, served at
/schemas for clients and contract tests.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import replace as dc_replace
from pathlib import Path

import jsonschema
import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import density as density_mod
from .errors import (
    DataError,
    InvalidPiece,
    InvalidSelection,
    MalformedFile,
    StepBudgetExceeded,
)
from .generation import (
    BAR_INPAINT,
    TRACK_INPAINT,
    ALL_INSTRUMENTS,
    GenerationRequest,
    SamplerParams,
    TrackSpec,
    generate_tracks,
    inpaint_bars,
)
from .midi_core import Bar, NoteEvent, Piece, QuantizedTrack, piece_from_midi, piece_to_midi
from .model import SequencePredictor
from .vocab import vocab_hash

MAX_NEW_TRACKS = 16

GENERATION_REQUEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "tracksmith/generation-request",
    "type": "object",
    "properties": {
        "mode": {"enum": [TRACK_INPAINT, BAR_INPAINT]},
        "n_new_tracks": {"type": "integer", "minimum": 1, "maximum": MAX_NEW_TRACKS},
        "replace_tracks": {
            "type": "array",
            "items": {"type": "integer", "minimum": 0},
            "minItems": 1,
            "uniqueItems": True,
        },
        "allowed_instruments": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0, "maximum": 128},
                "minItems": 1,
            },
        },
        "densities": {
            "type": "array",
            "items": {
                "anyOf": [
                    {"type": "null"},
                    {"type": "integer", "minimum": 0, "maximum": 9},
                ]
            },
        },
        "selection": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "temperature": {"type": "number", "exclusiveMinimum": 0},
        "top_p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
    },
    "required": ["mode"],
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"mode": {"const": TRACK_INPAINT}}},
            "then": {"anyOf": [{"required": ["n_new_tracks"]}, {"required": ["replace_tracks"]}]},
        },
        {
            "if": {"properties": {"mode": {"const": BAR_INPAINT}}},
            "then": {"required": ["selection"]},
        },
    ],
}

PIANOROLL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "tracksmith/pianoroll",
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "n_bars": {"type": "integer", "minimum": 1},
        "tracks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "instrument": {"type": "integer", "minimum": 0, "maximum": 128},
                    "density": {"type": "integer", "minimum": 0, "maximum": 9},
                    "bars": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "pitch": {"type": "integer", "minimum": 0, "maximum": 127},
                                    "onset": {"type": "integer", "minimum": 0, "maximum": 47},
                                    "offset": {"type": "integer", "minimum": 1, "maximum": 48},
                                },
                                "required": ["pitch", "onset", "offset"],
                                "additionalProperties": False,
                            },
                        },
                    },
                },
                "required": ["instrument", "density", "bars"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["id", "n_bars", "tracks"],
    "additionalProperties": False,
}


def piece_to_dict(piece: Piece, densities: tuple[int, ...]) -> dict:
    return {
        "n_bars": piece.n_bars,
        "tracks": [
            {
                "instrument": track.instrument,
                "density": level,
                "bars": [
                    [
                        {"pitch": e.pitch, "onset": e.onset, "offset": e.offset}
                        for e in bar.events
                    ]
                    for bar in track.bars
                ],
            }
            for track, level in zip(piece.tracks, densities)
        ],
    }


def piece_from_dict(payload: dict) -> tuple[Piece, tuple[int, ...]]:
    tracks = []
    densities = []
    for track in payload["tracks"]:
        bars = tuple(
            Bar(tuple(sorted(NoteEvent(e["onset"], e["pitch"], e["offset"]) for e in bar)))
            for bar in track["bars"]
        )
        tracks.append(QuantizedTrack(track["instrument"], bars))
        densities.append(track["density"])
    return Piece(tuple(tracks)), tuple(densities)


class PieceStore:
    """Content-addressed, append-only store of piece records on disk."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, piece_id: str) -> Path:
        return self.data_dir / f"{piece_id}.json"

    def put(self, piece: Piece, densities: tuple[int, ...], source: str) -> dict:
        body = piece_to_dict(piece, densities)
        piece_id = hashlib.sha256(
            json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:16]
        record = {
            "id": piece_id,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "source": source,
            **body,
        }
        path = self._path(piece_id)
        with self._lock:
            if not path.exists():
                tmp = path.with_suffix(".tmp")
                tmp.write_text(json.dumps(record), encoding="utf-8")
                tmp.replace(path)
        return record

    def get(self, piece_id: str) -> dict | None:
        path = self._path(piece_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


def record_to_pianoroll(record: dict) -> dict:
    return {
        "id": record["id"],
        "n_bars": record["n_bars"],
        "tracks": record["tracks"],
    }


def _parse_generation_payload(payload: dict) -> tuple[dict, SamplerParams]:
    jsonschema.validate(payload, GENERATION_REQUEST_SCHEMA)
    seed = payload.get("seed")
    if seed is None:
        seed = int.from_bytes(os.urandom(8), "little") % 2**63
    params = SamplerParams(
        temperature=payload.get("temperature", 1.0),
        top_p=payload.get("top_p", 1.0),
        max_steps=payload.get("max_steps"),
        seed=seed,
    )
    return payload, params


def _track_specs(payload: dict, n: int) -> tuple[TrackSpec | None, ...]:
    """One spec per new/replaced track; None where the caller supplies a
    default (replacement keeps the original instrument and density)."""
    instruments = payload.get("allowed_instruments")
    densities = payload.get("densities")
    if instruments is not None and len(instruments) != n:
        raise ValueError(f"allowed_instruments has {len(instruments)} entries for {n} tracks")
    if densities is not None and len(densities) != n:
        raise ValueError(f"densities has {len(densities)} entries for {n} tracks")
    specs: list[TrackSpec | None] = []
    for i in range(n):
        if instruments is None and densities is None:
            specs.append(None)
            continue
        allowed = frozenset(instruments[i]) if instruments is not None else ALL_INSTRUMENTS
        level = densities[i] if densities is not None else None
        specs.append(TrackSpec(allowed_instruments=allowed, density=level))
    return tuple(specs)


def _replace_tracks(
    predictor, piece: Piece, densities: tuple[int, ...], indices: list[int], payload: dict, params: SamplerParams
):
    """Regenerate the listed tracks in place, each conditioned on all the
    others (current state), keeping instrument and density unless the
    request overrides them."""
    for index in indices:
        if not 0 <= index < piece.n_tracks:
            raise ValueError(f"replace_tracks index {index} out of range")
    if piece.n_tracks < 2:
        raise ValueError("track replacement needs at least 2 tracks for context")
    specs = _track_specs(payload, len(indices))
    seeds = np.random.default_rng(params.seed)
    levels = list(densities)
    current = piece
    for position, index in enumerate(indices):
        spec = specs[position] or TrackSpec(
            allowed_instruments=frozenset({current.tracks[index].instrument}),
            density=levels[index],
        )
        request = GenerationRequest(
            mode=TRACK_INPAINT,
            piece=Piece(tuple(t for i, t in enumerate(current.tracks) if i != index)),
            track_specs=(spec,),
            base_densities=tuple(l for i, l in enumerate(levels) if i != index),
            params=dc_replace(params, seed=int(seeds.integers(2**63))),
        )
        out_piece, out_levels = generate_tracks(predictor, request)
        tracks = list(current.tracks)
        tracks[index] = out_piece.tracks[-1]
        levels[index] = out_levels[-1]
        current = Piece(tuple(tracks))
    return current, tuple(levels)


def create_app(
    predictor: SequencePredictor | None = None,
    density_table: density_mod.DensityTable | None = None,
    data_dir: str | Path = "tracksmith-data",
    model_name: str | None = None,
) -> FastAPI:
    app = FastAPI(title="tracksmith", version="0.1.0")
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = PieceStore(data_dir)
    table = density_table or density_mod.DensityTable()
    app.state.predictor = predictor
    app.state.model_name = model_name
    app.state.store = store

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok" if app.state.predictor is not None else "degraded",
            "model": app.state.model_name,
            "vocab_hash": vocab_hash(),
        }

    @app.get("/schemas")
    def schemas() -> dict:
        return {
            "generation_request": GENERATION_REQUEST_SCHEMA,
            "pianoroll": PIANOROLL_SCHEMA,
        }

    @app.post("/pieces")
    async def create_piece(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = next((v for v in form.values() if hasattr(v, "read")), None)
            if upload is None:
                return _error(400, "multipart body carries no file field")
            data = await upload.read()
            source = getattr(upload, "filename", "upload.mid") or "upload.mid"
        else:
            data = await request.body()
            source = "request-body"
        if not data:
            return _error(400, "empty request body")
        try:
            piece = piece_from_midi(data)
        except MalformedFile as exc:
            return _error(400, str(exc))
        except DataError as exc:
            return _error(422, str(exc))
        densities = density_mod.assign_levels(piece, table)
        record = store.put(piece, densities, source)
        return {"id": record["id"], "pianoroll": record_to_pianoroll(record)}

    @app.get("/pieces/{piece_id}")
    def get_piece(piece_id: str):
        record = store.get(piece_id)
        if record is None:
            return _error(404, f"unknown piece {piece_id}")
        return record_to_pianoroll(record)

    @app.get("/pieces/{piece_id}/midi")
    def get_midi(piece_id: str):
        record = store.get(piece_id)
        if record is None:
            return _error(404, f"unknown piece {piece_id}")
        piece, _ = piece_from_dict(record)
        return Response(
            content=piece_to_midi(piece),
            media_type="audio/midi",
            headers={"Content-Disposition": f'attachment; filename="{piece_id}.mid"'},
        )

    @app.post("/pieces/{piece_id}/generate")
    def generate(piece_id: str, payload: dict):
        record = store.get(piece_id)
        if record is None:
            return _error(404, f"unknown piece {piece_id}")
        if app.state.predictor is None:
            return _error(409, "no model loaded; start the server with a checkpoint")
        try:
            payload, params = _parse_generation_payload(payload)
        except jsonschema.ValidationError as exc:
            return _error(400, f"request schema violation: {exc.message}")
        base_piece, base_densities = piece_from_dict(record)
        try:
            if payload["mode"] == TRACK_INPAINT:
                if "replace_tracks" in payload and "n_new_tracks" in payload:
                    return _error(400, "replace_tracks and n_new_tracks are mutually exclusive")
                if "replace_tracks" in payload:
                    piece, densities = _replace_tracks(
                        app.state.predictor,
                        base_piece,
                        base_densities,
                        payload["replace_tracks"],
                        payload,
                        params,
                    )
                else:
                    specs = tuple(
                        spec or TrackSpec()
                        for spec in _track_specs(payload, payload["n_new_tracks"])
                    )
                    request = GenerationRequest(
                        mode=TRACK_INPAINT,
                        piece=base_piece,
                        track_specs=specs,
                        base_densities=base_densities,
                        params=params,
                    )
                    piece, densities = generate_tracks(app.state.predictor, request)
            else:
                request = GenerationRequest(
                    mode=BAR_INPAINT,
                    piece=base_piece,
                    selection=tuple((t, b) for t, b in payload["selection"]),
                    base_densities=base_densities,
                    params=params,
                )
                piece, densities = inpaint_bars(app.state.predictor, request)
        except (ValueError, InvalidSelection, InvalidPiece) as exc:
            return _error(400, str(exc))
        except StepBudgetExceeded as exc:
            return _error(504, str(exc))
        new_record = store.put(piece, densities, f"generated:{piece_id}")
        return {
            "id": new_record["id"],
            "seed": params.seed,
            "pianoroll": record_to_pianoroll(new_record),
        }

    return app


def serve(
    host: str,
    port: int,
    predictor: SequencePredictor | None,
    density_table: density_mod.DensityTable | None,
    data_dir: str | Path,
    model_name: str | None = None,
) -> None:
    import uvicorn

    app = create_app(predictor, density_table, data_dir, model_name)
    uvicorn.run(app, host=host, port=port, log_level="info")
