"""Batch entry points for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error (bad MIDI, bad tokens,
bad selections), 3 model error (checkpoint, divergence, step budget).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import codec, dataset, density, generation, model, vocab
from .errors import DataError, ModelError, TracksmithError
from .midi_core import DRUM, Piece, piece_from_midi, piece_to_midi

BUDGET_NOTE = (
    "note: reference large-corpus figures (99.8% of 10-track 4-bar, 86.8% of "
    "8-bar, 38.8% of 16-bar segments under 2048 tokens) are not asserted on "
    "this corpus."
)


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; argparse's default of 2 is reserved for data errors
    def error(self, message: str):  # noqa: D102
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_table(path: str | None) -> density.DensityTable:
    return density.DensityTable.load(path) if path else density.DensityTable()


def _load_corpus(directory: str) -> tuple[list[Piece], int]:
    """Pieces from every .mid file in name order; unparseable or meterless
    files are skipped and counted."""
    paths = sorted(Path(directory).glob("*.mid")) + sorted(Path(directory).glob("*.midi"))
    if not paths:
        raise DataError(f"no .mid files in {directory}")
    pieces: list[Piece] = []
    skipped = 0
    for path in paths:
        try:
            pieces.append(piece_from_midi(path.read_bytes()))
        except DataError:
            skipped += 1
    if not pieces:
        raise DataError(f"no usable MIDI files in {directory}")
    return pieces, skipped


def _write_out(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)


def _read_in(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def cmd_tokenize(args: argparse.Namespace) -> int:
    piece = piece_from_midi(_read_in(args.input))
    levels = density.assign_levels(piece, _load_table(args.density_table))
    seq = codec.encode_multitrack(piece, levels)
    text = seq.to_json() + "\n" if args.format == "json" else seq.to_text()
    _write_out(text.encode(), args.output)
    return 0


def cmd_detokenize(args: argparse.Namespace) -> int:
    text = _read_in(args.input).decode()
    seq = vocab.TokenSequence.from_json(text) if text.lstrip().startswith("{") else vocab.TokenSequence.from_text(text)
    if any(tid in (vocab.FILL_PLACEHOLDER, vocab.FILL_START, vocab.FILL_END) for tid in seq.ids):
        seq = codec.reinsert_fills(seq)
    piece, _ = codec.decode(seq)
    _write_out(piece_to_midi(piece), args.output)
    return 0


def _build_cfg(args: argparse.Namespace) -> dataset.BuildConfig:
    return dataset.BuildConfig(
        n_bars=args.n_bars,
        max_tracks=args.max_tracks,
        max_len=args.max_len,
        mode=args.mode,
        mask_rate=args.mask_rate,
        seed=args.seed,
    )


def cmd_stats(args: argparse.Namespace) -> int:
    pieces, skipped = _load_corpus(args.corpus)
    cfg = _build_cfg(args)
    table = _load_table(args.density_table)
    lengths = [len(seq) for seq in dataset.examples_from_pieces(pieces, cfg, table)]
    stats = dataset.length_stats(lengths, cfg.max_len)
    print(f"pieces: {len(pieces)} (skipped files: {skipped})")
    print(f"sequences: {stats['total']} ({cfg.n_bars} bars, <= {cfg.max_tracks} tracks, mode {cfg.mode})")
    print(f"token length: min {stats['length_min']}, max {stats['length_max']}")
    for bucket, count in stats["length_histogram"].items():
        print(f"  {bucket}: {count}")
    print(f"kept fraction <= {cfg.max_len} tokens: {stats['kept_fraction']:.4f}")
    print(BUDGET_NOTE)
    return 0


def cmd_density_build(args: argparse.Namespace) -> int:
    pieces, skipped = _load_corpus(args.corpus)
    table = density.build_table(density.accumulate(pieces))
    table.save(args.output)
    print(f"wrote {args.output} from {len(pieces)} pieces (skipped files: {skipped})")
    return 0


def cmd_dataset_build(args: argparse.Namespace) -> int:
    pieces, skipped = _load_corpus(args.corpus)
    cfg = _build_cfg(args)
    table = _load_table(args.density_table)
    stats = dataset.filter_and_pack(dataset.examples_from_pieces(pieces, cfg, table), cfg, args.output)
    sidecar = dataset.stats_sidecar(args.output)
    print(
        f"wrote {args.output}: kept {stats['kept']}/{stats['total']} sequences "
        f"(fraction {stats['kept_fraction']:.4f}), stats in {sidecar}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    header, sequences = dataset.load_dataset(args.dataset)
    cfg = model.ModelConfig(
        layers=args.layers,
        heads=args.heads,
        embed_dim=args.embed_dim,
        window=args.window,
        ff_dim=args.ff_dim,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
    )
    lm, losses = model.train(cfg, [list(s.ids) for s in sequences])
    model.save_checkpoint(args.output, lm, losses)
    loss_csv = args.loss_csv or str(Path(args.output).with_suffix("")) + ".loss.csv"
    model.write_loss_csv(loss_csv, losses)
    print(f"trained {lm.n_parameters()} parameters for {cfg.steps} steps; final loss {losses[-1]:.4f}")
    print(f"checkpoint: {args.output}; loss log: {loss_csv}")
    return 0


def _parse_instruments(text: str | None, n: int) -> list[frozenset[int]]:
    if not text:
        return [generation.ALL_INSTRUMENTS] * n
    groups = text.split(";")
    if len(groups) == 1 and n > 1:
        groups = groups * n
    if len(groups) != n:
        raise DataError(f"--instruments lists {len(groups)} groups for {n} tracks")
    out = []
    for group in groups:
        values = set()
        for item in group.split(","):
            item = item.strip().lower()
            if not item:
                continue
            values.add(DRUM if item == "drum" else int(item))
        out.append(frozenset(values) if values else generation.ALL_INSTRUMENTS)
    return out


def _parse_densities(text: str | None, n: int) -> list[int | None]:
    if not text:
        return [None] * n
    groups = text.split(";")
    if len(groups) == 1 and n > 1:
        groups = groups * n
    if len(groups) != n:
        raise DataError(f"--densities lists {len(groups)} values for {n} tracks")
    return [None if g.strip() in ("", "_") else int(g) for g in groups]


def _parse_selection(text: str) -> list[tuple[int, int]]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        track, _, bar = chunk.partition(":")
        if not bar:
            raise DataError(f"selection entry {chunk!r} is not track:bar")
        pairs.append((int(track), int(bar)))
    if not pairs:
        raise DataError("selection is empty")
    return pairs


def _make_predictor(checkpoint: str | None) -> tuple[model.SequencePredictor, str]:
    if checkpoint:
        lm = model.load_checkpoint(checkpoint)
        return model.TransformerPredictor(lm), checkpoint
    # no checkpoint: grammar-masked uniform sampling, useful for smoke tests
    return model.UniformPredictor(), "uniform"


def cmd_generate(args: argparse.Namespace) -> int:
    piece = piece_from_midi(_read_in(args.input))
    table = _load_table(args.density_table)
    base_densities = density.assign_levels(piece, table)
    predictor, name = _make_predictor(args.checkpoint)
    params = generation.SamplerParams(
        temperature=args.temperature, top_p=args.top_p, max_steps=args.max_steps, seed=args.seed
    )
    if args.mode == "track":
        instruments = _parse_instruments(args.instruments, args.n)
        levels = _parse_densities(args.densities, args.n)
        request = generation.GenerationRequest(
            mode=generation.TRACK_INPAINT,
            piece=piece,
            track_specs=tuple(
                generation.TrackSpec(allowed_instruments=i, density=d)
                for i, d in zip(instruments, levels)
            ),
            base_densities=base_densities,
            params=params,
        )
        out_piece, _ = generation.generate_tracks(predictor, request)
    else:
        request = generation.GenerationRequest(
            mode=generation.BAR_INPAINT,
            piece=piece,
            selection=tuple(_parse_selection(args.selection)),
            base_densities=base_densities,
            params=params,
        )
        out_piece, _ = generation.inpaint_bars(predictor, request)
    _write_out(piece_to_midi(out_piece), args.output)
    print(f"generated with predictor {name}; wrote {args.output or 'stdout'}", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from . import service

    predictor = None
    name = None
    if args.checkpoint:
        predictor, name = _make_predictor(args.checkpoint)
    elif args.predictor == "uniform":
        predictor, name = model.UniformPredictor(), "uniform"
    table = _load_table(args.density_table) if args.density_table else None
    service.serve(args.host, args.port, predictor, table, args.data_dir, name)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tracksmith", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", parents=[], help="MIDI file to token text/JSON")
    p.add_argument("input", help="input .mid path, or - for stdin")
    p.add_argument("-o", "--output", help="output path (default stdout)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--density-table", help="density.json path (defaults to all-zero boundaries)")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("detokenize", help="token text/JSON back to a MIDI file")
    p.add_argument("input", nargs="?", default="-", help="token file, or - for stdin (default)")
    p.add_argument("-o", "--output", help="output .mid path (default stdout)")
    p.set_defaults(func=cmd_detokenize)

    def add_build_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n-bars", type=int, default=4)
        p.add_argument("--max-tracks", type=int, default=12)
        p.add_argument("--max-len", type=int, default=dataset.DEFAULT_MAX_LEN)
        p.add_argument("--mode", choices=[vocab.MULTITRACK, vocab.BARFILL], default=vocab.MULTITRACK)
        p.add_argument("--mask-rate", type=float, default=0.2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--density-table")

    p = sub.add_parser("stats", help="token-length histogram and kept fraction for a corpus")
    p.add_argument("corpus", help="directory of .mid files")
    add_build_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("density-build", help="build density.json from a corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_density_build)

    p = sub.add_parser("dataset-build", help="build a training dataset from a corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    add_build_flags(p)
    p.set_defaults(func=cmd_dataset_build)

    p = sub.add_parser("train", help="train the sequence model on a dataset file")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="checkpoint path")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--embed-dim", type=int, default=128)
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--ff-dim", type=int, default=512)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-csv", help="loss log path (default: checkpoint stem + .loss.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate tracks or inpaint bars in a MIDI file")
    p.add_argument("input", help="input .mid path, or - for stdin")
    p.add_argument("-o", "--output", help="output .mid path (default stdout)")
    p.add_argument("--mode", choices=["track", "bar"], required=True)
    p.add_argument("--n", type=int, default=1, help="new tracks (track mode)")
    p.add_argument("--instruments", help="allowed sets per new track, e.g. '30,31;drum'")
    p.add_argument("--densities", help="density level per new track, e.g. '3;_' (_ = free)")
    p.add_argument("--selection", default="", help="bars to regenerate, e.g. '0:1,2:3'")
    p.add_argument("--checkpoint", help="model checkpoint (omit for grammar-masked uniform sampling)")
    p.add_argument("--density-table")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=os.environ.get("TRACKSMITH_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("TRACKSMITH_PORT", "8000")))
    p.add_argument("--checkpoint", default=os.environ.get("TRACKSMITH_CHECKPOINT"))
    p.add_argument(
        "--predictor",
        choices=["uniform"],
        help="serve without a checkpoint using this predictor (smoke/demo mode)",
    )
    p.add_argument("--density-table", default=os.environ.get("TRACKSMITH_DENSITY_TABLE"))
    p.add_argument("--data-dir", default=os.environ.get("TRACKSMITH_DATA_DIR", "tracksmith-data"))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate" and args.mode == "bar" and not args.selection:
        parser.error("--selection is required in bar mode")
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"tracksmith: model error: {exc}", file=sys.stderr)
        return 3
    except (DataError, ValueError) as exc:
        print(f"tracksmith: data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"tracksmith: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
