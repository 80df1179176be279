#!/usr/bin/env python3
"""Write a deterministic synthetic MIDI corpus for experiments and demos."""

import argparse
from pathlib import Path

from tracksmith.synth import write_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", type=Path)
    parser.add_argument("--count", type=int, default=48)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--max-tracks", type=int, default=4)
    parser.add_argument("--max-bars", type=int, default=8)
    args = parser.parse_args()
    paths = write_corpus(
        args.directory,
        count=args.count,
        seed=args.seed,
        max_tracks=args.max_tracks,
        max_bars=args.max_bars,
    )
    print(f"wrote {len(paths)} files to {args.directory}")


if __name__ == "__main__":
    main()
