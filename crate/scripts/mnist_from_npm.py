#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package to IDX files.

The package (https://www.npmjs.com/package/mnist, v1.1.0) ships 10,000
28x28 digits as JSON arrays of intensities in [0, 1], rounded to three
decimals. They are written back as bytes, round(v * 255), in the four IDX
files the CLI expects. The split is per digit: the first 80% of each
digit's images go to the training file, the rest to the test file; both
files are then shuffled with a fixed seed.

    npm pack mnist@1.1.0
    python3 scripts/mnist_from_npm.py mnist-1.1.0.tgz /root/data/mnist
    export NOISYSGD_DATA_DIR=/root/data/mnist
"""

import argparse
import json
import random
import struct
import tarfile
from pathlib import Path

SIDE = 28


def load_digits(source: Path) -> dict[int, list[list[float]]]:
    digits = {}
    if source.is_file():
        with tarfile.open(source) as tar:
            for d in range(10):
                f = tar.extractfile(f"package/src/digits/{d}.json")
                digits[d] = json.load(f)["data"]
    else:
        for d in range(10):
            digits[d] = json.loads((source / "src" / "digits" / f"{d}.json").read_text())["data"]
    out = {}
    for d, flat in digits.items():
        n = len(flat) // (SIDE * SIDE)
        out[d] = [flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE] for i in range(n)]
    return out


def write_idx(prefix: Path, images: list[list[float]], labels: list[int]) -> None:
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path, help="npm tarball or extracted package directory")
    ap.add_argument("out", type=Path, help="output directory")
    ap.add_argument("--train-fraction", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    digits = load_digits(args.source)
    train, test = [], []
    for d in range(10):
        cut = round(len(digits[d]) * args.train_fraction)
        train += [(img, d) for img in digits[d][:cut]]
        test += [(img, d) for img in digits[d][cut:]]
    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, rows in [("train", train), ("t10k", test)]:
        write_idx(args.out / name, [r[0] for r in rows], [r[1] for r in rows])
        print(f"{name}: {len(rows)} images")


if __name__ == "__main__":
    main()
