#!/usr/bin/env python3
"""Write a shuffled MNIST subset as IDX files.

Source: the 5000-digit MNIST CSV bundled with mlxtend (mnist_5k.csv.gz),
784 pixel columns then the class label, sorted by class.
"""
import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def default_source():
    import importlib.util

    spec = importlib.util.find_spec("mlxtend")
    if spec is None:
        raise SystemExit("mlxtend not installed; pass --src")
    return Path(spec.origin).parent / "data" / "data" / "mnist_5k.csv.gz"


def write_idx(path, magic, array):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(array.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--src", type=Path, default=None)
    ap.add_argument("--count", type=int, default=1100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out-prefix", type=Path, default=Path("tests/data/mnist1100"))
    args = ap.parse_args()

    src = args.src or default_source()
    with gzip.open(src, "rt") as f:
        table = np.loadtxt(f, delimiter=",")
    order = np.random.default_rng(args.seed).permutation(len(table))[: args.count]
    images = table[order, :-1].reshape(-1, 28, 28)
    labels = table[order, -1]
    write_idx(f"{args.out_prefix}-images-idx3-ubyte", 0x00000803, images)
    write_idx(f"{args.out_prefix}-labels-idx1-ubyte", 0x00000801, labels)


if __name__ == "__main__":
    main()
