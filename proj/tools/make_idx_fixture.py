#!/usr/bin/env python3
"""Write a tiny hand-built 2-image IDX fixture (plus labels) for parser tests.

Image 0: a 10x6 block of value 200 at rows 9..18, cols 11..16; pixel (0,0)=127,
pixel (0,1)=128. Image 1: the pixel value equals (row*28 + col) % 256.
"""
import struct
import sys
from pathlib import Path


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
    img0 = bytearray(28 * 28)
    for r in range(9, 19):
        for c in range(11, 17):
            img0[r * 28 + c] = 200
    img0[0] = 127
    img0[1] = 128
    img1 = bytearray((i % 256) for i in range(28 * 28))
    with open(out / "tiny2-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, 2, 28, 28))
        f.write(img0)
        f.write(img1)
    with open(out / "tiny2-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, 2))
        f.write(bytes([3, 9]))


if __name__ == "__main__":
    main()
