#!/usr/bin/env python3
"""Builds the MNIST digit 0/7 subset in IDX format from the `mnist` npm package.

    cd /tmp && npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_mnist_fixture.py /tmp/package/src/digits data

The npm package stores each digit class as a flat JSON array of byte/255
values rounded to three decimals; round(v * 255) recovers the bytes.
"""

import json
import struct
import sys
from pathlib import Path

DIGITS = (0, 7)
SIDE = 28


def main() -> None:
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    pixels = bytearray()
    labels = bytearray()
    for d in DIGITS:
        flat = json.loads((src / f"{d}.json").read_text())["data"]
        assert len(flat) % (SIDE * SIDE) == 0
        pixels += bytes(min(255, max(0, round(v * 255))) for v in flat)
        labels += bytes([d]) * (len(flat) // (SIDE * SIDE))
    n = len(labels)
    (out / "mnist-07-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, SIDE, SIDE) + pixels)
    (out / "mnist-07-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + labels)
    print(f"wrote {n} images")


if __name__ == "__main__":
    main()
