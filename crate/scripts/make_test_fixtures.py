#!/usr/bin/env python3
"""Writes the small IDX fixtures used by the core integration tests.

tiny-*: three 4x5 images with known pixel values (value = 10*i + r*5 + c).
mnist10-*: the first ten images of the digit 0/7 subset.
"""

import struct
from pathlib import Path

root = Path(__file__).resolve().parent.parent
fx = root / "crates/core/tests/fixtures"
fx.mkdir(parents=True, exist_ok=True)

n, rows, cols = 3, 4, 5
pix = bytes((10 * i + r * cols + c) % 256 for i in range(n) for r in range(rows) for c in range(cols))
(fx / "tiny-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, rows, cols) + pix)
(fx / "tiny-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + bytes([3, 1, 4]))

img = (root / "data/mnist-07-images-idx3-ubyte").read_bytes()
lab = (root / "data/mnist-07-labels-idx1-ubyte").read_bytes()
k = 10
(fx / "mnist10-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, k, 28, 28) + img[16 : 16 + k * 784])
(fx / "mnist10-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, k) + lab[8 : 8 + k])
