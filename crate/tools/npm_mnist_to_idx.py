#!/usr/bin/env python3
"""Convert the digits bundled with the npm `mnist` package (v1.1.0) into
gzipped IDX files laid out like the canonical MNIST distribution.

The npm package stores 10000 MNIST digits grouped by class as floats rounded
to three decimals. Pixel bytes are recovered with round(v * 255), which is
exact because the byte step (1/255) is wider than the rounding step (0.001).

Usage: npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
       python3 tools/npm_mnist_to_idx.py package/src/digits data/mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

N_TEST = 2000
SEED = 20240517


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    samples = []
    for label in range(10):
        raw = json.loads((src / f"{label}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        for k in range(len(raw) // 784):
            px = bytes(int(round(v * 255)) for v in raw[k * 784:(k + 1) * 784])
            samples.append((px, label))
    random.Random(SEED).shuffle(samples)
    splits = {"t10k": samples[:N_TEST], "train": samples[N_TEST:]}
    for name, part in splits.items():
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x803, [len(part), 28, 28],
                  b"".join(p for p, _ in part))
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x801, [len(part)],
                  bytes(l for _, l in part))
        print(name, len(part))


if __name__ == "__main__":
    main(*sys.argv[1:3])
