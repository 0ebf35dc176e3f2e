#!/usr/bin/env python3
# Copyright 2026 The qsnn Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Copies the first N samples of an MNIST-layout IDX directory.

data/mnist was produced from the mnist-data npm package:

    npm pack mnist-data && tar xzf mnist-data-*.tgz
    tools/subset_idx.py package/data data/mnist --train 5000 --test 2000
"""

import argparse
import pathlib
import struct

FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def copy_head(src, dst, n):
    data = src.read_bytes()
    magic = struct.unpack(">I", data[:4])[0]
    ndim = magic & 0xFF
    dims = list(struct.unpack(">" + "I" * ndim, data[4:4 + 4 * ndim]))
    if n > dims[0]:
        raise SystemExit(f"{src} holds only {dims[0]} samples")
    per_sample = 1
    for d in dims[1:]:
        per_sample *= d
    header_len = 4 + 4 * ndim
    dims[0] = n
    header = struct.pack(">I", magic) + struct.pack(">" + "I" * ndim, *dims)
    dst.write_bytes(header + data[header_len:header_len + n * per_sample])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("src", type=pathlib.Path)
    parser.add_argument("dst", type=pathlib.Path)
    parser.add_argument("--train", type=int, default=5000)
    parser.add_argument("--test", type=int, default=2000)
    args = parser.parse_args()
    args.dst.mkdir(parents=True, exist_ok=True)
    for split, n in (("train", args.train), ("test", args.test)):
        for name in FILES[split]:
            copy_head(args.src / name, args.dst / name, n)
    print(f"wrote {args.train} train / {args.test} test samples to {args.dst}")


if __name__ == "__main__":
    main()
