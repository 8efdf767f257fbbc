#!/usr/bin/env python3
"""Pack the scikit-learn handwritten digits set into IDX files.

Produces a 10-class train/test pair under data/digits/ in the same container
format as the classic MNIST distribution (big-endian IDX, unsigned bytes).
The split is deterministic: samples are ordered by (label, original index)
and alternate between train and test within each class.

Pixel values in the source set range over 0..16; they are rescaled to 0..255
so that downstream loaders can use the usual 1/255 scaling.
"""

import os
import struct

from sklearn.datasets import load_digits

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "digits")


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 8, 8))
        for img in images:
            f.write(bytes(int(round(p * 255.0 / 16.0)) for p in img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(int(l) for l in labels))


def main():
    data = load_digits()
    order = sorted(range(len(data.target)), key=lambda i: (data.target[i], i))

    train_idx, test_idx = [], []
    seen_per_class = {}
    for i in order:
        label = int(data.target[i])
        pos = seen_per_class.get(label, 0)
        seen_per_class[label] = pos + 1
        (train_idx if pos % 2 == 0 else test_idx).append(i)

    os.makedirs(OUT_DIR, exist_ok=True)
    write_images(os.path.join(OUT_DIR, "train-images-idx3-ubyte"), data.data[train_idx])
    write_labels(os.path.join(OUT_DIR, "train-labels-idx1-ubyte"), data.target[train_idx])
    write_images(os.path.join(OUT_DIR, "test-images-idx3-ubyte"), data.data[test_idx])
    write_labels(os.path.join(OUT_DIR, "test-labels-idx1-ubyte"), data.target[test_idx])

    print(f"train: {len(train_idx)}  test: {len(test_idx)}  -> {os.path.abspath(OUT_DIR)}")


if __name__ == "__main__":
    main()
