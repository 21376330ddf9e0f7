#!/usr/bin/env python3
"""Writes the example model manifests under models/.

Parameters are not stored: each manifest carries an init seed and the
loader draws weights deterministically from it.
"""
import argparse
import json
import pathlib


class Builder:
    def __init__(self, name, seed, note):
        self.name = name
        self.seed = seed
        self.note = note
        self.layers = []
        self.c = 3
        self.hw = 32
        self.n_conv = 0
        self.params = 0

    def conv(self, c_out, k=3, s=1, bn=True, relu=True):
        pad = k // 2
        cid = f"conv{self.n_conv}"
        self.layers.append({"id": cid, "kind": "conv2d", "k": k, "s": s, "pad": pad,
                            "c_in": self.c, "c_out": c_out, "bias": not bn})
        self.params += c_out * self.c * k * k + (0 if bn else c_out)
        if bn:
            self.layers.append({"id": f"bn{self.n_conv}", "kind": "batchnorm", "channels": c_out, "eps": 1e-5})
            self.params += 4 * c_out
        if relu:
            self.layers.append({"id": f"relu{self.n_conv}", "kind": "relu"})
        self.n_conv += 1
        self.hw = (self.hw + 2 * pad - k) // s + 1
        self.c = c_out
        return self

    def maxpool(self, k=2):
        self.layers.append({"id": f"pool{len(self.layers)}", "kind": "maxpool", "k": k, "s": k})
        self.hw //= k
        return self

    def head(self, classes=10):
        self.layers.append({"id": "gap", "kind": "globalavgpool"})
        self.layers.append({"id": "fc", "kind": "dense", "in": self.c, "out": classes})
        self.params += self.c * classes + classes
        return self

    def manifest(self):
        return {
            "format": "vdpu-model",
            "format_version": 1,
            "name": self.name,
            "note": self.note,
            "input_shape": [1, 3, 32, 32],
            "init": {"seed": self.seed, "scheme": "he-uniform"},
            "conv_layers": self.n_conv,
            "param_count": self.params,
            "layers": self.layers,
        }


def tiny():
    b = Builder("tiny8", 42, "8-layer test model used by the golden files")
    b.layers = [
        {"id": "conv0", "kind": "conv2d", "k": 3, "s": 1, "pad": 1, "c_in": 3, "c_out": 8},
        {"id": "bn0", "kind": "batchnorm", "channels": 8, "eps": 1e-5},
        {"id": "relu0", "kind": "relu"},
        {"id": "pool0", "kind": "maxpool", "k": 2, "s": 2},
        {"id": "conv1", "kind": "conv2d", "k": 3, "s": 1, "pad": 1, "c_in": 8, "c_out": 16},
        {"id": "relu1", "kind": "relu"},
        {"id": "gap", "kind": "globalavgpool"},
        {"id": "fc", "kind": "dense", "in": 16, "out": 10},
    ]
    b.n_conv = 2
    b.c, b.hw = 10, 1
    b.params = (8 * 3 * 9 + 8) + 4 * 8 + (16 * 8 * 9 + 16) + (16 * 10 + 10)
    return b


def backbone():
    # 35 convs, K in {3,5}, S in {1,2}, widths 24/40/80
    b = Builder("backbone35", 7, "35-conv feature extractor profile (widths 24/40/80)")
    b.conv(24, k=3)                       # 32x32
    for i in range(28):
        b.conv(24, k=5 if i in (9, 19) else 3)
    b.conv(40, k=5, s=2)                  # 16x16
    for _ in range(3):
        b.conv(40, k=3)
    b.conv(80, k=3, s=2)                  # 8x8
    b.conv(80, k=3)
    return b.head()


def net():
    # 52 convs, K in {1,3,5}, S in {1,2}, final width 1280
    b = Builder("net52", 11, "52-conv classifier profile ending in a 1280-wide 1x1 conv")
    b.conv(32, k=3, s=2)                  # 16x16
    stages = [(16, 3, 1, 8), (24, 3, 2, 10), (40, 5, 2, 10), (80, 3, 1, 8), (120, 5, 1, 8), (192, 3, 1, 6)]
    for c, k, s, reps in stages:
        for i in range(reps):
            if i % 2 == 0:
                b.conv(c, k=k, s=s if i == 0 else 1)
            else:
                b.conv(c, k=1)
    b.conv(1280, k=1)
    return b.head()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "models"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for b in (tiny(), backbone(), net()):
        path = out / f"{b.name}.json"
        path.write_text(json.dumps(b.manifest(), indent=1) + "\n")
        print(f"{path.name}: {b.n_conv} conv, {b.params} params, output {b.c}x{b.hw}x{b.hw}")


if __name__ == "__main__":
    main()
