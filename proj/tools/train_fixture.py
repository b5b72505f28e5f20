#!/usr/bin/env python3
"""Train the small 4-class fixture network used by the end-to-end sweep test.

Data comes from `gridcert synth`, so the training images are exactly the ones
the C++ side generates. Training adds a random brightness offset to every
image; the resulting network tolerates brightness shifts much better than
per-pixel noise.

    gridcert synth --out /tmp/train --count 2000 --side 8 --seed 7
    python3 tools/train_fixture.py --data /tmp/train --out tests/data/fixture_net.json
"""

import argparse
import json
import os

import numpy as np


def load_dataset(directory):
    with open(os.path.join(directory, "manifest.json")) as f:
        manifest = json.load(f)
    xs, ys = [], []
    for entry in manifest["images"]:
        with open(os.path.join(directory, entry["path"])) as f:
            values = [float(v) for line in f for v in line.strip().split(",") if v]
        xs.append(values)
        ys.append(int(entry["label"]))
    return np.array(xs), np.array(ys)


def shortest(x):
    return repr(float(x))


def forward(params, x):
    acts = [x]
    h = x
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = np.maximum(z, 0.0) if i + 1 < len(params) else z
        acts.append(h)
    return acts


def softmax_grad(logits, y):
    logits = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(len(y)), y] -= 1.0
    return p


def input_gradient(params, x, y):
    acts = forward(params, x)
    grad = softmax_grad(acts[-1], y)
    for i in range(len(params) - 1, -1, -1):
        grad = grad @ params[i][0]
        if i > 0:
            grad = grad * (acts[i] > 0)
    return grad


def train(x, y, hidden, classes, args):
    rng = np.random.default_rng(args.seed)
    sizes = [x.shape[1]] + hidden + [classes]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        params.append([w, np.zeros(fan_out)])
    moments = [[np.zeros_like(p) for p in layer] for layer in params]
    squares = [[np.zeros_like(p) for p in layer] for layer in params]
    step = 0
    n = x.shape[0]
    for epoch in range(args.epochs):
        order = rng.permutation(n)
        for start in range(0, n, args.batch):
            idx = order[start:start + args.batch]
            xb = x[idx]
            # brightness augmentation, plus a little pixel noise
            xb = xb + rng.uniform(-args.brightness, args.brightness, size=(len(idx), 1))
            xb = xb + rng.uniform(-args.noise, args.noise, size=xb.shape)
            yb = y[idx]
            if args.adversarial > 0:
                # one signed-gradient step per image, radius drawn per image
                radius = rng.uniform(0.0, args.adversarial, size=(len(idx), 1))
                xb = xb + radius * np.sign(input_gradient(params, xb, yb))
            acts = forward(params, xb)
            grad = softmax_grad(acts[-1], yb) / len(idx)
            step += 1
            for i in range(len(params) - 1, -1, -1):
                w, b = params[i]
                gw = grad.T @ acts[i] + args.decay * w
                gb = grad.sum(axis=0)
                if i > 0:
                    grad = (grad @ w) * (acts[i] > 0)
                for k, g in enumerate((gw, gb)):
                    moments[i][k] = 0.9 * moments[i][k] + 0.1 * g
                    squares[i][k] = 0.999 * squares[i][k] + 0.001 * g * g
                    mhat = moments[i][k] / (1 - 0.9 ** step)
                    vhat = squares[i][k] / (1 - 0.999 ** step)
                    params[i][k] -= args.lr * mhat / (np.sqrt(vhat) + 1e-8)
    return params


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--hidden", default="12,8")
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--decay", type=float, default=1e-4)
    ap.add_argument("--brightness", type=float, default=0.5)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--adversarial", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--held-out", default="")
    args = ap.parse_args()

    x, y = load_dataset(args.data)
    classes = int(y.max()) + 1
    hidden = [int(h) for h in args.hidden.split(",") if h]
    params = train(x, y, hidden, classes, args)
    acc = (forward(params, x)[-1].argmax(axis=1) == y).mean()
    print(f"training accuracy {acc:.4f}")
    if args.held_out:
        hx, hy = load_dataset(args.held_out)
        print(f"held-out accuracy {(forward(params, hx)[-1].argmax(axis=1) == hy).mean():.4f}")

    layers = []
    for i, (w, b) in enumerate(params):
        layers.append({
            "weights": [[shortest(v) for v in row] for row in w],
            "biases": [shortest(v) for v in b],
            "activation": "relu" if i + 1 < len(params) else "identity",
        })
    doc = {"input_dim": x.shape[1], "layers": layers, "class_labels": [f"class{c}" for c in range(classes)]}
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
