"""Train both neural variants on the copy task and print an attention map.

Takes about two minutes. Run: python demos/attention_copy_task.py
"""

import numpy as np

from mtlab import neural


def copy_pairs(n, seed):
    rng = np.random.default_rng(seed)
    return [(s, s) for s in (rng.integers(3, 15, size=rng.integers(1, 9)).tolist() for _ in range(n))]


def accuracy(params, variant, pairs):
    hit = total = 0
    for src, tgt in pairs:
        out, _ = neural.translate_greedy(params, src, variant, max_out_len=20)
        hit += sum(1 for a, b in zip(out, tgt) if a == b)
        total += len(tgt)
    return hit / total


def main():
    train, test = copy_pairs(500, 1), copy_pairs(200, 2)
    dims = neural.Dims(15, 15, 16, 32, 32)
    models = {}
    for variant in neural.VARIANTS:
        params, losses = neural.train(train, neural.TrainConfig(variant=variant), dims)
        models[variant] = params
        print(f"{variant:<6} final loss {np.mean(losses[-100:]):.4f}  "
              f"token accuracy {accuracy(params, variant, test):.3f}")

    src = [7, 3, 11, 5, 9, 4]
    out, trace = neural.translate_greedy(models["SEARCH"], src, "SEARCH", 20)
    print(f"\nSEARCH attention for {src} -> {out} (rows: output steps)")
    for step, alpha in enumerate(trace.weights):
        print(f"  {step:2d} " + " ".join(f"{a:4.2f}" for a in alpha))


if __name__ == "__main__":
    main()
