"""Writes a synthetic 100-row LIBSVM file shaped like a9a.

a9a encodes 14 categorical/binned attributes as one-hot groups over feature
indices 1..123; every row has one active index per group with value 1. Labels
are +1/-1. This generator draws one index per group and a label from a fixed
logistic model, so the file is deterministic and exercises the same layout.
"""
import random
import math
import sys

GROUPS = [(1, 5), (6, 13), (14, 18), (19, 34), (35, 39), (40, 46), (47, 60),
          (61, 66), (67, 71), (72, 73), (74, 75), (76, 77), (78, 82), (83, 123)]


def main(path, rows=100, seed=20240101):
    rng = random.Random(seed)
    weights = {i: rng.gauss(0.0, 1.0) for i in range(1, 124)}
    with open(path, "w") as out:
        for _ in range(rows):
            active = [rng.randint(lo, hi) for lo, hi in GROUPS]
            score = sum(weights[i] for i in active) - 1.0
            label = "+1" if rng.random() < 1.0 / (1.0 + math.exp(-score)) else "-1"
            out.write(label + " " + " ".join(f"{i}:1" for i in active) + " \n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/a9a_format_sample.libsvm")
