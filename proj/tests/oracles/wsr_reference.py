"""Straight-line transcription of the generalized WSR listing.

Writes tests/data/wsr_reference.csv: one pinned sample per row with the
reference UCB. Regenerate with `python3 tests/oracles/wsr_reference.py`.
"""

import csv
import math
import pathlib

import numpy as np


def wsr_reference(w, a, b, delta):
    n = len(w)
    mu = []
    sigma2 = [0.25]  # sigma2[0] is the prior term
    nu = []
    for i in range(1, n + 1):
        mu_i = (0.5 + sum(w[:i])) / (1 + i)
        mu.append(mu_i)
        s_i = (0.25 + sum((w[j] - mu[j]) ** 2 for j in range(i))) / (1 + i)
        sigma2.append(s_i)
        nu.append(min(1.0 / (b - a), math.sqrt(2.0 * math.log(1.0 / delta) / (n * sigma2[i - 1]))))

    def max_k(r):
        best = -math.inf
        k = 1.0
        for j in range(n):
            k *= 1.0 - nu[j] * (w[j] - r)
            best = max(best, k)
        return best

    def rejected(r):
        return max_k(r) > 1.0 / delta

    if not rejected(b):
        return b
    lo, hi = a, b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rejected(mid):
            hi = mid
        else:
            lo = mid
    return hi


def pinned_samples():
    rng = np.random.default_rng(0)
    yield "uniform_50_seed0", 0.0, 1.0, 0.1, list(rng.uniform(0.0, 1.0, 50))
    rng = np.random.default_rng(1)
    yield "bernoulli_0.3_130", 0.0, 1.0, 0.1, [float(x) for x in (rng.uniform(size=130) < 0.3)]
    rng = np.random.default_rng(2)
    yield "bernoulli_0.1_50", 0.0, 1.0, 0.05, [float(x) for x in (rng.uniform(size=50) < 0.1)]
    yield "zeros_20", 0.0, 1.0, 0.1, [0.0] * 20
    yield "ones_20", 0.0, 1.0, 0.1, [1.0] * 20
    rng = np.random.default_rng(3)
    # Block variables W = blockmean(L~) + L - L~ with lambda = 1, on [-1, 2].
    lab = (rng.uniform(size=100) < 0.2).astype(float)
    imp = np.where(rng.uniform(size=100) < 0.8, lab, 1.0 - lab)
    blocks = (rng.uniform(size=(100, 40)) < 0.25).mean(axis=1)
    yield "blocks_lambda1_100", -1.0, 2.0, 0.1, list(blocks + lab - imp)
    rng = np.random.default_rng(4)
    yield "uniform_1000", 0.0, 1.0, 0.01, list(rng.uniform(0.0, 1.0, 1000))
    rng = np.random.default_rng(5)
    yield "beta_2_5_200", 0.0, 1.0, 0.1, list(rng.beta(2.0, 5.0, 200))
    rng = np.random.default_rng(6)
    yield "uniform_2_5_60", 2.0, 5.0, 0.2, list(rng.uniform(2.0, 5.0, 60))
    rng = np.random.default_rng(7)
    yield "shifted_30", -1.0, 2.0, 0.001, list(rng.uniform(-1.0, 2.0, 30))


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "wsr_reference.csv"
    with out.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", "a", "b", "delta", "ucb", "values"])
        for name, a, b, delta, values in pinned_samples():
            values = [float(v) for v in values]
            ucb = wsr_reference(values, a, b, delta)
            writer.writerow([name, repr(a), repr(b), repr(delta), repr(ucb), ";".join(repr(v) for v in values)])


if __name__ == "__main__":
    main()
