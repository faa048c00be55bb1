"""Hoeffding and CLT bounds evaluated in 50-digit arithmetic.

Writes tests/data/closed_forms.csv. Each row gives a sample by its summary
inputs plus the bound value, so the C++ side rebuilds the same sample.
Regenerate with `python3 tests/oracles/closed_forms.py`.
"""

import csv
import pathlib

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def hoeffding(values, a, b, delta):
    n = len(values)
    mean = mp.fsum(mp.mpf(v) for v in values) / n
    return mean + (mp.mpf(b) - mp.mpf(a)) * mp.sqrt(mp.log(1 / mp.mpf(delta)) / (2 * n))


def clt(values, delta):
    n = len(values)
    xs = [mp.mpf(v) for v in values]
    mean = mp.fsum(xs) / n
    var = mp.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    z = mp.sqrt(2) * mp.erfinv(1 - 2 * mp.mpf(delta))
    return mean + z * mp.sqrt(var / n)


def main():
    rng = np.random.default_rng(12345)
    rows = []
    deltas = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001, 1e-6, 0.3, 0.15, 0.09]
    for kind in ("hoeffding", "clt"):
        for case in range(20):
            n = int(rng.integers(2, 400))
            a, b = [(0.0, 1.0), (-1.0, 2.0), (2.0, 5.0), (-0.5, 0.5)][case % 4]
            if case % 5 == 0:
                values = list((rng.uniform(size=n) < rng.uniform()).astype(float) * (b - a) + a)
            else:
                values = list(rng.uniform(a, b, n))
            delta = deltas[case % len(deltas)]
            value = hoeffding(values, a, b, delta) if kind == "hoeffding" else clt(values, delta)
            rows.append([kind, f"{kind}_{case}", repr(a), repr(b), repr(delta), mp.nstr(value, 20),
                         ";".join(repr(float(v)) for v in values)])
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "closed_forms.csv"
    with out.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["kind", "name", "a", "b", "delta", "ucb", "values"])
        writer.writerows(rows)


if __name__ == "__main__":
    main()
