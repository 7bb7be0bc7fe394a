"""Write OU sample paths to CSV and print the lag correlations.

    python scripts/ou_paths.py out.csv [--paths 10000] [--tmax 2] [--step 0.5] [--seed 424242]
"""

import argparse

import numpy as np

from ergomix.modelspace import ou_process_sample, write_ou_csv
from ergomix.rng import derive_rng, stream_id


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--tmax", type=float, default=2.0)
    ap.add_argument("--step", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=424242)
    a = ap.parse_args()
    grid = np.arange(0.0, a.tmax + a.step / 2, a.step)
    paths = ou_process_sample(grid, a.paths, derive_rng(a.seed, stream_id("ou")))
    write_ou_csv(a.csv, grid, paths)
    for k, t in enumerate(grid):
        print(f"h={t:<5g} corr={np.corrcoef(paths[:, 0], paths[:, k])[0, 1]:.4f} exp(-h)={np.exp(-t):.4f}")


if __name__ == "__main__":
    main()
