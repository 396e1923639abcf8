"""Writes the frozen covariate design used by the censored regression scenario."""

import random
import statistics
import sys

ROWS, COLS, SEED = 753, 4, 1987


def main(path: str) -> None:
    rng = random.Random(SEED)
    cols = [[rng.gauss(0.0, 1.0) for _ in range(ROWS)] for _ in range(COLS)]
    std = []
    for c in cols:
        m, s = statistics.fmean(c), statistics.pstdev(c)
        std.append([(v - m) / s for v in c])
    with open(path, "w", newline="\n") as f:
        f.write(",".join(f"x{j + 1}" for j in range(COLS)) + "\n")
        for i in range(ROWS):
            f.write(",".join(f"{std[j][i]:.6f}" for j in range(COLS)) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/student_t_design.csv")
