#!/usr/bin/env python3
"""Stage-1 budget sweep on a synthetic pool: decentralized vs oracle utility.

Writes one CSV per fairness constraint (demographic parity and equal
opportunity) with the stage-2 budget pinned at 0.3 and the stage-1 budget
swept from 0.3 to 1.0, the axes of the utility-comparison figures.
"""

import csv
import sys

import numpy as np

from fairselect import df2

N = 2000
ALPHA2 = 0.3
SEED = 606

if __name__ == "__main__":
    rng = np.random.default_rng(np.random.SeedSequence(SEED))
    r1, r2, _ = df2.ScoreDistribution(kind="jittered", spread=0.04).sample(rng, N)
    groups = np.array([0, 1] * (N // 2))

    for fairness in (df2.DEMOGRAPHIC_PARITY, df2.EQUAL_OPPORTUNITY):
        path = f"utility_sweep_{fairness.replace('-', '_')}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha1", "df2_utility", "oracle_utility", "difference"])
            for k in range(15):
                alpha1 = round(0.3 + 0.05 * k, 2)
                plans = [df2.StagePlan(alpha1, fairness), df2.StagePlan(ALPHA2, fairness)]
                result = df2.run_stages([r1, r2], groups, plans, seed=1)
                oracle = df2.oracle_joint(r1, r2, groups, plans, mode="threshold")
                writer.writerow(
                    [
                        alpha1,
                        round(result.precision, 6),
                        round(oracle.utility, 6),
                        round(oracle.utility - result.precision, 6),
                    ]
                )
        print(f"wrote {path}", file=sys.stderr)
