#!/usr/bin/env python3
"""Builds the smoking-cessation fixture (log odds ratios) from arm-level counts.

Treatments: A no contact, B self-help, C individual counselling, D group counselling.
Studies with a zero cell get 0.5 added to every cell of every arm.
"""
import csv
import math
import sys
from pathlib import Path

# study: [(treatment, events, total), ...]
ARMS = [
    [("A", 9, 140), ("C", 23, 140), ("D", 10, 138)],
    [("B", 11, 78), ("C", 12, 85), ("D", 29, 170)],
    [("A", 79, 702), ("B", 77, 694)],
    [("A", 18, 671), ("B", 21, 535)],
    [("A", 8, 116), ("B", 19, 149)],
    [("A", 75, 731), ("C", 363, 714)],
    [("A", 2, 106), ("C", 9, 205)],
    [("A", 58, 549), ("C", 237, 1561)],
    [("A", 0, 33), ("C", 9, 48)],
    [("A", 3, 100), ("C", 31, 98)],
    [("A", 1, 31), ("C", 26, 95)],
    [("A", 6, 39), ("C", 17, 77)],
    [("A", 95, 1107), ("C", 134, 1031)],
    [("A", 15, 187), ("C", 35, 504)],
    [("A", 78, 584), ("C", 73, 675)],
    [("A", 69, 1177), ("C", 54, 888)],
    [("A", 64, 642), ("C", 107, 761)],
    [("A", 5, 62), ("C", 8, 90)],
    [("A", 20, 234), ("C", 34, 237)],
    [("A", 0, 20), ("D", 9, 20)],
    [("B", 20, 49), ("C", 16, 43)],
    [("B", 7, 66), ("D", 32, 127)],
    [("C", 12, 76), ("D", 20, 74)],
    [("C", 9, 55), ("D", 3, 26)],
]


def arm_stats(arms):
    corr = 0.5 if any(r == 0 or r == n for _, r, n in arms) else 0.0
    out = []
    for t, r, n in arms:
        events, failures = r + corr, n - r + corr
        out.append((t, math.log(events / failures), math.sqrt(1.0 / events + 1.0 / failures)))
    return out


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "smoking.csv", "w", newline="") as data, open(outdir / "smoking_arms.csv", "w", newline="") as armf:
        dw, aw = csv.writer(data), csv.writer(armf)
        dw.writerow(["study", "t1", "t2", "y", "se"])
        aw.writerow(["study", "treatment", "se_arm"])
        for k, arms in enumerate(ARMS, start=1):
            sid = f"S{k:02d}"
            stats = arm_stats(arms)
            base_t, base_logit, base_se = stats[0]
            for t, logit, se in stats[1:]:
                dw.writerow([sid, base_t, t, f"{logit - base_logit:.17g}", f"{math.hypot(base_se, se):.17g}"])
            if len(arms) > 2:
                for t, _, se in stats:
                    aw.writerow([sid, t, f"{se:.17g}"])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
