#!/usr/bin/env python3
"""Lift a popular three-point difference from Z/pZ back to an integer box.

Draws a random subset of [N], embeds it modulo the next prime in the
(N, (1+eps)N) window, searches Bohr-set differences, and prints the audited
lifted triples for the best difference.
"""

import argparse
import json

import numpy as np

from popdiff.threept import lift_to_interval


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=40)
    ap.add_argument("--density", type=float, default=0.55)
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--M1", type=int, default=1)
    ap.add_argument("--M2", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    A = [int(x) + 1 for x in np.nonzero(rng.random(args.N) < args.density)[0]]
    rep = lift_to_interval(A, args.N, args.M1, args.M2, args.eps)
    print(json.dumps(rep, indent=2))
    print(f"\n|A| = {len(A)}, best d = {rep['best_d']}, {rep['best_count']} lifted triples, "
          f"audit {rep['audit_pass']}/{rep['audit_total']}")


if __name__ == "__main__":
    main()
