#!/usr/bin/env python3
"""Sweep popular-difference searches over random sets for a chosen pattern.

Prints, per trial, the density, the best nonzero difference count relative
to alpha^4, and whether a popular difference exists at the given epsilon.
Useful for eyeballing how the spectral gate separates pattern behavior:
try --m2 '[[2]]' (scalar, spectral) against the rotated-squares pattern
--k 2 --m1 '[[1,0],[0,1]]' --m2 '[[0,-1],[1,0]]'.
"""

import argparse
import json

import numpy as np

from popdiff.analysis import popular_search
from popdiff.ffalg import FpMatrix
from popdiff.gridfn import FLOAT, GridFunction, grid_size
from popdiff.patterns import PatternSpec, check_admissible, check_spectral


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--m1", default="[[1]]")
    ap.add_argument("--m2", default="[[2]]")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = PatternSpec(args.p, args.k, FpMatrix.from_rows(json.loads(args.m1), args.p),
                       FpMatrix.from_rows(json.loads(args.m2), args.p))
    print(f"admissible={check_admissible(spec)} spectral={check_spectral(spec)}")
    rng = np.random.default_rng(args.seed)
    hits = 0
    for t in range(args.trials):
        density = float(rng.uniform(0.3, 0.6))
        vals = (rng.random(grid_size(args.p, args.k, args.n)) < density).astype(float)
        f = GridFunction(args.p, args.k, args.n, vals, FLOAT)
        rep = popular_search(f, spec, args.eps)
        hit = rep.threshold_hits >= 1
        hits += hit
        print(f"trial {t:2d}: alpha={rep.alpha:.4f} beta_max={rep.max_d:.5f} "
              f"alpha^4={rep.alpha**4:.5f} hits={rep.threshold_hits} popular={hit}")
    print(f"\n{hits}/{args.trials} trials had a popular difference at alpha^4 - {args.eps}")


if __name__ == "__main__":
    main()
