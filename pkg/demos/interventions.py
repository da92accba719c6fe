"""Redistribution vs nudging on random hypergraphs of growing density."""
import argparse

import numpy as np

from hypercoop.harness import derive_seed
from hypercoop.hypergraph import GeneratorConfig, generate
from hypercoop.optimize import InterventionConfig, apply_interventions

ap = argparse.ArgumentParser()
ap.add_argument("--reps", type=int, default=10)
ap.add_argument("--N", type=int, default=100)
ap.add_argument("--seed", type=int, default=11)
args = ap.parse_args()

cfg = InterventionConfig()
print("   k  lowered-by: redistribute  nudge  combined")
for c, k in enumerate((4, 8, 16, 32, 64)):
    hits = np.zeros(3)
    for rep in range(args.reps):
        H = generate(GeneratorConfig("ER", args.N, k, seed=derive_seed(args.seed, c, rep)))
        out = apply_interventions(H, np.full(H.N, 2.0), cfg)
        low = out.lowered()
        hits += [low["redistribution"], low["nudge"], low["combined"]]
    print(f"{k:4d}  {hits[0] / args.reps:22.2f} {hits[1] / args.reps:6.2f} {hits[2] / args.reps:9.2f}")
