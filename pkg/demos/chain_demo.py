"""Discounted state distribution of the pure-strategy chain on the two-edge graph."""
import numpy as np

from hypercoop.evolution import BIAS_PRESETS, EvolutionParams, biased_endowments, build_state_space, run_chain
from hypercoop.hypergraph import two_edge

H = two_edge()
S = build_state_space(H)
print("states:", S.size)
for name, fav in BIAS_PRESETS.items():
    e = biased_endowments(4, fav)
    for beta in (0.0, 1.0, 5.0):
        rep = run_chain(H, e, np.full(4, 2.0), EvolutionParams(beta=beta, eps=0.01, delta=0.9))
        print(f"{name:>6} beta={beta:3.1f}  Pi_total={rep.total_payoff:.4f}  residual={rep.residual:.1e}")
