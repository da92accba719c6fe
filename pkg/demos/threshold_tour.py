"""Walk through thresholds on a few small hypergraphs.

    python3 demos/threshold_tour.py
"""
import numpy as np

from hypercoop.game import delta_star, equal_contributions, equal_endowments, node_thresholds
from hypercoop.hypergraph import GeneratorConfig, chain6, fully_connected, generate, ring6, two_edge
from hypercoop.optimize import optimize_contributions, optimize_endowments


def show(name, H, r=2.0):
    e = equal_endowments(H.N)
    r = np.full(H.N, r)
    x = equal_contributions(H)
    d = node_thresholds(H, e, r, x)
    print(f"{name:>10}  N={H.N:3d} M={H.M:3d}  delta*={delta_star(H, e, r, x):.4f}  "
          f"per-node min/max {d.min():.3f}/{d.max():.3f}")


for N in range(3, 7):
    show(f"K{N}", fully_connected(N))
show("two-edge", two_edge())
show("ring6", ring6())
show("chain6", chain6())
show("ER k=8", generate(GeneratorConfig("ER", 100, 8, seed=5)))

# the two levers: who holds the resources, and where players put them
H = two_edge()
r = np.full(4, 1.38)
res = optimize_endowments(H, r, equal_contributions(H))
print("\ntwo-edge, r=1.38")
print("  equal endowments      delta* =", round(res.delta_star_baseline, 4))
print("  optimized endowments  delta* =", round(res.delta_star_opt, 4), np.round(res.witness, 3))

H = chain6()
res = optimize_contributions(H, np.full(6, 2.0), equal_endowments(6))
print("chain6, r=2")
print("  equal contributions   delta* =", round(res.delta_star_baseline, 4))
print("  optimized             delta* =", round(res.delta_star_opt, 4))
