"""Regenerate the synthetic CSV fixtures shipped in hypercoop/data.

They only mimic the shape of the real tables (co-authorship with author
order, funding totals, river allocations with GDP attributes). Values are
made up.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "hypercoop" / "data"


def write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def coauthorship(rng):
    seniors = [f"S{i:02d}" for i in range(12)]
    juniors = [f"J{i:03d}" for i in range(220)]
    focal = seniors[:3]
    papers = []
    # focal authors: papers with juniors put the focal author earlier
    for f in focal:
        for _ in range(70):
            size = int(rng.integers(3, 6))
            with_seniors = rng.random() < 0.4
            pool = seniors if with_seniors else juniors
            others = list(rng.choice([p for p in pool if p != f], size - 1, replace=False))
            pos = int(rng.integers(1, 3) if not with_seniors else rng.integers(2, size + 1))
            papers.append((others[:pos - 1] + [f] + others[pos - 1:], f if rng.random() < 0.3 else None))
    # background papers give seniors their high hyperdegree
    for _ in range(180):
        size = int(rng.integers(3, 6))
        n_sen = int(rng.integers(1, 3))
        auth = list(rng.choice(seniors[3:], n_sen, replace=False)) + \
            list(rng.choice(juniors, size - n_sen, replace=False))
        rng.shuffle(auth)
        papers.append((auth, auth[-1] if rng.random() < 0.5 else None))
    rows = []
    for pid, (auth, corr) in enumerate(papers):
        for pos, a in enumerate(auth, 1):
            rows.append((a, f"P{pid:04d}", pos, int(a == corr)))
    write(OUT / "coauthor_memberships.csv", ["actor", "hyperedge", "position", "corresponding"], rows)

    deg = {}
    for a, *_ in rows:
        deg[a] = deg.get(a, 0) + 1
    chosen = sorted(deg, key=lambda a: (-deg[a], a))[:10] + \
        sorted(rng.choice(sorted(a for a in deg if a.startswith("J")), 20, replace=False))
    fund = [(a, round(0.02 * deg[a] + rng.normal(0, 0.4) + 1.0, 4)) for a in sorted(chosen)]
    write(OUT / "coauthor_funding.csv", ["actor", "total"], [(a, max(t, 0.05)) for a, t in fund])


def rivers(rng):
    countries = [f"C{i:02d}" for i in range(40)]
    classes = rng.choice(["low", "middle", "high"], len(countries), p=[0.3, 0.45, 0.25])
    gdp = rng.lognormal(5, 1.2, len(countries)).round(2)
    aid = np.where(classes == "low", rng.uniform(0, 2, len(countries)), 0).round(3)
    gov = rng.normal(0, 1, len(countries)).round(3)
    write(OUT / "water_attributes.csv", ["actor", "income_class", "gdp", "assistance", "productivity"],
          zip(countries, classes, gdp, aid, gov))
    w = np.linspace(3, 0.3, len(countries))
    basins = []
    for _ in range(45):
        size = int(rng.choice([2, 3, 3, 3, 4]))
        basins.append(rng.choice(len(countries), size, replace=False, p=w / w.sum()))
    member = {c: [] for c in range(len(countries))}
    for b, mem in enumerate(basins):
        for c in mem:
            member[c].append(b)
    rows = []
    for c, bs in member.items():
        if not bs:
            continue
        total = round(float({"low": 0.003, "middle": 0.01, "high": 0.005}[classes[c]] * gdp[c] + aid[c]), 6)
        # small shared basins get a larger share of discharge weight
        dis = np.array([rng.lognormal(0, 0.5) / len(basins[b]) ** 1.5 for b in bs])
        for b, d in zip(bs, dis / dis.sum()):
            rows.append((countries[c], total, f"R{b:02d}", np.floor(total * d * 1e6) / 1e6))
    write(OUT / "water_allocations.csv", ["actor", "total", "hyperedge", "allocation"], rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    OUT.mkdir(parents=True, exist_ok=True)
    coauthorship(rng)
    rivers(rng)
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
