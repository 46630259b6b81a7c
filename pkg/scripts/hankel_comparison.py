"""Structured versus regular Hankel singular values of the mass-spring model."""
import argparse
from pathlib import Path

import numpy as np

from netmor.errors import DegenerateGramian
from netmor.massspring import demo_system
from netmor.network import assemble_network
from netmor.reduction import balance, compute_gramians, hankel_comparison, suggest_orders
from netmor.report import Report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, nargs="+", default=[10.0])
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    rep = Report("hankel_comparison", {"k": args.k})
    for k in args.k:
        plant, edges = demo_system(k)
        net = assemble_network(edges, plant)
        structured, regular = hankel_comparison(plant, net)
        try:
            r = list(suggest_orders(balance(plant, compute_gramians(plant, net))))
        except DegenerateGramian:
            # a numerically singular block cannot be balanced at full order
            r = None
        rep.meta[f"suggested_orders_k{k:g}"] = r
        series = [x for pair in zip(structured, regular) for x in pair]
        cols = ["i"] + [f"{kind}_{j}" for j in range(1, plant.q + 1) for kind in ("structured", "regular")]
        depth = max(len(s) for s in series)
        rows = [[i + 1] + [s[i] if i < len(s) else None for s in series] for i in range(depth)]
        rep.add(f"k={k:g}", cols, rows)
        # ratio of the two spectra shows how much the interconnection reweights each state
        ratio = [float(np.max(s / np.maximum(g, 1e-300))) for s, g in zip(structured, regular)]
        rep.meta[f"max_ratio_k{k:g}"] = [f"{x:.4g}" for x in ratio]
    text = rep.render()
    print(text, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "hankel_comparison.tsv").write_text(text)


if __name__ == "__main__":
    main()
