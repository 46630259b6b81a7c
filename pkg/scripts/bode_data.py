"""Largest singular value of the full and reduced closed loops over frequency.

Writes one column per model: the full interconnection, the truncated
model at ``--orders`` and, unless ``--skip-improve``, its refined version.
"""
import argparse
from pathlib import Path

import numpy as np

from netmor import numkernels as nk
from netmor.massspring import demo_system
from netmor.network import assemble_network, close_loop
from netmor.reduction import TRUNCATION, reduce_network
from netmor.report import Report
from netmor.subgradient import DescentOptions, build_error_plant, improve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, default=10.0)
    ap.add_argument("--orders", type=int, nargs=2, default=[6, 3])
    ap.add_argument("--points", type=int, default=300)
    ap.add_argument("--max-iter", type=int, default=100)
    ap.add_argument("--skip-improve", action="store_true")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    plant, edges = demo_system(args.k)
    net = assemble_network(edges, plant)
    orders = tuple(args.orders)
    red = reduce_network(plant, net, orders, TRUNCATION)
    models = {"full": plant, "truncated": red.plant}
    meta = {"k": args.k, "orders": list(orders), "truncation_error": red.error}
    if not args.skip_improve and np.isfinite(red.error):
        out, hist = improve(build_error_plant(net, plant, orders), red,
                            DescentOptions(max_iter=args.max_iter))
        models["improved"] = out.plant
        meta["improved_error"] = out.error
        meta["descent"] = hist.reason
    w = nk.log_grid(1e-1, 1e3, args.points)
    cols, series = ["omega"], [w]
    for name, p in models.items():
        cl = close_loop(p, net)
        cols.append(f"sigma_{name}")
        series.append(nk.sigma_sweep(cl.model(), w) if cl.stable else np.full(w.size, np.inf))
    rep = Report("bode_data", meta)
    rep.add("sigma", cols, np.column_stack(series).tolist())
    text = rep.render()
    print(text, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "bode_data.tsv").write_text(text)


if __name__ == "__main__":
    main()
