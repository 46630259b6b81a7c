"""Command-line front end: ``netmor <command> ...``.

Exit codes: 0 success (sweeps with ``inf`` cells included), 2 parse or
validation error, 3 numerical failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import modelfile
from . import numkernels as nk
from .errors import DimensionMismatch, IndexOutOfRange, NetmorError, ParseError, UnstableInit
from .gramians import GENERALIZED, STRUCTURED
from .massspring import demo_system
from .network import close_loop
from .reduction import (PERTURBATION, TRUNCATION, balance, compute_gramians, hankel_comparison,
                        reduce_network, suggest_orders, error_bound)
from .report import FORMATS, JSON_LIKE, TSV, Report, error_table
from .subgradient import DescentOptions, build_error_plant, improve

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4

# edge rows as in the toolbox listing; weights refer to the parameter k
DEMO_EDGES = {
    "iedges": [[1, 2, "-k"], [2, 2, "k"], [1, 3, "k"], [2, 3, "-k"]],
    "einedges": [[1, 1]],
    "eoutedges": [[1, 1], [2, 2]],
    "eedges": [],
}


def _diag(msg: str) -> None:
    print(f"netmor: {msg}", file=sys.stderr)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="directory for report and model files")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report header")
    p.add_argument("--format", choices=FORMATS, default=TSV, dest="fmt")
    p.add_argument("--tol", type=float, help="tolerance of the iterative solver in use")
    p.add_argument("--max-iter", type=int, help="iteration budget of the iterative solver in use")


def _reduction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=(TRUNCATION, PERTURBATION), default=TRUNCATION)
    p.add_argument("--gramians", choices=(STRUCTURED, GENERALIZED), default=STRUCTURED)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netmor",
                                     description="Structure-preserving reduction of interconnected LTI systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hankel", help="structured vs regular Hankel singular values")
    p.add_argument("model", type=Path)
    _common(p)

    p = sub.add_parser("reduce", help="balanced reduction at given orders")
    p.add_argument("model", type=Path)
    p.add_argument("--orders", type=int, nargs="+", required=True)
    _reduction_flags(p)
    _common(p)

    p = sub.add_parser("sweep", help="closed-loop error table over a grid of orders")
    p.add_argument("model", type=Path)
    p.add_argument("--grid", nargs="+", metavar="R1,R2,...",
                   help="one comma list of orders per subsystem (default: n_i, n_i-2, ...)")
    p.add_argument("--improve", action="store_true", help="also refine every stable cell")
    _reduction_flags(p)
    _common(p)

    p = sub.add_parser("improve", help="subgradient refinement of a reduced model")
    p.add_argument("model", type=Path)
    p.add_argument("reduced", type=Path)
    _common(p)

    p = sub.add_parser("demo-massspring", help="write the two-body mass-spring model")
    p.add_argument("--k", type=float, default=10.0, help="coupling spring constant")
    p.add_argument("--orders", type=int, nargs=2, default=[8, 10], metavar=("N1", "N2"))
    _common(p)
    return parser


def _emit(args, rep: Report, stem: str) -> None:
    text = rep.render(args.fmt)
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        ext = "tsv" if args.fmt == TSV else "txt"
        (args.out / f"{stem}.{ext}").write_text(text, encoding="utf-8")


def _write_model(args, mf, name: str) -> None:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        modelfile.write(mf, args.out / name)


def _base_meta(args, **extra) -> dict:
    meta = {"seed": args.seed}
    meta.update(extra)
    return meta


def _hsv_rows(sigmas):
    rows = []
    for k in range(max(len(s) for s in sigmas)):
        rows.append([k + 1] + [s[k] if k < len(s) else None for s in sigmas])
    return rows


def cmd_hankel(args) -> int:
    mf = modelfile.read(args.model)
    plant, net = mf.system()
    structured, regular = hankel_comparison(plant, net)
    bal = balance(plant, compute_gramians(plant, net, STRUCTURED))
    rep = Report("hankel", _base_meta(args, model=args.model.name,
                                      suggested_orders=list(suggest_orders(bal))))
    cols = ["k"]
    series = []
    for i, (s, r) in enumerate(zip(structured, regular), start=1):
        cols += [f"structured_{i}", f"regular_{i}"]
        series += [s, r]
    rep.add("hankel", cols, _hsv_rows(series))
    _emit(args, rep, "hankel")
    return EXIT_OK


def _lmi_tol(args):
    return args.tol if args.tol is not None else 1e-7


def _reduce_one(plant, net, bal, orders, method):
    red = reduce_network(plant, net, orders, method=method, bal=bal)
    if not np.isfinite(red.error):
        _diag(f"orders {tuple(orders)}: reduced closed loop is unstable, error reported as inf")
    return red


def cmd_reduce(args) -> int:
    mf = modelfile.read(args.model)
    plant, net = mf.system()
    orders = tuple(args.orders)
    bal = balance(plant, compute_gramians(plant, net, args.gramians, tol=_lmi_tol(args)))
    red = _reduce_one(plant, net, bal, orders, args.method)
    full = close_loop(plant, net)
    redcl = close_loop(red.plant, net)
    rows = [["error", red.error]]
    if args.method == TRUNCATION:
        rows.append(["d_match", bool(np.array_equal(full.D, redcl.D))])
    else:
        g0 = nk.freq_response(full.model(), 0.0)
        try:
            h0 = nk.freq_response(redcl.model(), 0.0)
            dc = np.linalg.norm(g0 - h0, 2) <= 1e-8 * max(1.0, np.linalg.norm(g0, 2))
        except NetmorError:
            dc = None
        rows.append(["dc_match", dc])
    bound = error_bound(bal, orders)
    rows.append(["bound", bound.value if args.gramians == GENERALIZED else None])
    rep = Report("reduce", _base_meta(args, model=args.model.name, orders=list(orders),
                                      method=args.method, gramians=args.gramians))
    rep.add("summary", ["quantity", "value"], rows)
    rep.add("hankel", ["k"] + [f"sigma_{i}" for i in range(1, plant.q + 1)], _hsv_rows(bal.sigmas))
    _emit(args, rep, "reduce")
    _write_model(args, mf.with_subsystems(red.plant.subsystems, orders=list(orders),
                                          method=args.method, gramians=args.gramians),
                 "reduced.json")
    return EXIT_OK


def _parse_grid(args, plant):
    if not args.grid:
        return [list(range(n, 0, -2)) or [0] for n in plant.state_dims]
    if len(args.grid) != plant.q:
        raise DimensionMismatch(f"--grid needs {plant.q} comma lists, got {len(args.grid)}")
    try:
        return [[int(v) for v in g.split(",") if v.strip()] for g in args.grid]
    except ValueError as exc:
        raise ParseError(f"bad --grid value: {exc}") from exc


def _descent_opts(args) -> DescentOptions:
    opts = DescentOptions()
    if args.tol is not None:
        opts.tol = args.tol
    if args.max_iter is not None:
        opts.max_iter = args.max_iter
    return opts


def sweep_cells(plant, net, grid, method=TRUNCATION, gramians=STRUCTURED, run_improve=False,
                opts: DescentOptions | None = None, lmi_tol=1e-7):
    """Error of every order tuple of ``grid``; failing cells become ``inf`` or ``None``.

    Returns ``(errors, improved, histories)`` keyed by order tuple.
    """
    import itertools

    bal = balance(plant, compute_gramians(plant, net, gramians, tol=lmi_tol))
    errors, improved, histories = {}, {}, {}
    for orders in itertools.product(*[sorted(set(g), reverse=True) for g in grid]):
        try:
            red = _reduce_one(plant, net, bal, orders, method)
            errors[orders] = red.error
        except NetmorError as exc:
            _diag(f"orders {orders}: {type(exc).__name__}: {exc}")
            errors[orders] = None
            continue
        if run_improve:
            if not np.isfinite(red.error):
                improved[orders] = np.inf
                continue
            try:
                out, rep = improve(build_error_plant(net, plant, orders), red, opts)
                improved[orders] = out.error
                histories[orders] = rep
            except NetmorError as exc:
                _diag(f"orders {orders}: improvement failed: {type(exc).__name__}: {exc}")
                improved[orders] = None
    return errors, improved, histories


def cmd_sweep(args) -> int:
    mf = modelfile.read(args.model)
    plant, net = mf.system()
    grid = _parse_grid(args, plant)
    for g in grid:
        if not g:
            raise ParseError("every grid list needs at least one order")
    opts = _descent_opts(args)
    errors, improved, histories = sweep_cells(plant, net, grid, args.method, args.gramians,
                                              args.improve, opts, _lmi_tol(args))
    meta = _base_meta(args, model=args.model.name, method=args.method, gramians=args.gramians,
                      grid=[",".join(map(str, g)) for g in grid])
    if args.improve:
        meta.update(descent_tol=opts.tol, descent_patience=opts.patience,
                    descent_max_iter=opts.max_iter)
    rep = Report("sweep", meta)
    rep.add("errors", *error_table(errors, plant.state_dims))
    if args.improve:
        rep.add("improved", *error_table(improved, plant.state_dims))
        rows = [[" ".join(map(str, k)), h.reason, h.accepted, h.evaluations] for k, h in histories.items()]
        rep.add("descent", ["orders", "reason", "accepted", "evaluations"], rows)
    _emit(args, rep, "sweep")
    return EXIT_OK


def cmd_improve(args) -> int:
    from .reduction import ReducedModel
    from .sysmodel import OrderVector, aggregate

    mf = modelfile.read(args.model)
    rf = modelfile.read(args.reduced)
    plant, net = mf.system()
    rplant = rf.plant()
    if not plant.same_partition(rplant):
        raise DimensionMismatch("reduced model does not keep the subsystems' input/output sizes")
    orders = OrderVector(rplant.state_dims).validate(plant)
    seed = ReducedModel(rplant, orders, str(rf.metadata.get("method", TRUNCATION)),
                        str(rf.metadata.get("gramians", STRUCTURED)))
    opts = _descent_opts(args)
    ep = build_error_plant(net, plant, orders)
    try:
        out, hist = improve(ep, seed, opts)
    except UnstableInit as exc:
        raise UnstableInit(f"cannot improve orders {tuple(orders)}: the seed's reduced closed loop "
                           f"is unstable", orders=tuple(orders)) from exc
    rep = Report("improve", _base_meta(args, model=args.model.name, reduced=args.reduced.name,
                                       orders=list(orders), descent_tol=opts.tol,
                                       descent_patience=opts.patience,
                                       descent_max_iter=opts.max_iter))
    rep.add("summary", ["quantity", "value"],
            [["initial_error", hist.history[0]], ["final_error", hist.history[-1]],
             ["accepted_steps", hist.accepted], ["evaluations", hist.evaluations],
             ["reason", hist.reason]])
    rep.add("history", ["step", "objective"], list(enumerate(hist.history)))
    _emit(args, rep, "improve")
    _write_model(args, mf.with_subsystems(out.plant.subsystems, orders=list(orders),
                                          method="improved", seed_method=seed.method),
                 "improved.json")
    return EXIT_OK


def demo_modelfile(k: float = 10.0, orders=(8, 10)) -> modelfile.ModelFile:
    plant, edges = demo_system(k, tuple(orders))
    return modelfile.ModelFile(plant.subsystems, {kind: [list(r) for r in rows] for kind, rows in
                                                  DEMO_EDGES.items()},
                               edges.m_ext, edges.p_ext, {"k": float(k)})


def cmd_demo(args) -> int:
    mf = demo_modelfile(args.k, args.orders)
    text = modelfile.dumps(mf)
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    _write_model(args, mf, "massspring.json")
    plant = mf.plant()
    w = nk.log_grid(1e-1, 1e3, 400)
    cols = ["omega"] + [f"sigma_{s.label or i}" for i, s in enumerate(plant.subsystems, start=1)]
    series = [w] + [nk.sigma_sweep(s, w) for s in plant.subsystems]
    rep = Report("demo-massspring", _base_meta(args, k=args.k, orders=list(args.orders)))
    rep.add("bode", cols, np.column_stack(series).tolist())
    _emit(args, rep, "bode")
    return EXIT_OK


COMMANDS = {"hankel": cmd_hankel, "reduce": cmd_reduce, "sweep": cmd_sweep,
            "improve": cmd_improve, "demo-massspring": cmd_demo}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except (ParseError, DimensionMismatch, IndexOutOfRange, ValueError) as exc:
        _diag(f"invalid input: {exc}")
        return EXIT_INPUT
    except NetmorError as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except Exception as exc:  # pragma: no cover - last resort
        _diag(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
