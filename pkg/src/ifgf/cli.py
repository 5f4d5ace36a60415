"""Benchmark harness: ``ifgf run``, ``ifgf verify`` and ``ifgf scale``."""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .dist import run_distributed
from .engine import IFGFOperator, IFGFParams, direct_eval, execution_units
from .geometry import Shape, diameter, generate_surface, n_per_dim_for, read_points, shape_diameter
from .kernel import KernelConfig

REPORT_SCHEMA = "ifgf-run-report/1"
FULL_VERIFY_MAX_N = 5000


def _triple(text):
    try:
        v = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    if len(v) != 3 or min(v) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return v


def _int_list(text):
    try:
        return [int(float(s)) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p, n_type=int, n_default=20000):
    g = p.add_argument_group("problem")
    g.add_argument("--shape", choices=[s.value for s in Shape], default="sphere")
    g.add_argument("--size-lambda", type=float, default=4.0,
                   help="surface diameter in wavelengths (Helmholtz only)")
    g.add_argument("--n", type=n_type, default=n_default, help="target number of points")
    g.add_argument("--kernel", choices=["helmholtz", "laplace"], default="helmholtz")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--input", help="point file (binary or CSV) instead of a generated surface")
    t = p.add_argument_group("method")
    depth = t.add_mutually_exclusive_group()
    depth.add_argument("--depth", type=int, help="octree depth D")
    depth.add_argument("--box-lambda", type=float, default=IFGFParams.box_size_wavelengths,
                       help="target level-D box side in wavelengths")
    t.add_argument("--p", type=_triple, default=IFGFParams.degrees, metavar="S,T,P",
                   help="interpolation degrees per segment")
    t.add_argument("--cones", type=_triple, default=IFGFParams.cones, metavar="S,T,P",
                   help="level-D cone segment counts")
    x = p.add_argument_group("execution")
    x.add_argument("--ranks", type=int, default=1, help="simulated ranks")
    env = os.environ.get("IFGF_THREADS")
    x.add_argument("--threads", type=int, default=int(env) if env else None,
                   help="execution units (default: $IFGF_THREADS or all)")
    p.add_argument("--output", help="write the report here instead of stdout")


def _verify_args(p, default):
    p.add_argument("--verify", choices=["full", "subsample", "none"], default=default)
    p.add_argument("--m", type=int, default=1000, help="sampled points per rank for subsample verification")


def build_parser():
    ap = argparse.ArgumentParser(prog="ifgf", description="IFGF operator evaluation benchmarks")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate once and emit a JSON report")
    _common(run)
    _verify_args(run, "subsample")
    ver = sub.add_parser("verify", help="evaluate and check the error against a threshold")
    _common(ver)
    _verify_args(ver, "subsample")
    ver.add_argument("--threshold", type=float, default=5e-3)
    sc = sub.add_parser("scale", help="sweep N and emit a CSV table")
    _common(sc, n_type=_int_list, n_default=[20000, 80000, 320000])
    sc.add_argument("--fixed-size", action="store_true",
                    help="keep --size-lambda for every N instead of scaling it with sqrt(N)")
    return ap


def _problem(args, n, size_lambda):
    if args.input:
        pc = read_points(args.input)
        diam = diameter(pc)
    else:
        pc = generate_surface(args.shape, 1.0, n_per_dim_for(n), seed=args.seed)
        diam = shape_diameter(args.shape)
    if args.kernel == "laplace":
        # real densities give a real potential
        pc.a_im[:] = 0.0
        cfg = KernelConfig.laplace()
    else:
        if not size_lambda > 0:
            raise SystemExit("error: --size-lambda must be positive")
        cfg = KernelConfig.helmholtz(2.0 * np.pi * size_lambda / diam)
    return pc, cfg, diam


def _params(args):
    if args.ranks < 1:
        raise SystemExit("error: --ranks must be at least 1")
    kw = dict(degrees=args.p, cones=args.cones, threads=args.threads)
    if args.depth is not None:
        kw["depth"] = args.depth
    else:
        kw["box_size_wavelengths"] = args.box_lambda
    try:
        return IFGFParams(**kw)
    except ValueError as e:
        raise SystemExit(f"error: {e}")


def _evaluate(pc, cfg, params, ranks):
    t = time.perf_counter()
    op = IFGFOperator(pc, cfg, params)
    setup = time.perf_counter() - t
    stages = {"setup_tree": op.timings["setup_tree"], "setup_cones": op.timings["setup_cones"]}
    if ranks == 1:
        res = op.apply()
        values, comm, stage_t = res.values, None, res.timings
        peak = res.stats["peak_live_blocks"]
    else:
        res = run_distributed(pc, cfg, params, ranks, op=op)
        values, comm, stage_t = res.values, res.stats.to_dict(), res.timings
        peak = None
    stages.update({k: v for k, v in stage_t.items() if k != "total"})
    return op, values, stages, setup, comm, peak


def _sample_targets(op, ranks, m, seed, values_n):
    """Original indices of ``m`` random points from each rank's interval."""
    rng = np.random.default_rng(seed)
    if ranks == 1:
        if not 1 <= m <= values_n:
            raise SystemExit(f"error: --m must be in [1, {values_n}]")
        return np.sort(rng.permutation(values_n)[:m])
    from .dist import partition

    layout = partition(op.tree, op.cones, ranks)
    out = []
    for r in range(ranks):
        i0, i1 = layout.point_range(r)
        out.append(op.perm[i0 + rng.permutation(i1 - i0)[:m]])
    return np.sort(np.concatenate(out))


def _error(pc, cfg, op, values, args):
    if args.verify == "none":
        return None, 0
    if args.verify == "full":
        if pc.n > FULL_VERIFY_MAX_N:
            raise SystemExit(f"error: full verification is limited to N <= {FULL_VERIFY_MAX_N}; use --verify subsample")
        targets = np.arange(pc.n)
    else:
        targets = _sample_targets(op, args.ranks, args.m, args.seed, pc.n)
    exact = direct_eval(pc, cfg, targets)
    den = float(np.sum(np.abs(exact) ** 2))
    return math.sqrt(float(np.sum(np.abs(exact - values[targets]) ** 2)) / den), int(targets.size)


def _report(args, pc, cfg, diam, op, values, stages, comm, peak, eps, m, threads):
    total = sum(stages.values())
    return {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k != "func"},
        "N": pc.n,
        "D": op.depth,
        "kappa": cfg.kappa,
        "diameter": diam,
        "diameter_lambda": diam / cfg.wavelength if cfg.kappa else None,
        "stage_times": stages,
        "T": total,
        "execution_units": threads,
        "ranks": args.ranks,
        "eps_M": eps,
        "M": m,
        "peak_live_blocks": peak,
        "relevant_cones": {str(d): op.cones.count(d) for d in op.cones.levels},
        "comm": comm,
        "checksum": {"re": float(values.real.sum()), "im": float(values.imag.sum())},
    }


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    pc, cfg, diam = _problem(args, args.n, args.size_lambda)
    params = _params(args)
    with execution_units(params.threads) as nc:
        op, values, stages, _, comm, peak = _evaluate(pc, cfg, params, args.ranks)
        eps, m = _error(pc, cfg, op, values, args)
    rep = _report(args, pc, cfg, diam, op, values, stages, comm, peak, eps, m, nc)
    _emit(json.dumps(rep, indent=2) + "\n", args.output)
    return rep


def cmd_verify(args):
    if args.verify == "none":
        raise SystemExit("error: verify needs --verify full or subsample")
    rep = cmd_run(args)
    ok = rep["eps_M"] <= args.threshold
    print(f"eps = {rep['eps_M']:.3e} over {rep['M']} points: {'PASS' if ok else 'FAIL'} "
          f"(threshold {args.threshold:g})", file=sys.stderr)
    return 0 if ok else 1


SCALE_COLUMNS = ["N", "D", "size_lambda", "T", "T_over_N_log2N", "setup", "apply",
                 "peak_live_blocks", "relevant_cones", "blocks_fetched", "max_interp_fanout", "max_prop_fanout"]


def cmd_scale(args):
    params = _params(args)
    rows = []
    n0 = args.n[0]
    with execution_units(params.threads):
        _warm_up(params)
        for n in args.n:
            lam = args.size_lambda if args.fixed_size else args.size_lambda * math.sqrt(n / n0)
            pc, cfg, _ = _problem(args, n, lam)
            op, _, stages, setup, comm, peak = _evaluate(pc, cfg, params, args.ranks)
            total = sum(stages.values())
            rows.append({
                "N": pc.n, "D": op.depth, "size_lambda": lam, "T": total,
                "T_over_N_log2N": total / (pc.n * math.log2(pc.n)),
                "setup": setup, "apply": total - setup, "peak_live_blocks": peak,
                "relevant_cones": sum(op.cones.count(d) for d in op.cones.levels),
                "blocks_fetched": comm["total_blocks_fetched"] if comm else 0,
                "max_interp_fanout": comm["max_interp_fanout"] if comm else 0,
                "max_prop_fanout": comm["max_prop_fanout"] if comm else 0,
            })
    if args.output:
        with open(args.output, "w", newline="") as f:
            _write_csv(f, rows)
    else:
        _write_csv(sys.stdout, rows)
    return rows


def _write_csv(f, rows):
    w = csv.DictWriter(f, fieldnames=SCALE_COLUMNS)
    w.writeheader()
    w.writerows(rows)


def _warm_up(params):
    # compile the passes outside the timed region
    pc = generate_surface("sphere", 1.0, 12, seed=0)
    IFGFOperator(pc, KernelConfig.helmholtz(4.0), IFGFParams(depth=5, degrees=params.degrees,
                                                           cones=params.cones)).apply()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cmd_run(args)
            return 0
        if args.command == "verify":
            return cmd_verify(args)
        cmd_scale(args)
        return 0
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
