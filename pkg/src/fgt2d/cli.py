"""Command-line front end: ``fgt2d {volume,boundary,discrete,bench,heat-demo}``.

Exit codes: 0 ok, 1 usage, 2 verification failure, 3 input error.
"""
import argparse
import csv
import io
import json
import math
import os
import struct
import sys
import time

import numpy as np

from . import fixtures as F
from . import oracle
from .quadtree import Domain, RefinementError, Tree, build_uniform_tree, refine_adaptive

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2, 3
MAGIC = b"FGTO"
VERSION = 1


class InputError(Exception):
    pass


# ------------------------------------------------------------------- io ----

def write_fgto(path, values):
    v = np.ascontiguousarray(np.asarray(values, dtype="<f8").reshape(-1))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(v)))
        fh.write(v.tobytes())


def read_fgto(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise InputError(f"{path}: not an FGTO file")
    version, n = struct.unpack_from("<IQ", data, 4)
    if version != VERSION:
        raise InputError(f"{path}: unsupported FGTO version {version}")
    off = 4 + struct.calcsize("<IQ")
    if len(data) != off + 8 * n:
        raise InputError(f"{path}: truncated FGTO payload")
    return np.frombuffer(data, dtype="<f8", count=n, offset=off).copy()


def write_values(path, values, points=None, fmt="fgto"):
    """Write values (optionally with their x, y locations for CSV)."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if points is None:
                w.writerow(["value"])
                for v in np.reshape(values, -1):
                    w.writerow([repr(float(v))])
            else:
                w.writerow(["x", "y", "value"])
                for (x, y), v in zip(np.reshape(points, (-1, 2)), np.reshape(values, -1)):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])
    else:
        write_fgto(path, values)


def read_table(path, min_cols):
    """Numeric CSV (header optional) as a 2D float array."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(str(e))
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    try:
        arr = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as e:
        raise InputError(f"{path}: {e}")
    if arr.ndim != 2 or arr.shape[1] < min_cols:
        raise InputError(f"{path}: expected at least {min_cols} numeric columns")
    return arr


def parse_source(spec):
    """Fixture mini-language: 'sinprod:K', 'bumps', 'constant[:C]'."""
    name, _, arg = str(spec).partition(":")
    name = name.strip().lower()
    if name == "sinprod":
        return F.sinprod(int(arg or 1))
    if name == "bumps":
        return F.bumps()
    if name == "constant":
        return F.constant(float(arg or 1.0))
    raise InputError(f"unknown source fixture {spec!r}")


def load_tree(args, periodic):
    """Tree from --input (tree JSON or {source, tol, ...}) or from --source."""
    data = None
    if args.input:
        try:
            with open(args.input) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"{args.input}: {e}")
    elif args.source:
        data = {"source": args.source}
    else:
        raise InputError("volume needs --input or --source")
    if "boxes" in data:
        try:
            tree = Tree.from_json(data, periodic=periodic)
        except (KeyError, ValueError, TypeError) as e:
            raise InputError(f"malformed tree JSON: {e}")
        return tree, data.get("source")
    spec = data.get("source")
    if spec is None:
        raise InputError("input JSON needs 'boxes' (a tree) or 'source' (a fixture spec)")
    f = parse_source(spec)
    dom = data.get("domain")
    domain = Domain(tuple(dom["center"]), float(dom["side"])) if dom else Domain((0.5, 0.5), 1.0)
    k = int(data.get("order", args.order))
    if "levels" in data:
        tree = build_uniform_tree(int(data["levels"]), k=k, domain=domain, periodic=periodic)
        tree.sample(f)
    else:
        tree = refine_adaptive(f, float(data.get("tol", 1e-10)), k=k, max_levels=int(data.get("max_levels", 12)),
                               domain=domain, periodic=periodic)
    return tree, spec


# ------------------------------------------------------------- commands ----

def _random_targets(tree, n, seed):
    rng = np.random.default_rng(seed)
    return tree.domain.lower + tree.domain.side * rng.random((n, 2))


def _volume_reference(tree, spec, pts, delta, periodic):
    name = (spec or "").split(":")[0].strip().lower()
    if periodic and name == "sinprod":
        return F.sinprod_periodic_transform(pts, delta, int(spec.split(":")[1] if ":" in spec else 1))
    if not periodic and name == "bumps" and tree.domain.side == F.BUMP_DOMAIN.side and \
            np.allclose(tree.domain.center, F.BUMP_DOMAIN.center):
        return F.bumps_transform(pts, delta)
    return oracle.direct_volume(None, pts, delta, tree.domain, tree=tree, periodic=periodic)


def cmd_volume(args):
    from .engine import volume_transform

    periodic = args.bc == "periodic"
    tree, spec = load_tree(args, periodic)
    if tree.values is None:
        tree.set_values(np.zeros((tree.nleaves, tree.k, tree.k)))
    targets = _random_targets(tree, 200, args.seed) if args.verify else None
    res = volume_transform(tree, args.delta, args.eps, targets=targets, use_numba=_numba_flag(args))
    if args.output:
        write_values(args.output, res.grid_values, tree.grid_points(), args.format)
    print(f"leaves={tree.nleaves} levels={tree.nlevels} l_cut={res.stats['l_cut']} "
          f"eval_seconds={res.stats['eval_seconds']:.3f} precompute_seconds={res.stats['precompute_seconds']:.3f}")
    if args.verify:
        ref = _volume_reference(tree, spec, targets, args.delta, periodic)
        err = float(np.abs(res.point_values - ref).max())
        ok = err <= 10 * args.eps
        print(f"verify: max_abs_error={err:.3e} limit={10 * args.eps:.1e} {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_VERIFY
    return EXIT_OK


def cmd_discrete(args):
    from .engine import discrete_transform

    periodic = args.bc == "periodic"
    if args.input:
        tab = read_table(args.input, 3)
        src, q = tab[:, :2], tab[:, 2]
        dip = tab[:, 3:5] if tab.shape[1] >= 5 else None
    else:
        rng = np.random.default_rng(args.seed)
        src, q, dip = rng.random((args.n, 2)), rng.uniform(-1, 1, args.n), None
    tgt = read_table(args.targets, 2)[:, :2] if args.targets else src
    res = discrete_transform(src, q, tgt, args.delta, args.eps, dipoles=dip, periodic=periodic,
                             use_numba=_numba_flag(args))
    if args.output:
        write_values(args.output, res.point_values, tgt, args.format)
    print(f"sources={len(src)} targets={len(tgt)} eval_seconds={res.stats['eval_seconds']:.3f}")
    if args.verify:
        if periodic:
            ref = oracle.direct_periodic_points(src, q, tgt, args.delta) if dip is None else None
        else:
            ref = oracle.direct_dgt(src, q, tgt, args.delta, dipoles=dip)
        if ref is None:
            raise InputError("periodic verification of dipoles is not supported")
        scale = float(np.abs(q).sum() + (0 if dip is None else np.abs(dip).sum() * 2 / math.sqrt(args.delta)))
        err = float(np.abs(res.point_values - ref).max())
        ok = err <= 10 * args.eps * scale
        print(f"verify: max_abs_error={err:.3e} limit={10 * args.eps * scale:.3e} {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_VERIFY
    return EXIT_OK


def load_boundary(path):
    from .boundary import BoundaryDensity, BoundarySegment

    try:
        with open(path) as fh:
            data = json.load(fh)
        k = int(data["order"])
        segs = [BoundarySegment(s["x1"], s["x2"]) for s in data["segments"]]
        dens = data["density"]
        density = BoundaryDensity(dens["coeffs"], dens.get("kind", "single"))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path}: {e}")
    if any(s.order != k for s in segs) or any(len(c) != k for c in density.coeffs) or \
            len(density.coeffs) != len(segs):
        raise InputError(f"{path}: coefficient counts do not match order {k}")
    return segs, density


def ellipse_problem(m=32, k=16, kind="single"):
    from .boundary import BoundaryDensity, legendre_fit

    segs = F.ellipse_segments(m, k)
    coeffs = [legendre_fit(lambda s, sg=sg: F.ellipse_density(*sg.point(s).T), k) for sg in segs]
    return segs, BoundaryDensity(coeffs, kind)


def cmd_boundary(args):
    from numpy.polynomial.legendre import leggauss

    from .boundary import run_boundary

    if args.input:
        segs, density = load_boundary(args.input)
    else:
        segs, density = ellipse_problem()
    nodes = np.concatenate([s.point(leggauss(s.order)[0]) for s in segs]) if segs else np.zeros((0, 2))
    tgt = read_table(args.targets, 2)[:, :2] if args.targets else nodes
    res = run_boundary(segs, density, args.delta, args.eps, tgt, use_numba=_numba_flag(args))
    if args.output:
        write_values(args.output, res.values, tgt, args.format)
    print(f"segments={len(segs)} flagged={int(res.flagged.sum())} corrected_pairs={res.stats['corrected_pairs']}")
    if args.verify:
        ref = oracle.direct_boundary(segs, density.coeffs, tgt, args.delta, density.kind)
        norm = max((np.abs(np.polynomial.legendre.legval(np.linspace(-1, 1, 33), c)).max()
                    for c in density.coeffs), default=0.0)
        length = sum(s.length for s in segs)
        limit = 10 * args.eps * max(norm * length, 1e-300)
        err = float(np.abs(res.values - ref).max()) if len(tgt) else 0.0
        ok = err <= limit
        print(f"verify: max_abs_error={err:.3e} limit={limit:.3e} {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------- bench ----

BENCH_FIELDS = ["eps", "delta", "N", "total_seconds", "precompute_seconds", "points_per_second_excl_precompute"]


def scaling_suite(eps_list=(1e-3, 1e-6, 1e-9), levels=(4, 5, 6, 7), repeats=2, use_numba=None):
    """Periodic sinprod(2^(l-4)) on uniform trees of 4^l leaves with delta = 1/K^2."""
    from .engine import FGT

    rows = []
    for eps in eps_list:
        for lv in levels:
            K = 2 ** (lv - 4)
            tree = build_uniform_tree(lv, k=8, periodic=True)
            tree.sample(F.sinprod(K))
            delta = 1.0 / K ** 2
            t0 = time.perf_counter()
            fgt = FGT(tree, delta, eps, use_numba=use_numba)
            res = fgt.run()
            total = time.perf_counter() - t0
            best = res.stats["eval_seconds"]
            for _ in range(repeats - 1):
                best = min(best, fgt.run().stats["eval_seconds"])
            n = tree.nleaves * tree.k ** 2
            rows.append(dict(eps=eps, delta=delta, N=tree.nleaves, total_seconds=total,
                             precompute_seconds=fgt.precompute_seconds,
                             points_per_second_excl_precompute=n / best))
    return rows


def delta_suite(eps_list=(1e-3, 1e-6, 1e-9), deltas=(1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1), ntargets=200,
                seed=0, use_numba=None):
    """Bump source on its adaptive tree; each row also carries the max error against the closed form."""
    from .engine import FGT

    tree = refine_adaptive(F.bumps(), 1e-10, k=8, max_levels=12)
    pts = np.random.default_rng(seed).random((ntargets, 2))
    rows = []
    for eps in eps_list:
        for delta in deltas:
            t0 = time.perf_counter()
            fgt = FGT(tree, delta, eps, use_numba=use_numba)
            res = fgt.run(targets=pts)
            total = time.perf_counter() - t0
            err = float(np.abs(res.point_values - F.bumps_transform(pts, delta)).max())
            n = tree.nleaves * tree.k ** 2 + ntargets
            rows.append(dict(eps=eps, delta=delta, N=tree.nleaves, total_seconds=total,
                             precompute_seconds=fgt.precompute_seconds,
                             points_per_second_excl_precompute=n / res.stats["eval_seconds"], max_error=err))
    return rows


def fit_cost_model(N, T):
    """Nonnegative least squares fit T ~ A N + B log N; returns (A, B, relative residual)."""
    from scipy.optimize import nnls

    N = np.asarray(N, dtype=float)
    T = np.asarray(T, dtype=float)
    M = np.stack([N, np.log(N)], axis=1)
    w = 1.0 / T  # relative residuals
    (A, B), _ = nnls(M * w[:, None], T * w)
    rel = float(np.sqrt(np.mean(((M @ [A, B]) - T) ** 2 / T ** 2)))
    return float(A), float(B), rel


def cmd_bench(args):
    eps_list = tuple(float(e) for e in args.eps_list.split(",")) if args.eps_list else (1e-3, 1e-6, 1e-9)
    if args.suite == "scaling":
        rows = scaling_suite(eps_list, use_numba=_numba_flag(args))
    elif args.suite == "delta-sweep":
        rows = delta_suite(eps_list, seed=args.seed, use_numba=_numba_flag(args))
    else:
        raise InputError(f"unknown suite {args.suite!r}")
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    fields = BENCH_FIELDS + (["max_error"] if args.suite == "delta-sweep" else [])
    w = csv.DictWriter(out, fieldnames=fields)
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if args.output:
        out.close()
    status = EXIT_OK
    if args.suite == "scaling":
        for eps in eps_list:
            sub = [r for r in rows if r["eps"] == eps]
            pps = [r["points_per_second_excl_precompute"] for r in sub]
            A, B, rel = fit_cost_model([r["N"] for r in sub], [r["total_seconds"] for r in sub])
            print(f"# eps={eps:g} throughput_ratio={max(pps) / min(pps):.2f} A={A:.3e} B={B:.3e} "
                  f"fit_rel_residual={rel:.2f}", file=sys.stderr)
    if args.verify and args.suite == "delta-sweep":
        bad = [r for r in rows if r["max_error"] > 10 * r["eps"]]
        print(f"# verify: {len(rows) - len(bad)}/{len(rows)} cells within 10 eps", file=sys.stderr)
        status = EXIT_VERIFY if bad else EXIT_OK
    return status


# ------------------------------------------------------------ heat demo ----

def cmd_heat_demo(args):
    from . import heat

    times = [float(t) for t in args.times.split(",")]
    tree, c = heat.initial_tree(args.seed)
    mean0 = float(c.mean())
    prefix = args.output or "heat"
    status = EXIT_OK
    for t in times:
        res = heat.solve(tree, t, args.eps, use_numba=_numba_flag(args))
        ext = "csv" if args.format == "csv" else "fgto"
        path = f"{prefix}_t{t:g}.{ext}"
        write_values(path, res.grid_values, tree.grid_points(), args.format)
        line = f"t={t:g} file={path}"
        if args.verify:
            mean = heat.periodic_mean(tree, t, args.eps, use_numba=_numba_flag(args))
            dev = abs(mean - mean0)
            ok = dev <= 1e-8
            status = status if ok else EXIT_VERIFY
            line += f" mean_deviation={dev:.2e} {'PASS' if ok else 'FAIL'}"
        pf = heat.plan_orders(t, args.eps, True)
        pl = heat.plan_orders(t, args.eps, False)
        fine = max(pf) if pf else None
        line += f" order_prefactor={pf.get(fine)} order_plain={pl.get(fine)}"
        print(line)
    return status


# ------------------------------------------------------------------ main ----

def _numba_flag(args):
    return None if args.kernels == "auto" else args.kernels == "numba"


def build_parser():
    p = argparse.ArgumentParser(prog="fgt2d", description="Adaptive fast Gauss transforms in two dimensions.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, delta=True):
        if delta:
            sp.add_argument("--delta", type=float, required=True, help="Gaussian variance parameter")
        sp.add_argument("--eps", type=float, default=1e-6, help="requested tolerance (default 1e-6)")
        sp.add_argument("--bc", choices=["free", "periodic"], default="free")
        sp.add_argument("--order", type=int, default=8, help="leaf polynomial order k (default 8)")
        sp.add_argument("--input")
        sp.add_argument("--output")
        sp.add_argument("--format", choices=["fgto", "csv"], default="fgto")
        sp.add_argument("--verify", action="store_true", help="compare against the brute-force oracle")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1, help="worker-count hint (evaluation is sequential)")
        sp.add_argument("--kernels", choices=["auto", "numba", "numpy"], default="auto")

    v = sub.add_parser("volume", help="volume transform of a tree or a named fixture")
    common(v)
    v.add_argument("--source", help="fixture spec: sinprod:K, bumps, constant[:C]")
    d = sub.add_parser("discrete", help="discrete transform of point sources (CSV x,y,q[,dx,dy])")
    common(d)
    d.add_argument("--targets", help="CSV of target points (default: the sources)")
    d.add_argument("--n", type=int, default=2000, help="random sources when no --input is given")
    b = sub.add_parser("boundary", help="boundary layer transform (JSON segments + density)")
    common(b)
    b.add_argument("--targets", help="CSV of target points (default: the quadrature nodes)")
    be = sub.add_parser("bench", help="throughput tables")
    common(be, delta=False)
    be.add_argument("--suite", choices=["scaling", "delta-sweep"], default="scaling")
    be.add_argument("--eps-list", help="comma-separated tolerances (default 1e-3,1e-6,1e-9)")
    h = sub.add_parser("heat-demo", help="periodic heat flow from piecewise-constant data")
    common(h, delta=False)
    h.add_argument("--times", default="1e-4,1e-3,1e-2", help="comma-separated times")
    h.set_defaults(eps=1e-9)
    return p


COMMANDS = {"volume": cmd_volume, "discrete": cmd_discrete, "boundary": cmd_boundary, "bench": cmd_bench,
            "heat-demo": cmd_heat_demo}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.threads < 1 or not (1e-14 <= args.eps <= 1e-1) or (getattr(args, "delta", 1.0) <= 0):
        print("error: need --threads >= 1, --eps in [1e-14, 1e-1] and --delta > 0", file=sys.stderr)
        return EXIT_USAGE
    os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
    from .engine import InvalidRequest

    try:
        return COMMANDS[args.command](args)
    except (InputError, RefinementError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InvalidRequest as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
