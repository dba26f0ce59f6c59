"""Command-line entry point.

Exit status: 0 when every verification threshold holds, 1 when one fails,
2 on usage or configuration errors.  For pairs that violate the embedding
conditions (P1-P1) the balance and Poisson checks run as negative controls
and pass when the property is visibly broken.
"""
import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from . import analysis, assembly, model, spaces
from .config import ConfigError, RunConfig, apply_overrides, parse_config
from .mesh import MeshError, dump_mesh
from .vtk import write_vtk

log = logging.getLogger("geobalance")

BALANCE_TOL = 1e-8
NEGATIVE_DRIFT = 1e-3
POISSON_TOL = 1e-10
NEGATIVE_POISSON = 1e-2
ENERGY_TOL = 1e-10
MIN_ORDER = {"P0-P1": 0.8, "P1DG-P2": 1.8, "P2DG-P3": 2.7}


class UsageError(Exception):
    pass


def _add_config_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest="cfg_" + f.name, metavar=f.name.upper(), default=None)


def _load_config(args):
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    else:
        cfg = RunConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return apply_overrides(cfg, overrides)


def _outdir(cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _ns(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _initial_state(cfg, pair, params, ops, seed):
    if cfg.init == "standing-wave":
        return analysis.StandingWave(params.g, params.Dbar).initial_state(pair)
    if cfg.init == "random":
        rng = np.random.default_rng(seed)
        return model.State(rng.uniform(-1, 1, pair.V.ndof), rng.uniform(-1, 1, pair.H.ndof))
    eta = model.random_boundary_zero_eta(pair, seed)
    if pair.is_embedding:
        return model.random_balanced_state(pair, params, seed, eta=eta)
    return model.State(model.project_balanced(pair, eta, params, ops), eta)


def cmd_mesh_gen(args, cfg):
    text = dump_mesh(cfg.mesh())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return True


def cmd_run(args, cfg):
    params = cfg.params()
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    solver = model.MidpointSolver(pair, params, cfg.solver, cfg.tol)
    state = _initial_state(cfg, pair, params, solver.ops, cfg.seed)
    out = _outdir(cfg)

    def sink(step, st):
        with open(os.path.join(out, f"snapshot_{step:06d}.vtk"), "w") as fh:
            write_vtk(fh, pair, st)

    _, diag = model.run(pair, params, state, sink, solver, cfg.snapshot_interval)
    with open(os.path.join(out, "diagnostics.csv"), "w") as fh:
        diag.write_csv(fh)
    e0 = model.energy(solver.ops, params, state)
    e_drift = max(abs(e - e0) for e in diag.energy) / e0 if e0 > 0 else 0.0
    print(f"pair {pair.name}: {params.nsteps} steps, max eta drift {diag.max_eta_drift:.3e}, "
          f"max u drift {diag.max_u_drift:.3e}, relative energy drift {e_drift:.3e}")
    ok = cfg.solver != "direct" or e_drift <= ENERGY_TOL
    if cfg.init == "balanced":
        ok &= _balance_verdict(pair, max(diag.max_eta_drift, diag.max_u_drift))
    return ok


def _balance_verdict(pair, drift):
    if pair.is_embedding:
        return drift <= BALANCE_TOL
    return drift >= NEGATIVE_DRIFT


def balance_case(cfg, seed):
    """One balanced run: (seed, final eta drift, final u drift, max eta drift, max u drift)."""
    params = cfg.params()
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    solver = model.MidpointSolver(pair, params, cfg.solver, cfg.tol)
    state = _initial_state(cfg, pair, params, solver.ops, seed)
    _, diag = model.run(pair, params, state, solver=solver)
    return seed, diag.eta_drift[-1], diag.u_drift[-1], diag.max_eta_drift, diag.max_u_drift


def balance_test(cfg, seeds, jobs=1):
    """Run every seed, sharing one factorisation when running serially."""
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(balance_case, [cfg] * len(seeds), seeds))
        return sorted(rows)
    params = cfg.params()
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    solver = model.MidpointSolver(pair, params, cfg.solver, cfg.tol)
    rows = []
    for seed in seeds:
        state = _initial_state(cfg, pair, params, solver.ops, seed)
        _, diag = model.run(pair, params, state, solver=solver)
        rows.append((seed, diag.eta_drift[-1], diag.u_drift[-1], diag.max_eta_drift, diag.max_u_drift))
    return rows


def cmd_balance_test(args, cfg):
    cfg = apply_overrides(cfg, {"init": "balanced"})
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))
    rows = balance_test(cfg, seeds, args.jobs)
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    with open(os.path.join(_outdir(cfg), f"balance_{pair.name}.csv"), "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "eta_drift", "u_drift", "max_eta_drift", "max_u_drift"])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    for seed, ed, ud, _, _ in rows:
        print(f"seed {seed:4d}  eta drift {ed:.3e}  u drift {ud:.3e}")
    worst = max(max(r[3], r[4]) for r in rows)
    best = min(max(r[1], r[2]) for r in rows)
    if pair.is_embedding:
        print(f"{pair.name}: max drift over {len(rows)} seeds = {worst:.3e} (threshold {BALANCE_TOL:g})")
        return worst <= BALANCE_TOL
    print(f"{pair.name} (negative control): min final drift over {len(rows)} seeds = {best:.3e} "
          f"(expected >= {NEGATIVE_DRIFT:g})")
    return best >= NEGATIVE_DRIFT


def cmd_infsup(args, cfg):
    rep = analysis.infsup_sweep(cfg.pair, args.ns, cfg.perturb, cfg.mesh_seed)
    with open(os.path.join(_outdir(cfg), f"infsup_{rep.pair}.csv"), "w") as fh:
        rep.write_csv(fh)
    for n, h, b, lam in zip(rep.n, rep.h, rep.beta, rep.lambda_min):
        print(f"n={n:3d} h={h:.4f} beta_h={b:.10f} sqrt(lambda_min_h)={math.sqrt(lam):.10f}")
    print(f"max/min beta_h = {rep.beta_ratio:.4f}")
    if not rep.embeds_gradient:
        return True
    return rep.bound_holds() and rep.beta_ratio <= 1.2


def cmd_poisson_check(args, cfg):
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    ops = assembly.assemble(pair)
    d = analysis.poisson_sparsity_check(pair, ops)
    rel = d / ops.K.max_abs()
    print(f"{pair.name}: ||G^T M_u^-1 G - K||_max = {d:.3e} (relative {rel:.3e})")
    if pair.embeds_gradient:
        return rel <= POISSON_TOL
    return rel >= NEGATIVE_POISSON


def cmd_spectrum(args, cfg):
    params = cfg.params()
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    rep = analysis.compute_spectrum(pair, params, seed=cfg.seed)
    with open(os.path.join(_outdir(cfg), f"spectrum_{pair.name}.csv"), "w") as fh:
        rep.write_csv(fh)
    n_int = len(pair.H.interior_dofs)
    print(f"{pair.name}: {len(rep.omega)} modes, max|omega| = {rep.max_abs_omega:.6g}, "
          f"relative max real part = {rep.max_real:.3e}")
    print(f"zero modes = {rep.zero_modes} (interior H DOFs = {n_int}), "
          f"smallest nonzero |omega| = {rep.smallest_nonzero():.6g}")
    ok = rep.max_real <= 1e-10
    if pair.is_embedding and params.f > 0:
        print(f"balanced-state residual = {rep.balanced_residual:.3e}")
        ok &= rep.balanced_residual <= 1e-11 and rep.zero_modes >= n_int
    return ok


def cmd_converge(args, cfg):
    g = cfg.params().g if cfg.g is None else cfg.g
    D = 1.0 if cfg.Dbar is None else cfg.Dbar
    rep = analysis.convergence_study(cfg.pair, args.ns, args.T, g, D, cfg.perturb, cfg.mesh_seed)
    with open(os.path.join(_outdir(cfg), f"converge_{rep.pair}.csv"), "w") as fh:
        rep.write_csv(fh)
    for n, h, eu, ee in zip(rep.n, rep.h, rep.err_u, rep.err_eta):
        print(f"n={n:3d} h={h:.4f} L2(u)={eu:.4e} L2(eta)={ee:.4e}")
    print(f"observed order: eta {rep.order_eta:.3f}, u {rep.order_u:.3f}")
    threshold = args.min_order if args.min_order is not None else MIN_ORDER.get(rep.pair)
    return threshold is None or rep.order_eta >= threshold


def cmd_export_ops(args, cfg):
    pair = spaces.make_pair(cfg.pair, cfg.mesh())
    ops = assembly.assemble(pair)
    out = _outdir(cfg)
    for name in args.ops.split(","):
        if not hasattr(ops, name):
            raise UsageError(f"unknown operator {name!r} (choose from Mu, Meta, G, C, K)")
        path = os.path.join(out, f"{name}.mtx")
        assembly.write_matrix_market(getattr(ops, name), path)
        print(path)
    return True


COMMANDS = {
    "mesh-gen": cmd_mesh_gen,
    "run": cmd_run,
    "balance-test": cmd_balance_test,
    "infsup": cmd_infsup,
    "poisson-check": cmd_poisson_check,
    "spectrum": cmd_spectrum,
    "converge": cmd_converge,
    "export-ops": cmd_export_ops,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="geobalance", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    ps = {name: sub.add_parser(name) for name in COMMANDS}
    for p in ps.values():
        _add_config_flags(p)
    ps["mesh-gen"].add_argument("--out", help="mesh file to write (default stdout)")
    ps["balance-test"].add_argument("--seeds", type=int, default=20)
    ps["balance-test"].add_argument("--jobs", type=int, default=1)
    ps["infsup"].add_argument("--ns", type=_ns, default=(4, 8, 16))
    ps["converge"].add_argument("--ns", type=_ns, default=(4, 8, 16))
    ps["converge"].add_argument("--T", type=float, default=0.5)
    ps["converge"].add_argument("--min-order", type=float, default=None)
    ps["export-ops"].add_argument("--ops", default="Mu,Meta,G,C,K")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        ok = COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (model.SolverError, np.linalg.LinAlgError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
