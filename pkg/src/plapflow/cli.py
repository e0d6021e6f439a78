"""Command line front end: meshes, solves, flows, reports.

All file outputs are deterministic for fixed inputs and seed: CSV floats
are written with ``repr`` and JSON documents with sorted keys, so repeated
runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from plapflow import ioutil
from plapflow.flow import constant_source, diagnostics, evolve
from plapflow.limitdyn import (LipschitzConstraintSet, ProjectionResolvent,
                               example1_exact, example2_exact,
                               make_sandpile_state, project_Ainf,
                               sandpile_exact, uniform_phase_speed)
from plapflow.mesh import (boundary_pairwise_distances, build_interval_mesh,
                           build_polygon_mesh, mesh_from_json, mesh_to_json,
                           square_mesh)
from plapflow.mosco import resolvent_convergence_test
from plapflow.penergy import PEnergyConfig, PProxResolvent, prox_Ep, p_extension
from plapflow.suite import DEFAULT_SEED, format_report, run_suite
from plapflow.transport import solve_dual, solve_primal, verify_potential

log = logging.getLogger("plapflow")


def _out(args, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = Path(args.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_mesh(args):
    return mesh_from_json(Path(args.mesh).read_text())


def _load_geo(args, mesh):
    if getattr(args, "geo", None):
        return ioutil.geodesic_from_json(Path(args.geo).read_text())
    log.info("no geodesic table given; computing from the mesh")
    return boundary_pairwise_distances(mesh)


def _json_dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def cmd_mesh(args):
    if args.shape == "interval":
        if args.n is None:
            raise SystemExit("interval meshes need --n")
        mesh = build_interval_mesh(args.n)
    elif args.shape == "square":
        if args.h is None:
            raise SystemExit("square meshes need --h")
        mesh = square_mesh(args.h)
    else:
        if args.h is None or not args.vertices:
            raise SystemExit("polygon meshes need --h and --vertices")
        verts = np.array([[float(c) for c in pt.split(",")]
                          for pt in args.vertices.split(";")])
        mesh = build_polygon_mesh(verts, args.h)
    _out(args, args.out).write_text(mesh_to_json(mesh))
    if args.geo_out:
        geo = boundary_pairwise_distances(mesh)
        _out(args, args.geo_out).write_text(ioutil.geodesic_to_json(geo))
    log.info("mesh: %d nodes, %d boundary", mesh.n_nodes, mesh.n_boundary)
    return 0


def cmd_extend(args):
    mesh = _load_mesh(args)
    u = ioutil.boundary_field_from_csv(mesh, Path(args.boundary).read_text())
    v = p_extension(mesh, u, PEnergyConfig(p=args.p))
    _out(args, args.out).write_text(ioutil.interior_field_to_csv(v))
    return 0


def cmd_prox_ep(args):
    mesh = _load_mesh(args)
    g = ioutil.boundary_field_from_csv(mesh, Path(args.infile).read_text())
    v = prox_Ep(mesh, g, args.lam, PEnergyConfig(p=args.p))
    _out(args, args.out).write_text(ioutil.boundary_field_to_csv(mesh, v))
    return 0


def cmd_project(args):
    mesh = _load_mesh(args)
    geo = _load_geo(args, mesh)
    g = ioutil.boundary_field_from_csv(mesh, Path(args.infile).read_text())
    v, info = project_Ainf(g, LipschitzConstraintSet(geodesic=geo),
                           mesh.boundary_weights)
    log.info("projection: %d cycles, violation %.2e",
             info["cycles"], info["max_violation"])
    _out(args, args.out).write_text(ioutil.boundary_field_to_csv(mesh, v))
    return 0


def cmd_evolve(args):
    mesh = _load_mesh(args)
    if args.u0:
        u0 = ioutil.boundary_field_from_csv(mesh, Path(args.u0).read_text())
    else:
        u0 = np.zeros(mesh.n_boundary)
    f = ioutil.source_from_json(mesh, Path(args.source).read_text())
    if args.functional == "ep":
        cfg = PEnergyConfig(p=args.p)
        resolvent = PProxResolvent(mesh, cfg)
    else:
        geo = _load_geo(args, mesh)
        resolvent = ProjectionResolvent(
            LipschitzConstraintSet(geodesic=geo), mesh.boundary_weights)
    traj = evolve(resolvent, u0, f, T=args.T, tau=args.tau)
    _out(args, args.out).write_text(ioutil.trajectory_to_csv(mesh, traj))
    if args.report:
        if args.functional == "ep":
            rep = diagnostics(traj, mesh, cfg, f)
            doc = {"sup_abs_u": rep.sup_abs_u,
                   "time_integral_ut_sq": rep.time_integral_ut_sq,
                   "grad_p_norm": rep.grad_p_norm,
                   "mass_balance_residual": rep.mass_balance_residual}
        else:
            sigma = mesh.boundary_weights
            doc = {"sup_abs_u": float(np.abs(traj.states).max()),
                   "final_mass": float((sigma * traj.states[-1]).sum())}
        _out(args, args.report).write_text(_json_dump(doc))
    return 0


def cmd_sandpile(args):
    mesh = _load_mesh(args)
    gamma = json.loads(Path(args.gamma).read_text())["nodes"]
    state = make_sandpile_state(mesh, gamma)
    u = sandpile_exact(state, mesh, args.t)
    _out(args, args.out).write_text(ioutil.boundary_field_to_csv(mesh, u))
    log.info("pile height %.6f, late-time speed %.6f",
             state.height(args.t), uniform_phase_speed(state))
    return 0


def cmd_example(args):
    out_dir = Path(args.out_dir)
    if args.id == 1:
        mesh = build_interval_mesh(4)
        u0 = np.zeros(2)
        exact = example1_exact
    elif args.id == 2:
        vals = [float(x) for x in args.u0.split(",")] if args.u0 else [0.3, 0.0]
        mesh = build_interval_mesh(4)
        u0 = np.array(vals)
        exact = lambda t: example2_exact(u0[0], u0[1], t)  # noqa: E731
    else:
        mesh = square_mesh(args.h)
        bn = mesh.boundary_nodes
        gamma = bn[np.abs(mesh.nodes[bn][:, 1]) < 1e-12]
        state = make_sandpile_state(mesh, gamma)
        exact = lambda t: sandpile_exact(state, mesh, t)  # noqa: E731
        u0 = np.zeros(mesh.n_boundary)

    times = np.round(np.arange(0.0, args.T + 1e-12, args.tau), 12)
    rows = ["t,node_index,value"]
    for t in times:
        for n, v in zip(mesh.boundary_nodes, np.atleast_1d(exact(float(t)))):
            rows.append(f"{float(t)!r},{int(n)},{float(v)!r}")
    (_out(args, f"example{args.id}_exact.csv")).write_text("\n".join(rows) + "\n")

    summary = {"id": args.id, "tau": args.tau, "T": args.T}
    if args.simulate:
        geo = boundary_pairwise_distances(mesh)
        res = ProjectionResolvent(LipschitzConstraintSet(geodesic=geo),
                                  mesh.boundary_weights)
        if args.id == 3:
            from plapflow.flow import indicator_source
            f = indicator_source(mesh, gamma)
        else:
            f = constant_source([0.0, 1.0])
        traj = evolve(res, u0, f, T=args.T, tau=args.tau)
        _out(args, f"example{args.id}_flow.csv").write_text(
            ioutil.trajectory_to_csv(mesh, traj))
        sup = max(float(np.abs(traj.states[k] - exact(float(t))).max())
                  for k, t in enumerate(traj.times))
        summary["sup_error_vs_exact"] = sup
        if args.id == 3:
            sigma = mesh.boundary_weights
            summary["mass_rel_err"] = max(
                abs(float((sigma * traj.states[k]).sum()) - t * state.gamma_mass)
                / (t * state.gamma_mass)
                for k, t in enumerate(traj.times) if t > 0)
    _out(args, f"example{args.id}_summary.json").write_text(_json_dump(summary))
    print(_json_dump(summary), end="")
    return 0


def cmd_transport(args):
    geo = ioutil.geodesic_from_json(Path(args.geo).read_text())
    _, mu = ioutil.field_from_csv(Path(args.mu).read_text())
    _, nu = ioutil.field_from_csv(Path(args.nu).read_text())
    plan = solve_primal(mu, nu, geo)
    rows = ["i,j,mass"]
    for i in range(plan.theta.shape[0]):
        for j in range(plan.theta.shape[1]):
            if plan.theta[i, j] > 1e-14:
                rows.append(f"{i},{j},{float(plan.theta[i, j])!r}")
    _out(args, args.out).write_text("\n".join(rows) + "\n")
    if args.dual:
        v, val = solve_dual(mu - nu, geo)
        _out(args, args.dual).write_text(ioutil.field_to_csv(range(len(v)), v))
        log.info("dual value %.9g", val)
    log.info("primal cost %.9g (certified gap %.2e)", plan.cost, plan.gap)
    return 0


def cmd_verify_potential(args):
    mesh = _load_mesh(args)
    geo = _load_geo(args, mesh)
    traj = ioutil.trajectory_from_csv(mesh, Path(args.traj).read_text())
    f = ioutil.source_from_json(mesh, Path(args.source).read_text())
    k = int(np.argmin(np.abs(traj.times - args.t)))
    k = min(max(k, 1), len(traj.times) - 2)
    rep = verify_potential(traj, f, geo, mesh.boundary_weights, k)
    doc = {"t": rep.t, "delta_sum": rep.delta_sum,
           "transport_applicable": rep.transport_applicable,
           "value_at_state": rep.value_at_u,
           "value_at_state_printed_sign": rep.value_at_u_printed_sign,
           "value_optimal": rep.value_opt,
           "rel_gap": rep.rel_gap,
           "lipschitz_violation": rep.max_violation}
    text = _json_dump(doc)
    _out(args, args.report).write_text(text)
    print(text, end="")
    return 0


def cmd_mosco(args):
    mesh = _load_mesh(args)
    geo = _load_geo(args, mesh)
    g = ioutil.boundary_field_from_csv(mesh, Path(args.g).read_text())
    lambdas = [float(x) for x in args.lambdas.split(",")]
    ladder = [float(x) for x in args.pladder.split(",")]
    rep = resolvent_convergence_test(g, lambdas, ladder, mesh, geo)
    doc = {"lambdas": list(rep.lambdas),
           "p_ladder": list(rep.p_ladder),
           "resolvent_errors": [[None if np.isnan(x) else x for x in row]
                                for row in rep.resolvent_errors],
           "prox_violations": [[None if np.isnan(x) else x for x in row]
                               for row in rep.prox_violations],
           "failures": [list(map(str, c)) for c in rep.cell_errors],
           "projection": rep.projection.tolist()}
    text = _json_dump(doc)
    _out(args, args.report).write_text(text)
    print(text, end="")
    return 0


def cmd_suite(args):
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    cases = 100
    if args.config:
        text = Path(args.config).read_text().strip()
        if not text:
            raise SystemExit("suite config file is empty")
        doc = json.loads(text)
        if not isinstance(doc, dict) or not doc:
            raise SystemExit("suite config must be a non-empty JSON object")
        seed = int(doc.get("seed", seed))
        cases = int(doc.get("cases", cases))
    records = run_suite(seed=seed, cases=cases)
    print(format_report(records))
    if args.report:
        _out(args, args.report).write_text(
            _json_dump([r.to_json() for r in records]))
    return 0 if all(r.passed for r in records) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plapflow",
        description="boundary flows of the p-Dirichlet energy and their "
                    "unit-Lipschitz limit")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for randomized suites")
    ap.add_argument("--out-dir", default=".", help="directory for outputs")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build and export a mesh")
    p.add_argument("--shape", choices=["interval", "square", "polygon"],
                   required=True)
    p.add_argument("--n", type=int, help="interval segment count")
    p.add_argument("--h", type=float, help="target edge length")
    p.add_argument("--vertices", help="polygon as x1,y1;x2,y2;...")
    p.add_argument("--out", required=True)
    p.add_argument("--geo-out", help="also write the geodesic table")
    p.set_defaults(fn=cmd_mesh)

    p = sub.add_parser("extend", help="minimal p-energy extension")
    p.add_argument("--mesh", required=True)
    p.add_argument("--boundary", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_extend)

    p = sub.add_parser("prox-ep", help="resolvent of the p-energy")
    p.add_argument("--mesh", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_prox_ep)

    p = sub.add_parser("project", help="projection onto the Lipschitz set")
    p.add_argument("--mesh", required=True)
    p.add_argument("--geo")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("evolve", help="implicit-Euler boundary flow")
    p.add_argument("--functional", choices=["ep", "einf"], required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--geo")
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--u0", help="initial boundary field CSV (default zero)")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("sandpile", help="closed-form growth-law profile")
    p.add_argument("--mesh", required=True)
    p.add_argument("--gamma", required=True,
                   help='JSON file {"nodes": [i, ...]}')
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sandpile)

    p = sub.add_parser("example", help="reference example trajectories")
    p.add_argument("--id", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=2.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--u0", help="two comma-separated start values (id 2)")
    p.add_argument("--simulate", action="store_true",
                   help="also run the limit flow and report errors")
    p.set_defaults(fn=cmd_example)

    p = sub.add_parser("transport", help="optimal coupling and potential")
    p.add_argument("--geo", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dual")
    p.set_defaults(fn=cmd_transport)

    p = sub.add_parser("verify-potential",
                       help="duality check of a flow state")
    p.add_argument("--mesh", required=True)
    p.add_argument("--geo")
    p.add_argument("--traj", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_verify_potential)

    p = sub.add_parser("mosco", help="resolvent-convergence table")
    p.add_argument("--mesh", required=True)
    p.add_argument("--geo")
    p.add_argument("--g", required=True)
    p.add_argument("--lambdas", default="0.5,1,2")
    p.add_argument("--pladder", default="4,8,16,32,64")
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_mosco)

    p = sub.add_parser("suite", help="run the acceptance checks")
    p.add_argument("--config", help="JSON config {seed, cases}")
    p.add_argument("--report")
    p.set_defaults(fn=cmd_suite)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), 30),
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
