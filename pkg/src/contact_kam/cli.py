"""Command-line front end.

    contact-kam <command> --config <path> [flags]

Commands: parse-check, evolve, solve, action, orbit, fixed-points, manifold,
connect, classify, verify, reproduce-ex63.  Every command writes its outputs
plus a manifest (inputs, config hash, produced files) into the output
directory; report-style commands also render SVG figures next to the CSVs.

Exit codes: 0 success, 1 usage error, 2 config or expression error,
3 numerical failure, 4 precondition violation.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import asymptotic as asy
from . import io as ckio
from . import plots
from .config import ConfigError, EX63_CONFIG, RunConfig, config_from_dict, load_config
from .expr import ExprDomainError, ExprNameError, ExprSyntaxError, parse_expression
from .flow import BlowUpError, find_fixed_points, integrate_orbit, trace_invariant_manifold
from .geometry import ScalarField
from .variational import action_table, semigroup_evolve, weak_kam_limit

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 4


def _thread_cap() -> int:
    raw = os.environ.get("CONTACT_KAM_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError as err:
        raise ConfigError(f"CONTACT_KAM_THREADS must be an integer: {raw!r}") from err
    if cap < 1:
        raise ConfigError("CONTACT_KAM_THREADS must be >= 1")
    return cap


def _outdir(cfg: RunConfig, override: str | None) -> str:
    out = override or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _phi_arg(cfg: RunConfig, source: str | None) -> ScalarField:
    if source and source.startswith("@"):
        return ckio.read_field_csv(source[1:])
    return cfg.phi_field(source)


def cmd_parse_check(cfg: RunConfig, args) -> int:
    checked = []
    if cfg.model.kind == "general":
        checked.append("H")
    else:
        checked.append("V")
        checked.append("lambda")
    if args.phi and not args.phi.startswith("@"):
        parse_expression(args.phi)
        checked.append("phi")
    elif cfg.phi_source:
        parse_expression(cfg.phi_source)
        checked.append("phi")
    print(f"parse-check: ok ({', '.join(checked)}); "
          f"Lambda = {cfg.model.u_lipschitz_bound():.6g}")
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    phi = _phi_arg(cfg, args.phi)
    params = cfg.lax_params()
    t_final = args.t if args.t is not None else 1.0
    snaps = semigroup_evolve(cfg.model, phi, params, t_final, args.direction,
                             snapshot_every=args.snapshot_every)
    outputs = []
    for t, fld in snaps:
        name = f"evolve_{args.direction}_t{t:08.3f}.csv".replace(" ", "0")
        ckio.write_field_csv(os.path.join(out, name), fld)
        outputs.append(name)
    fig = f"evolve_{args.direction}.svg"
    plots.plot_fields(os.path.join(out, fig),
                      [(f"t={t:.3f}", fld) for t, fld in snaps],
                      title=f"semigroup evolution ({args.direction})")
    outputs.append(fig)
    ckio.write_manifest(out, "evolve", cfg.config_hash, _inputs(args), outputs)
    print(f"evolve: {len(snaps)} snapshots to t={snaps[-1][0]:.3f} -> {out}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    phi = _phi_arg(cfg, args.phi)
    params = cfg.lax_params()
    num = cfg.numerics
    res = weak_kam_limit(cfg.model, phi, params, args.direction,
                         tol=num["tol"], t_max=num["t_max"], window=num["window"])
    name = "u_minus.csv" if args.direction == "backward" else "u_plus.csv"
    ckio.write_field_csv(os.path.join(out, name), res.field)
    summary = name.replace(".csv", "_summary.txt")
    ckio.write_keyvalues(os.path.join(out, summary), {
        "status": res.status,
        "residual": res.residual,
        "elapsed": res.elapsed,
        "direction": res.direction,
    })
    fig = name.replace(".csv", ".svg")
    plots.plot_fields(os.path.join(out, fig), [(name[:-4], res.field)],
                      title=f"weak KAM limit ({args.direction})")
    ckio.write_manifest(out, "solve", cfg.config_hash, _inputs(args),
                        [name, summary, fig])
    print(f"solve: {res.status} after t={res.elapsed:.2f} "
          f"(residual {res.residual:.3g}) -> {out}/{name}")
    return EXIT_OK if res.converged else EXIT_NUMERICAL


def cmd_action(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    params = cfg.lax_params()
    t_final = args.t if args.t is not None else 1.0
    steps = max(1, int(round(t_final / params.tau)))
    table = action_table(cfg.model, args.x0, args.u0, params, steps, args.direction)
    name = f"action_{args.direction}.csv"
    ckio.write_table_csv(os.path.join(out, name), table)
    ckio.write_manifest(out, "action", cfg.config_hash, _inputs(args), [name])
    print(f"action: {steps} layers from ({args.x0:.4g}, {args.u0:.4g}) -> {out}/{name}")
    return EXIT_OK


def cmd_orbit(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    t_final = args.t if args.t is not None else 5.0
    z0 = (args.x0, args.u0, args.p0)
    blew_up = False
    try:
        orbit = integrate_orbit(cfg.model, z0, (0.0, t_final), h=args.step,
                                u_max=cfg.numerics["u_clip"])
    except BlowUpError as err:
        orbit = err.orbit
        blew_up = True
    name = "orbit.csv"
    ckio.write_orbit_csv(os.path.join(out, name), orbit, thin=args.thin)
    fig = "orbit.svg"
    plots.plot_orbit_xu(os.path.join(out, fig), cfg.model,
                        [("orbit", "firebrick", orbit)], title="orbit, (x,u) projection")
    ckio.write_manifest(out, "orbit", cfg.config_hash, _inputs(args), [name, fig])
    state = "blow-up" if blew_up else "completed"
    print(f"orbit: {state} at t={orbit.ts[-1]:.3f} -> {out}/{name}")
    return EXIT_OK


def cmd_fixed_points(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    infos = find_fixed_points(cfg.model)
    name = "fixed_points.csv"
    with open(os.path.join(out, name), "w") as fh:
        fh.write("x,u,p,residual,isolated,stable_dim,unstable_dim,"
                 "eig1_re,eig1_im,eig2_re,eig2_im,eig3_re,eig3_im\n")
        for info in infos:
            eigs = list(info.eigenvalues)
            row = [info.point[0], info.point[1], info.point[2], info.residual,
                   int(info.isolated), info.stable_dim, info.unstable_dim]
            row += [c for s in eigs for c in (s.real, s.imag)]
            fh.write(",".join(ckio.fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    ckio.write_manifest(out, "fixed-points", cfg.config_hash, _inputs(args), [name])
    print(f"fixed-points: {len(infos)} found -> {out}/{name}")
    return EXIT_OK


def cmd_manifold(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    infos = find_fixed_points(cfg.model)
    if not infos:
        print("manifold: no fixed points found", file=sys.stderr)
        return EXIT_NUMERICAL
    pick = min(infos, key=lambda f: abs(f.x - args.x0) + abs(f.u - args.u0))
    branch = +1 if args.branch == "plus" else -1
    t_final = args.t if args.t is not None else 10.0
    try:
        orbit = trace_invariant_manifold(cfg.model, pick, args.direction,
                                         branch=branch, offset=args.offset,
                                         t_max=t_final, h=args.step)
    except ValueError as err:
        print(f"manifold: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except BlowUpError as err:
        orbit = err.orbit
    name = f"manifold_{args.direction}_{args.branch}.csv"
    ckio.write_orbit_csv(os.path.join(out, name), orbit, thin=args.thin)
    fig = name.replace(".csv", ".svg")
    plots.plot_orbit_xu(os.path.join(out, fig), cfg.model,
                        [("manifold", "steelblue", orbit)],
                        points=[(pick.x, pick.u)],
                        title=f"{args.direction} manifold trace")
    ckio.write_manifest(out, "manifold", cfg.config_hash, _inputs(args), [name, fig])
    h_max = float(np.max(np.abs(orbit.energies())))
    print(f"manifold: traced from ({pick.x:.4f}, {pick.u:.4f}), "
          f"max|H| = {h_max:.3g} -> {out}/{name}")
    return EXIT_OK


def cmd_connect(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    phi = _phi_arg(cfg, args.phi)
    params = cfg.lax_params()
    num = cfg.numerics
    result = asy.heteroclinic_connect(
        cfg.model, phi, params, accept_tol=num["accept_tol"],
        t_span=args.horizon if args.horizon else 15.0,
        tol=num["tol"], t_max=num["t_max"], window=num["window"])
    name = "heteroclinic.csv"
    ckio.write_orbit_csv(os.path.join(out, name), result.orbit, thin=args.thin)
    summary = "heteroclinic_summary.txt"
    ckio.write_keyvalues(os.path.join(out, summary), {
        "epsilon_schedule": " ".join(ckio.fmt(e) for e in result.eps_schedule),
        "epsilon_used": " ".join(ckio.fmt(e) for e in result.eps_used),
        "t_epsilon": " ".join(ckio.fmt(t) for t in result.t_eps),
        "crossing_state": " ".join(ckio.fmt(v) for v in result.crossing_state),
        "alpha_distance": result.alpha_distance,
        "omega_distance": result.omega_distance,
        "alpha_abs_H": result.alpha_abs_h,
        "omega_abs_H": result.omega_abs_h,
        "max_abs_H": result.max_abs_h,
        "accepted": result.accepted,
    })
    ckio.write_field_csv(os.path.join(out, "u_minus.csv"), result.u_minus)
    ckio.write_field_csv(os.path.join(out, "v_plus.csv"), result.v_plus)
    fig = "heteroclinic.svg"
    plots.plot_orbit_xu(os.path.join(out, fig), cfg.model,
                        [("connecting orbit", "firebrick", result.orbit)],
                        fields=[("u_-", result.u_minus), ("v_+", result.v_plus)],
                        points=[(result.alpha_point[0], result.alpha_point[1]),
                                (result.omega_point[0], result.omega_point[1])],
                        title="connecting orbit, (x,u) projection")
    ckio.write_manifest(out, "connect", cfg.config_hash, _inputs(args),
                        [name, summary, "u_minus.csv", "v_plus.csv", fig])
    print(f"connect: endpoint distances alpha={result.alpha_distance:.3g} "
          f"omega={result.omega_distance:.3g}, max|H|={result.max_abs_h:.3g} "
          f"-> {out}/{name}")
    return EXIT_OK if result.accepted else EXIT_NUMERICAL


def cmd_classify(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    phi = _phi_arg(cfg, args.phi)
    params = cfg.lax_params()
    num = cfg.numerics
    back = weak_kam_limit(cfg.model, phi, params, "backward",
                          tol=num["tol"], t_max=num["t_max"], window=num["window"])
    fwd = weak_kam_limit(cfg.model, phi, params, "forward",
                         tol=num["tol"], t_max=num["t_max"], window=num["window"])
    if not (back.converged and fwd.converged):
        print(f"classify: stationary fields did not converge "
              f"({back.status}/{fwd.status})", file=sys.stderr)
        return EXIT_PRECONDITION
    report = asy.classify_minimizer(cfg.model, back.field, fwd.field,
                                    args.x0, args.u0,
                                    class_tol=num["class_tol"], params=params)
    name = "classification.txt"
    ckio.write_keyvalues(os.path.join(out, name), {
        "x0": report.x0,
        "u0": report.u0,
        "case": report.case,
        "u_bar_minus_at_x0": report.u_bar_minus_at_x0,
        "u_under_plus_at_x0": report.u_under_plus_at_x0,
        "predicted": report.predicted,
        "boundary": report.boundary,
        **{f"evidence_{k}": v for k, v in report.evidence.items()},
    })
    ckio.write_manifest(out, "classify", cfg.config_hash, _inputs(args), [name])
    print(f"classify: case {report.case} at ({report.x0:.4g}, {report.u0:.4g}) "
          f"-> {out}/{name}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    from .verify import run_property_suite

    out = _outdir(cfg, args.out)
    results = run_property_suite(trials=args.trials, seed=cfg.numerics["seed"])
    name = "verify.txt"
    ckio.write_keyvalues(os.path.join(out, name),
                         {r.name: ("pass" if r.passed else f"FAIL ({r.detail})")
                          for r in results})
    ckio.write_manifest(out, "verify", cfg.config_hash, _inputs(args), [name])
    failures = 0
    for r in results:
        print(f"  {'pass' if r.passed else 'FAIL'}  {r.name}  [{r.detail}]")
        failures += 0 if r.passed else 1
    print(f"verify: {len(results) - failures}/{len(results)} properties passed")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def cmd_reproduce_ex63(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args.out)
    params = cfg.lax_params()
    num = cfg.numerics
    phi = cfg.phi_field(args.phi if args.phi else "0.2*sin(x)")
    outputs = []

    infos = find_fixed_points(cfg.model)
    with open(os.path.join(out, "fixed_points.csv"), "w") as fh:
        fh.write("x,u,p,residual\n")
        for info in infos:
            fh.write(",".join(ckio.fmt(v) for v in
                              [*info.point, info.residual]) + "\n")
    outputs.append("fixed_points.csv")
    print(f"[1/6] fixed points: {[(round(i.x, 4), round(i.u, 4)) for i in infos]}")

    result = asy.heteroclinic_connect(
        cfg.model, phi, params, accept_tol=num["accept_tol"],
        t_span=args.horizon if args.horizon else 15.0,
        tol=num["tol"], t_max=num["t_max"], window=num["window"])
    ckio.write_field_csv(os.path.join(out, "u_bar_minus.csv"), result.u_minus)
    ckio.write_field_csv(os.path.join(out, "u_under_plus.csv"), result.v_plus)
    outputs += ["u_bar_minus.csv", "u_under_plus.csv"]
    print(f"[2/6] stationary fields: u_-(pi/2)={result.u_minus(np.pi/2):.5f}, "
          f"u_+(-pi/2)={result.v_plus(-np.pi/2):.5f}")

    ckio.write_orbit_csv(os.path.join(out, "heteroclinic.csv"), result.orbit,
                         thin=args.thin)
    ckio.write_keyvalues(os.path.join(out, "heteroclinic_summary.txt"), {
        "epsilon_used": " ".join(ckio.fmt(e) for e in result.eps_used),
        "t_epsilon": " ".join(ckio.fmt(t) for t in result.t_eps),
        "alpha_distance": result.alpha_distance,
        "omega_distance": result.omega_distance,
        "max_abs_H": result.max_abs_h,
    })
    outputs += ["heteroclinic.csv", "heteroclinic_summary.txt"]
    print(f"[3/6] connecting orbit: alpha miss {result.alpha_distance:.2e}, "
          f"omega miss {result.omega_distance:.2e}, max|H| {result.max_abs_h:.3f}")

    low = min(infos, key=lambda f: f.u)
    manifold = trace_invariant_manifold(cfg.model, low, "unstable", branch=+1,
                                        offset=1e-4, t_max=8.0)
    ckio.write_orbit_csv(os.path.join(out, "manifold_unstable.csv"), manifold,
                         thin=args.thin)
    outputs.append("manifold_unstable.csv")
    print(f"[4/6] shell manifold trace: max|H| = "
          f"{float(np.max(np.abs(manifold.energies()))):.2e}")

    rep_g = asy.minimality_test(cfg.model, result.orbit, params, "global",
                                pair_count=12, seed=num["seed"])
    rep_s = asy.minimality_test(cfg.model, result.orbit, params, "semi_static",
                                pair_count=12, seed=num["seed"])
    ckio.write_keyvalues(os.path.join(out, "minimality.txt"), {
        "global_max_defect": rep_g.max_defect,
        "global_pairs": rep_g.pairs_tested,
        "semi_static_max_defect": rep_s.max_defect,
        "semi_static_pairs": rep_s.pairs_tested,
    })
    outputs.append("minimality.txt")
    print(f"[5/6] minimality: global defect {rep_g.max_defect:.3g}, "
          f"semi-static defect {rep_s.max_defect:.3g}")

    plots.plot_orbit_xu(os.path.join(out, "figure_ex63.svg"), cfg.model,
                        [("connecting orbit", "firebrick", result.orbit),
                         ("shell manifold", "steelblue", manifold)],
                        fields=[("u_bar_-", result.u_minus),
                                ("u_under_+", result.v_plus)],
                        points=[(i.x, i.u) for i in infos],
                        title="model system: connecting orbit and shell manifold")
    outputs.append("figure_ex63.svg")
    ckio.write_manifest(out, "reproduce-ex63", cfg.config_hash, _inputs(args),
                        outputs)
    print(f"[6/6] wrote {len(outputs)} files -> {out}")
    return EXIT_OK if result.accepted else EXIT_NUMERICAL


def _inputs(args) -> list[str]:
    out = []
    if getattr(args, "config", None):
        out.append(args.config)
    phi = getattr(args, "phi", None)
    if phi and phi.startswith("@"):
        out.append(phi[1:])
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contact-kam",
        description="Weak KAM toolkit for contact Hamiltonian systems on the circle")
    sub = parser.add_subparsers(dest="command")

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--phi", help="initial field expression or @file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--t", type=float, help="time horizon")
        p.add_argument("--x0", type=float, default=0.0)
        p.add_argument("--u0", type=float, default=0.0)
        p.add_argument("--p0", type=float, default=0.0)
        p.add_argument("--horizon", type=float, help="orbit half-span")
        p.add_argument("--direction", default="backward")
        p.add_argument("--snapshot-every", type=float, default=None)
        p.add_argument("--step", type=float, default=1e-3, help="ODE step size")
        p.add_argument("--thin", type=int, default=10, help="orbit CSV thinning")
        p.add_argument("--offset", type=float, default=1e-4)
        p.add_argument("--branch", default="plus", choices=["plus", "minus"])
        p.add_argument("--trials", type=int, default=25)
        return p

    add("parse-check", cmd_parse_check, help="validate configured expressions")
    add("evolve", cmd_evolve, help="run the solution semigroup")
    add("solve", cmd_solve, help="long-time weak KAM limit")
    add("action", cmd_action, help="implicit action function table")
    add("orbit", cmd_orbit, help="integrate one flow orbit")
    add("fixed-points", cmd_fixed_points, help="locate and linearize fixed points")
    add("manifold", cmd_manifold, help="trace an invariant manifold branch")
    add("connect", cmd_connect, help="connecting orbit between stationary sets")
    add("classify", cmd_classify, help="asymptotic verdict for a seed point")
    add("verify", cmd_verify, help="run the bundled property suite")
    add("reproduce-ex63", cmd_reproduce_ex63,
        help="full pipeline on the bundled model system")
    return parser


def execute(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code not in (0, None) else EXIT_OK
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        _thread_cap()
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = config_from_dict(EX63_CONFIG)
        valid_dirs = {"backward", "forward"} if args.command != "manifold" \
            else {"stable", "unstable"}
        if args.direction not in valid_dirs:
            print(f"{args.command}: --direction must be one of {sorted(valid_dirs)}",
                  file=sys.stderr)
            return EXIT_USAGE
        return args.fn(cfg, args)
    except (ConfigError, ExprSyntaxError, ExprNameError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except asy.PreconditionError as err:
        print(f"precondition violation: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (asy.ClusteringError, BlowUpError, ExprDomainError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
