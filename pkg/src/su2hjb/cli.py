"""Command-line front end: ``solve``, ``trajectory``, ``oracle`` and ``rerun``.

Exit codes: 0 ok, 1 usage or configuration error, 2 solve did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .io import field_meta, load_field, save_raw, write_json, write_metric, write_oracle, write_trajectory, write_values
from .lie import SystemSpec, eq27_system, example31_system, exp_map
from .mesh import OutOfDomain, triangulate_ball
from .oracle import OracleConfig, axis_probes, brute_force_min_time
from .solver import SolverConfig, discretize_controls, solve
from .trajectory import simulate

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

logger = logging.getLogger("su2hjb")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _point(text: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_system(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", choices=["eq27", "example31"], default="eq27")
    p.add_argument("--vbound", type=float, default=10.0, help="control clamp for example31")
    p.add_argument("--spec-file", help="JSON system description (overrides --system)")
    p.add_argument("--rt", type=float, default=0.2, help="target radius")
    p.add_argument("--controls", type=int, default=16, help="control samples")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="su2hjb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve the discrete HJB fixed point")
    _add_system(s)
    s.add_argument("--lambda", dest="lam", type=float, default=None, help="discount; 0 selects minimum time")
    s.add_argument("--h", type=float, default=0.2)
    s.add_argument("--rho", type=float, default=2.5)
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--max-iters", type=int, default=2000)
    s.add_argument("--vcap", type=float, default=None)
    s.add_argument("--init", type=float, default=None, help="initial value on free vertices")
    s.add_argument("--full-steps", action="store_true", help="charge a full step even when the target is entered mid-step")
    s.add_argument("--out", required=True)

    t = sub.add_parser("trajectory", help="simulate optimal trajectories on a solved field")
    t.add_argument("--field", required=True, help="output directory of a previous solve")
    group = t.add_mutually_exclusive_group(required=True)
    group.add_argument("--start", type=_point, action="append", help="chart point x,y,z (repeatable)")
    group.add_argument("--probes", choices=["axes"])
    t.add_argument("--max-steps", type=int, default=1000)
    t.add_argument("--out", default=None, help="defaults to the field directory")

    o = sub.add_parser("oracle", help="brute-force minimum time at probe points")
    _add_system(o)
    group = o.add_mutually_exclusive_group(required=True)
    group.add_argument("--start", type=_point, action="append")
    group.add_argument("--probes", choices=["axes"])
    o.add_argument("--dt", type=float, default=0.01)
    o.add_argument("--quant", type=float, default=None, help="hash spacing (default dt * speed bound)")
    o.add_argument("--tmax", type=float, default=5.0)
    o.add_argument("--out", required=True)

    r = sub.add_parser("rerun", help="repeat a run from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    return parser


def load_system(args) -> tuple[SystemSpec, dict]:
    """System plus any extra keys (e.g. a default ``lambda``) from a spec file."""
    if args.spec_file:
        try:
            with open(args.spec_file) as fh:
                d = json.load(fh)
            return SystemSpec.from_dict(d), d
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read spec file: {exc}") from None
    if args.system == "example31":
        return example31_system(args.vbound), {}
    return eq27_system(), {}


def _starts(args) -> np.ndarray:
    return axis_probes() if args.probes == "axes" else np.array(args.start, dtype=float)


def _manifest(command: str, args, spec: SystemSpec, **extra) -> dict:
    echo = {k: v for k, v in vars(args).items() if k not in ("out", "verbose", "func")}
    out = {"tool": "su2hjb", "version": __version__, "command": command, "args": echo, "system": spec.to_dict()}
    out.update(extra)
    return out


def cmd_solve(args) -> int:
    spec, extra = load_system(args)
    lam = args.lam if args.lam is not None else float(extra.get("lambda", 0.5))
    config = SolverConfig(
        lam=lam,
        control_samples=args.controls,
        eps_stop=args.eps,
        max_iters=args.max_iters,
        v_cap=args.vcap,
        init_value=args.init,
        exact_exit=not args.full_steps,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    mesh = triangulate_ball(args.rho, args.rt, args.h)
    t1 = time.perf_counter()
    vf = solve(mesh, spec, config)
    t2 = time.perf_counter()
    write_values(out / "values.csv", mesh, vf)
    write_metric(out / "metric.csv", vf.metric_history)
    save_raw(out / "field.npy", vf)
    manifest = _manifest(
        "solve",
        args,
        spec,
        mesh={"rho": args.rho, "r_T": args.rt, "h": args.h, "vertices": mesh.n_vertices, "simplices": mesh.n_simplices},
        solver={
            "lam": config.lam,
            "control_samples": config.control_samples,
            "eps_stop": config.eps_stop,
            "max_iters": config.max_iters,
            "v_cap": config.v_cap,
            "init_value": config.init_value,
            "exact_exit": config.exact_exit,
        },
        field=field_meta(vf),
        timings={"mesh_s": t1 - t0, "solve_s": t2 - t1},
    )
    write_json(out / "manifest.json", manifest)
    logger.info("%d vertices, %d iterations, residual %.3g", mesh.n_vertices, vf.iterations, vf.residual)
    if not vf.converged:
        print(f"not converged after {vf.iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_trajectory(args) -> int:
    src = Path(args.field)
    try:
        with open(src / "manifest.json") as fh:
            solved = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solve manifest: {exc}") from None
    if solved.get("command") != "solve":
        raise ConfigError(f"{src} does not hold a solve run")
    spec = SystemSpec.from_dict(solved["system"])
    geo = solved["mesh"]
    mesh = triangulate_ball(geo["rho"], geo["r_T"], geo["h"])
    controls = discretize_controls(spec, solved["solver"]["control_samples"])
    vf = load_field(src / "field.npy", src / "values.csv", src / "metric.csv", solved["field"], controls)
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    starts = _starts(args)
    t0 = time.perf_counter()
    records = []
    for p in starts:
        try:
            records.append(simulate(mesh, spec, vf, exp_map(p), args.max_steps))
        except OutOfDomain:
            raise ConfigError(f"start {p.tolist()} is outside the meshed region") from None
    files = []
    for k, rec in enumerate(records):
        name = f"traj_{k:02d}.csv"
        write_trajectory(out / name, rec)
        files.append({"file": name, "start": starts[k].tolist(), "total_time": rec.total_time, "reached_target": rec.reached_target, "out_of_domain": rec.out_of_domain})
    manifest = _manifest("trajectory", args, spec, source_manifest=solved, trajectories=files, timings={"simulate_s": time.perf_counter() - t0})
    write_json(out / "trajectory_manifest.json", manifest)
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec, _ = load_system(args)
    cfg = OracleConfig(dt=args.dt, q=args.quant, n_controls=args.controls, t_max=args.tmax)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    starts = _starts(args)
    t0 = time.perf_counter()
    times = [brute_force_min_time(spec, exp_map(p), args.rt, cfg) for p in starts]
    write_oracle(out / "oracle.csv", starts, times)
    manifest = _manifest(
        "oracle",
        args,
        spec,
        oracle={"dt": cfg.dt, "q": cfg.q, "n_controls": cfg.n_controls, "t_max": cfg.t_max, "r_T": args.rt},
        timings={"search_s": time.perf_counter() - t0},
    )
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def cmd_rerun(args) -> int:
    try:
        with open(args.manifest) as fh:
            m = json.load(fh)
        saved, command = m["args"], m["command"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from None
    replay = argparse.Namespace(**saved)
    replay.out = args.out
    return COMMANDS[command](replay)


COMMANDS = {"solve": cmd_solve, "trajectory": cmd_trajectory, "oracle": cmd_oracle, "rerun": cmd_rerun}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"su2hjb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
