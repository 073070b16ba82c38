"""Command-line entry point: ``pipebot <subcommand> --config FILE ...``.

Exit codes: 0 success, 1 numerical failure, 2 simulated plant diverged,
3 bad config or scenario.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import load_config, scenario_from_table, tomllib
from .lqr import ConvergenceError, SynthesisError
from .params import ConfigError
from .plant import NoEquilibriumError
from .power import extreme_current_draw, peak_wheel_torque, size_battery
from .sim import PRESETS, design, export_csv, run_scenario
from .spring import default_H_grid, stiffness_curve, write_curve_csv

EXIT_OK, EXIT_NUMERIC, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2, 3


def _matrix(name: str, M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=complex if np.iscomplexobj(M) else float))
    rows = [" ".join(f"{v: .9g}" for v in row) for row in M]
    return f"{name} ({M.shape[0]}x{M.shape[1]}):\n" + "\n".join("  " + r for r in rows)


def cmd_characterize_spring(args, out) -> int:
    cfg = load_config(args.config)
    grid = default_H_grid(cfg.geometry, args.grid or cfg.spring_grid)
    res = stiffness_curve(cfg.geometry, cfg.friction, cfg.traction_fs, grid, cfg.body.gravity)
    print(f"K_required_N_per_m = {res.K_required:.9g}", file=out)
    print(f"H_at_max_m = {res.H_at_max:.9g}", file=out)
    print(f"theta_at_max_rad = {res.theta_at_max:.9g}", file=out)
    print(f"at_endpoint = {str(res.at_endpoint).lower()}", file=out)
    print(f"grid_points = {len(grid)}", file=out)
    if args.csv:
        write_curve_csv(res, args.csv)
    return EXIT_OK


def cmd_size_battery(args, out) -> int:
    cfg = load_config(args.config)
    p, m = cfg.power, cfg.motor
    tau = peak_wheel_torque(p.extreme_traction_total, cfg.geometry.wheel_radius_R, p.n_motors)
    draw = extreme_current_draw(m, tau, p.n_motors)
    plan = size_battery(m, cfg.battery, args.h0 if args.h0 is not None else p.h_initial,
                        args.tol if args.tol is not None else p.tolerance, draw,
                        p.n_motors, p.max_iterations)
    print(f"capacity_Ah = {plan.capacity_C:.9g}", file=out)
    print(f"operation_hours = {plan.operation_hours:.9g}", file=out)
    print(f"discharge_hours = {plan.discharge_hours:.9g}", file=out)
    print(f"current_draw_A = {draw:.9g}", file=out)
    print(f"iterations = {plan.iterations}", file=out)
    print(f"converged = {str(plan.converged).lower()}", file=out)
    return EXIT_OK if plan.converged else EXIT_NUMERIC


def cmd_lqr_design(args, out) -> int:
    cfg = load_config(args.config)
    _, lin, gain = design(cfg)
    eig = gain.closed_loop_eigenvalues(lin.A2, lin.B2)
    blocks = [_matrix("u0", lin.trim_input_u0[None, :]), _matrix("A2", lin.A2),
              _matrix("B2", lin.B2), _matrix("K", gain.K), _matrix("P", gain.P)]
    print("\n".join(blocks), file=out)
    print(f"residual = {gain.residual:.3e}", file=out)
    print("closed_loop_eigenvalues:", file=out)
    for lam in sorted(eig, key=lambda z: (z.real, z.imag)):
        print(f"  {lam.real: .9g} {lam.imag:+.9g}j", file=out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["matrix", "row", "col", "value"])
            for name, M in (("A2", lin.A2), ("B2", lin.B2), ("K", gain.K), ("P", gain.P)):
                for (i, j), v in np.ndenumerate(M):
                    w.writerow([name, i, j, f"{v:.9g}"])
    return EXIT_OK


def _scenario(spec: str | None, cfg):
    if spec is None:
        return cfg.scenario
    if spec in PRESETS:
        return PRESETS[spec]
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"unknown scenario {spec!r}; presets: {', '.join(PRESETS)}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse scenario file {spec}: {exc}") from None
    return scenario_from_table(doc.get("scenario", doc), cfg.scenario)


def cmd_simulate(args, out) -> int:
    cfg = load_config(args.config)
    scenario = _scenario(args.scenario, cfg)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    result = run_scenario(scenario, cfg)
    if args.csv:
        export_csv(result.telemetry, args.csv)
    s = result.summary

    def fmt(v):
        return "unattained" if v is None else f"{v:.6g}"

    print(f"scenario = {scenario.name}", file=out)
    print(f"ticks = {len(result.telemetry)}", file=out)
    print(f"settle_time_phi_s = {fmt(s.settle_time_phi)}", file=out)
    print(f"settle_time_psi_s = {fmt(s.settle_time_psi)}", file=out)
    print(f"velocity_rise_time_s = {fmt(s.velocity_rise_time)}", file=out)
    print(f"max_rate_after_transient_deg_s = {fmt(s.max_rate_after_transient)}", file=out)
    print(f"final_band_phi_deg = {fmt(s.final_band_phi)}", file=out)
    print(f"final_band_psi_deg = {fmt(s.final_band_psi)}", file=out)
    print(f"slip = {str(result.slip_seen).lower()}", file=out)
    if result.diverged:
        print(f"diverged: {result.report}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pipebot", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize-spring", help="stiffness curve and K_required")
    p.add_argument("--config")
    p.add_argument("--grid", type=int, help="number of H grid points")
    p.add_argument("--csv", help="write the (H, theta, G) curve here")
    p.set_defaults(func=cmd_characterize_spring)

    p = sub.add_parser("size-battery", help="battery capacity and operation duration")
    p.add_argument("--config")
    p.add_argument("--h0", type=float, help="initial duration guess, hours")
    p.add_argument("--tol", type=float, help="convergence tolerance, hours")
    p.set_defaults(func=cmd_size_battery)

    p = sub.add_parser("lqr-design", help="trim, linearization and LQR gain")
    p.add_argument("--config")
    p.add_argument("--csv", help="write A2, B2, K, P entries here")
    p.set_defaults(func=cmd_lqr_design)

    p = sub.add_parser("simulate", help="closed-loop scenario run")
    p.add_argument("--config")
    p.add_argument("--scenario", help=f"preset ({', '.join(PRESETS)}) or TOML file")
    p.add_argument("--csv", help="write per-tick telemetry here")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (SynthesisError, ConvergenceError, NoEquilibriumError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        # ValidationError and bad command-line values are ValueErrors too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

if __name__ == "__main__":
    sys.exit(main())
