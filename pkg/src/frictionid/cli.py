"""Command-line front end: simulate, identify, control, compare.

Every command reads one INI config (see ``frictionid.config``), takes an
explicit seed and writes its outputs plus a JSON manifest that records the
config hash, seed and input/output digests.  Outputs are deterministic
functions of config and seed.

Exit codes: 0 success, 2 configuration error (including rejected trajectory
specs), 3 input data/schema error, 4 preprocessing removed all samples,
5 numeric failure (solver or diverging simulation).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, write_default_config
from .dataio import (DataFormatError, read_timeseries_csv, write_closedloop_csv,
                     write_comparison_csv, write_manifest, write_timeseries_csv)
from .dynamics import (DivergenceError, JointState, Plant, linear_interpolant,
                       simulate, zero_order_hold)
from .friction import load_friction_models, save_friction_models
from .mpc import QPSolverError, run_closed_loop
from .nlreg import NlRegConfig, fit_stribeck
from .regression import write_sweep_csv, pareto_sweep, RegressionProblem
from .signals import TVDiffConfig, quantize_measurements, recover_derivatives
from .sindy import (EmptyDatasetError, identify_friction, preprocess_small_angle,
                    residual_friction_torque, trim_edges)
from .trajectory import (TrajectoryLimitError, attach_feedforward,
                         gravity_compensated_pair, single_joint_reference)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EMPTY = 4
EXIT_NUMERIC = 5


def _build_reference(cfg: RunConfig, plant: Plant):
    limit = min(cfg.arm.velocity_limit)
    if cfg.trajectory.pattern == "pair":
        reference = gravity_compensated_pair(cfg.trajectory.spec,
                                             cfg.trajectory.base_pose, limit)
    else:
        reference = single_joint_reference(cfg.trajectory.spec,
                                           cfg.trajectory.moving_joint,
                                           cfg.trajectory.base_pose, limit)
    return attach_feedforward(reference, plant)


def _simulate_measurements(cfg: RunConfig, seed: int):
    truth_plant = Plant(cfg.arm, cfg.truth_friction)
    reference = _build_reference(cfg, truth_plant)
    interp = (linear_interpolant if cfg.simulate.torque_interpolation == "linear"
              else zero_order_hold)
    u_of_t = interp(reference.t, reference.u_ff)
    dt = cfg.simulate.dt_internal
    n_steps = int(round(cfg.trajectory.spec.duration / dt))
    rollout = simulate(truth_plant, u_of_t,
                       JointState(reference.y_des[0], reference.ydot_des[0]),
                       dt, n_steps)
    stride = max(int(round(cfg.trajectory.spec.sample_dt / dt)), 1)
    sampled = rollout.every(stride)
    if cfg.simulate.apply_encoder:
        sampled = quantize_measurements(sampled, cfg.encoder, seed)
    return sampled, reference


def cmd_simulate(cfg: RunConfig, seed: int, out: Path, config_path) -> int:
    start = time.monotonic()
    sampled, _ = _simulate_measurements(cfg, seed)
    write_timeseries_csv(out, sampled)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "simulate",
                   config_path, seed, [], [out], time.monotonic() - start)
    print(f"simulate: wrote {len(sampled)} samples to {out}")
    return EXIT_OK


def _identification_datasets(cfg: RunConfig, data, jobs: int):
    """TVDiff recovery, residual extraction and preprocessing for both joints."""
    tvdiff_log = []
    if cfg.tvdiff.enabled:
        cfg_vel = TVDiffConfig(cfg.tvdiff.alpha_velocity, cfg.tvdiff.iterations,
                               data.dt, cfg.tvdiff.epsilon)
        cfg_acc = TVDiffConfig(cfg.tvdiff.alpha_acceleration,
                               cfg.tvdiff.iterations, data.dt,
                               cfg.tvdiff.epsilon)
        ydot, yddot, results = recover_derivatives(data.y, data.dt, cfg_vel,
                                                   cfg_acc)
        for i, res in enumerate(results):
            tvdiff_log.append(
                f"pass {i}: converged={res.converged} "
                f"iterations={res.iterations_run} residual={res.residual:.3e} "
                f"objective={res.objective_history[-1]:.6e}")
        data = type(data)(data.t, data.y, ydot, yddot, data.u)

    nominal = Plant(cfg.arm, None)
    datasets = residual_friction_torque(nominal, data,
                                        provenance={"tvdiff": cfg.tvdiff.enabled})
    out = []
    for joint, ds in enumerate(datasets):
        angle = data.y[:, joint]
        if cfg.tvdiff.edge_trim:
            n = cfg.tvdiff.edge_trim
            angle = angle[n:len(ds) - n]
            ds = trim_edges(ds, n)
        if cfg.solver.preprocess_angle_threshold is not None:
            ds = preprocess_small_angle(ds, angle,
                                        cfg.solver.preprocess_angle_threshold)
        out.append(ds)
    return out, tvdiff_log


def cmd_identify(cfg: RunConfig, seed: int, data_path: Path, out: Path,
                 method: str | None, jobs: int, config_path) -> int:
    start = time.monotonic()
    data = read_timeseries_csv(data_path)
    method = method or cfg.solver.method
    datasets, tvdiff_log = _identification_datasets(cfg, data, jobs)

    models = []
    report = {"method": method, "seed": seed, "joints": []}
    history_rows = []
    sweep_payload = None
    for ds in datasets:
        if method == "nlreg":
            model, diag = fit_stribeck(ds, NlRegConfig())
            entry = {
                "joint": ds.joint + 1,
                "parameters": model.as_array.tolist(),
                "rmse": diag.rmse,
                "iterations": diag.iterations,
                "converged": diag.converged,
                "clamped": diag.clamped,
            }
            history_rows.extend(
                (ds.joint + 1, i, obj)
                for i, obj in enumerate(diag.objective_history))
        else:
            solver = "lasso_cv" if method == "lasso" else "stls"
            model, diag = identify_friction(
                ds, method=solver, threshold=cfg.solver.stls_threshold,
                lambdas=cfg.solver.lasso_grid, cv_folds=cfg.solver.cv_folds,
                seed=seed, normalize=cfg.solver.normalize_columns)
            entry = {
                "joint": ds.joint + 1,
                "support": diag["support"],
                "lambda": diag["lambda"],
                "rmse": diag["rmse"],
                "residual_norm": diag["residual_norm"],
                "one_signed_velocity": diag["one_signed_velocity"],
            }
            if diag["one_signed_velocity"]:
                entry["warning"] = ("velocity samples cover only one sign; "
                                    "identifiability is limited")
            if solver == "lasso_cv" and sweep_payload is None:
                sweep_payload = ("cv", diag["cv"])
            elif solver == "stls" and sweep_payload is None:
                problem = RegressionProblem(
                    model.library.evaluate(ds.velocity), ds.torque)
                grid = np.unique(np.concatenate(
                    [cfg.solver.lasso_grid, [cfg.solver.stls_threshold]]))
                sweep_payload = ("pareto", pareto_sweep(
                    problem, "stls", grid, n_jobs=jobs,
                    normalize=cfg.solver.normalize_columns))
        entry["provenance"] = ds.provenance
        report["joints"].append(entry)
        models.append(model)

    save_friction_models(out, models)
    outputs = [out]
    report_path = out.with_suffix(out.suffix + ".report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, default=str)
        fh.write("\n")
    outputs.append(report_path)
    if tvdiff_log:
        log_path = out.with_suffix(out.suffix + ".tvdiff.log")
        log_path.write_text("\n".join(tvdiff_log) + "\n")
        outputs.append(log_path)
    if sweep_payload is not None:
        sweep_path = out.with_suffix(out.suffix + ".sweep.csv")
        kind, payload = sweep_payload
        if kind == "cv":
            write_sweep_csv(sweep_path, cv=payload)
        else:
            write_sweep_csv(sweep_path, points=payload)
        outputs.append(sweep_path)
    if history_rows:
        fit_path = out.with_suffix(out.suffix + ".fit.csv")
        with open(fit_path, "w") as fh:
            fh.write("joint,iteration,objective\n")
            for joint, i, obj in history_rows:
                fh.write(f"{joint},{i},{obj:.17g}\n")
        outputs.append(fit_path)

    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "identify",
                   config_path, seed, [data_path], outputs,
                   time.monotonic() - start)
    for entry in report["joints"]:
        summary = entry.get("support", entry.get("parameters"))
        print(f"identify: joint {entry['joint']}: {summary} "
              f"(rmse {entry['rmse']:.4g})")
        if "warning" in entry:
            print(f"identify: joint {entry['joint']}: warning: {entry['warning']}")
    return EXIT_OK


def cmd_control(cfg: RunConfig, seed: int, model_path: Path, out: Path,
                config_path) -> int:
    start = time.monotonic()
    friction_models = load_friction_models(model_path)
    if len(friction_models) != 2:
        raise DataFormatError(f"{model_path}: need one friction model per joint")
    nominal = Plant(cfg.arm, tuple(friction_models))
    truth = Plant(cfg.arm, cfg.truth_friction)
    reference = _build_reference(cfg, nominal)
    log = run_closed_loop(truth, nominal, reference, cfg.mpc,
                          encoder=cfg.encoder if cfg.mpc_encoder_in_loop else None,
                          seed=seed, dt_internal=cfg.simulate.dt_internal)
    write_closedloop_csv(out, log)
    summary = log.summary()
    summary_path = out.with_suffix(out.suffix + ".summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "control",
                   config_path, seed, [model_path], [out, summary_path],
                   time.monotonic() - start)
    print(f"control: mean |u_mpc| = {summary['mean_abs_umpc']:.6g} N m, "
          f"tracking rmse = {summary['tracking_rmse']:.6g} rad, "
          f"bound-active steps = {summary['active_bound_steps']}, "
          f"qp failures = {summary['qp_failures']}")
    return EXIT_OK


def cmd_compare(model_paths, out: Path, grid_limit: float, grid_size: int,
                jobs: int) -> int:
    start = time.monotonic()
    if len(model_paths) < 2:
        raise ConfigError("compare", "models", "need at least two model files")
    grid = np.linspace(-grid_limit, grid_limit, grid_size)
    curves = {}
    for path in model_paths:
        models = load_friction_models(path)
        stem = Path(path).stem
        for j, model in enumerate(models):
            curves[f"{stem}.j{j + 1}"] = model.torque(grid)
    write_comparison_csv(out, grid, curves)

    names = list(curves)
    print("compare: pairwise RMS differences (N m):")
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rms = float(np.sqrt(np.mean((curves[a] - curves[b]) ** 2)))
            print(f"  {a} vs {b}: {rms:.6g}")
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "compare",
                   None, 0, list(model_paths), [out],
                   time.monotonic() - start)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frictionid",
        description="Joint-friction identification and LTV-MPC tracking demo")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=False, default=None,
                           help="INI config path (omit to use built-in defaults)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--jobs", type=int, default=1)

    p_sim = sub.add_parser("simulate", help="generate synthetic measurements")
    common(p_sim)

    p_id = sub.add_parser("identify", help="identify friction from a CSV")
    common(p_id)
    p_id.add_argument("--data", required=True, type=Path,
                      help="time-series CSV from `simulate`")
    p_id.add_argument("--method", choices=["stls", "lasso", "nlreg"],
                      default=None, help="override the config's solver")

    p_ctl = sub.add_parser("control", help="closed-loop tracking run")
    common(p_ctl)
    p_ctl.add_argument("--model", required=True, type=Path,
                       help="friction model file used by the nominal model")

    p_cmp = sub.add_parser("compare", help="tabulate friction model curves")
    p_cmp.add_argument("models", nargs="+", type=Path)
    p_cmp.add_argument("--out", required=True, type=Path)
    p_cmp.add_argument("--grid-limit", type=float, default=2.6179938779914944)
    p_cmp.add_argument("--grid-size", type=int, default=501)
    p_cmp.add_argument("--jobs", type=int, default=1)

    p_cfg = sub.add_parser("init-config", help="write the default config file")
    p_cfg.add_argument("--out", required=True, type=Path)
    return parser


def _load(args) -> tuple[RunConfig, Path | None]:
    import tempfile, os

    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("-", "-", f"config file not found: {path}")
        return load_config(path), path
    # Built-in defaults: materialize so the manifest can hash what was used.
    fd, name = tempfile.mkstemp(suffix=".ini", prefix="frictionid-default-")
    os.close(fd)
    write_default_config(name)
    return load_config(name), Path(name)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-config":
            write_default_config(args.out)
            print(f"wrote default config to {args.out}")
            return EXIT_OK
        if args.command == "compare":
            return cmd_compare(args.models, args.out, args.grid_limit,
                               args.grid_size, args.jobs)
        cfg, config_path = _load(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.seed, args.out, config_path)
        if args.command == "identify":
            return cmd_identify(cfg, args.seed, args.data, args.out,
                                args.method, args.jobs, config_path)
        if args.command == "control":
            return cmd_control(cfg, args.seed, args.model, args.out,
                               config_path)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, TrajectoryLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, EmptyDatasetError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_EMPTY
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QPSolverError, DivergenceError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
