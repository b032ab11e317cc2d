"""Command-line front end.

Subcommands: forward (one chord, speed sweep), scan (full sinogram),
reconstruct (FBP + divergence from a sinogram file), pipeline (scan then
reconstruct), validate (runtime invariant suite).  Exit codes: 0 ok,
1 runtime failure, 2 config or validation error; failures print a
machine-readable error code on stderr.
"""

import argparse
import os
import sys

import numpy as np

from . import albedo, fileio, kinetic, tomography, validation
from .characteristics import PhasePoint, trace
from .config import (ExperimentConfig, apply_overrides, canonical_text,
                     config_hash, load_config)
from .errors import (BeamDefinitionError, ConfigError, NoIntersectionError,
                     NotOnBoundaryError, VptomoError)
from .geometry import DiskDomain, chord_from
from .poisson import assemble_field, center_mesh, source_from_profile

# errors that mean the request was invalid rather than the run failing
_USER_ERRORS = (ConfigError, NoIntersectionError, NotOnBoundaryError,
                BeamDefinitionError)


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="key = value settings file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[], help="override one setting (repeatable)")

    parser = argparse.ArgumentParser(
        prog="vptomo",
        description="Beam-probe tomography of a doping profile on the disk.")
    sub = parser.add_subparsers(dest="command", required=True)

    fwd = sub.add_parser("forward", parents=[common],
                         help="measure one chord over the speed sweep")
    fwd.add_argument("--angle", type=float, default=np.pi / 2,
                     help="chord angle alpha in [0, pi)")
    fwd.add_argument("--offset", type=float, default=0.0,
                     help="signed chord offset s, |s| < radius")
    fwd.add_argument("--speed", type=float, action="append", default=None,
                     help="beam speed (repeatable; default: config speeds)")
    fwd.add_argument("--dump-trajectory", action="store_true",
                     help="write the central characteristic per speed")
    fwd.add_argument("--no-self-field", action="store_true",
                     help="freeze the beam's own charge out of the field")

    sub.add_parser("scan", parents=[common], help="acquire the full sinogram")

    rec = sub.add_parser("reconstruct", parents=[common],
                         help="FBP + divergence from a sinogram")
    rec.add_argument("--sinogram", metavar="FILE", default=None,
                     help="sinogram CSV (default: <out_dir>/sinogram.csv)")

    sub.add_parser("pipeline", parents=[common], help="scan then reconstruct")
    sub.add_parser("validate", parents=[common], help="run the invariant suite")
    return parser


def _prepare(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    chash = config_hash(cfg)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config={chash}\n")
        fh.write(canonical_text(cfg))
    return chash


def _measure_options(cfg, keep_state=False, self_consistent=True):
    return albedo.MeasureOptions(
        self_consistent=self_consistent,
        n_field=cfg.nx,
        fp_tol=cfg.fp_tol,
        fp_max_iter=cfg.fp_max_iter,
        n_v=cfg.n_v,
        c0=cfg.c0,
        c0p=cfg.c0p,
        keep_state=keep_state,
    )


def _fmt_speed(speed):
    return f"{speed:g}".replace(".", "p")


def cmd_forward(cfg, args):
    chash = _prepare(cfg)
    profile = cfg.to_profile()
    domain = DiskDomain(cfg.radius)
    chord = chord_from(domain, args.angle, args.offset)
    speeds = tuple(args.speed) if args.speed else cfg.speeds
    opts = _measure_options(cfg, keep_state=True,
                            self_consistent=not args.no_self_field)
    e_n = assemble_field(source_from_profile(profile, cfg.nx))
    opts.e_n = e_n

    if len(speeds) >= 2:
        sweep = albedo.sweep_and_extrapolate(chord, profile, speeds=speeds,
                                             opts=opts)
        measurements = sweep.measurements
    else:
        sweep = None
        measurements = [albedo.measure_beam(chord, speeds[0], profile, opts)]
    out = cfg.out_dir
    records = []
    rows = []
    for meas in measurements:
        records.append(fileio.measurement_record(meas, chash))
        tag = _fmt_speed(meas.speed)
        fileio.write_residuals_csv(
            os.path.join(out, f"residuals_s{tag}.csv"), meas.residuals, chash)
        oracle = tomography.chord_integral(e_n, chord, cfg.n_quad)
        rows.append({
            "speed": meas.speed,
            "m1": meas.m[0], "m2": meas.m[1],
            "m_parallel": meas.m_parallel, "m_perp": meas.m_perp,
            "err_vs_oracle": float(np.linalg.norm(meas.m - oracle)),
            "lambda_hat": (float("nan") if meas.lambda_hat is None
                           else meas.lambda_hat),
            "iterations": meas.iterations,
            "residual_first": meas.residuals[0] if meas.residuals else 0.0,
            "residual_last": meas.residuals[-1] if meas.residuals else 0.0,
            "t_plus": meas.exit.t_plus, "t_star": meas.t_star,
        })
        if meas.state is not None:
            state = meas.state
            fileio.write_grid_csv(os.path.join(out, f"rho_s{tag}.csv"),
                                  state.rho.values, cfg.radius, chash)
            fileio.write_field_csv(out, f"e_field_s{tag}", state.field, chash)
        if args.dump_trajectory:
            field = meas.state.field if meas.state is not None else e_n
            start = PhasePoint(chord.entry, meas.speed * chord.direction)
            rec, path = trace(start, field, record_path=True)
            fileio.write_trajectory_csv(
                os.path.join(out, f"trajectory_s{tag}.csv"), path, chash)
        print(f"speed {meas.speed:g}: m = ({meas.m[0]:+.6e}, {meas.m[1]:+.6e})"
              f"  m_perp = {meas.m_perp:+.6e}  iters = {meas.iterations}")
    if sweep is not None:
        records.append(fileio.extrapolated_record(sweep, chash))
        print(f"extrapolated: m = ({sweep.extrapolated[0]:+.6e},"
              f" {sweep.extrapolated[1]:+.6e})  order_hat = {sweep.order_hat:.3f}")
    fileio.write_jsonl(os.path.join(out, "measurements.jsonl"), records)
    fileio.write_sweep_csv(os.path.join(out, "sweep.csv"), rows, chash)
    print(f"wrote {out}/measurements.jsonl, {out}/sweep.csv")
    return 0


def _progress_printer(label):
    def progress(done, total):
        step = max(1, total // 20)
        if done % step == 0 or done == total:
            print(f"{label}: {done}/{total}", flush=True)
    return progress


def cmd_scan(cfg, args):
    chash = _prepare(cfg)
    profile = cfg.to_profile()
    mopts = _measure_options(cfg)
    aopts = tomography.AcquireOptions(
        offset_cap=cfg.offset_cap, n_quad=cfg.n_quad,
        measure=mopts, progress=_progress_printer("scan"))
    sino = tomography.acquire(profile, cfg.n_a, cfg.n_s,
                              speeds=cfg.speeds, mode=cfg.mode,
                              opts=aopts, radius=cfg.radius)
    path = os.path.join(cfg.out_dir, "sinogram.csv")
    fileio.write_sinogram_csv(path, sino, chash)
    failures = sino.meta.get("failures", [])
    print(f"wrote {path} ({cfg.n_a} angles x {cfg.n_s} offsets,"
          f" mode {cfg.mode}, {len(failures)} patched chords)")
    return sino


def cmd_reconstruct(cfg, args, sino=None):
    chash = _prepare(cfg)
    profile = cfg.to_profile()
    if sino is None:
        path = getattr(args, "sinogram", None) or os.path.join(
            cfg.out_dir, "sinogram.csv")
        sino = fileio.read_sinogram_csv(path)
    result = tomography.reconstruct(sino, cfg.n_recon, profile=profile,
                                    cut=cfg.metric_cut)
    out = cfg.out_dir
    fileio.write_field_csv(out, "e_hat", result.e_hat, chash)
    fileio.write_grid_csv(os.path.join(out, "n_hat.csv"), result.n_hat,
                          cfg.radius, chash)
    X, Y = center_mesh(cfg.n_recon, cfg.radius)
    truth = profile(np.stack([X, Y], axis=-1).reshape(-1, 2)).reshape(
        cfg.n_recon, cfg.n_recon)
    fileio.write_grid_csv(os.path.join(out, "n_true.csv"), truth,
                          cfg.radius, chash)
    fileio.write_metrics_csv(os.path.join(out, "metrics.csv"),
                             result.report, chash)
    print(f"reconstruction: rel L2 = {result.report.rel_l2:.4f},"
          f" rel Linf = {result.report.rel_linf:.4f}"
          f" on r <= {cfg.metric_cut:g}R")
    print(f"wrote {out}/n_hat.csv, {out}/e_hat_1.csv, {out}/e_hat_2.csv,"
          f" {out}/metrics.csv")
    return 0


def cmd_pipeline(cfg, args):
    sino = cmd_scan(cfg, args)
    return cmd_reconstruct(cfg, args, sino=sino)


def cmd_validate(cfg, args):
    chash = _prepare(cfg)

    def progress(name, k, total):
        print(f"[{k + 1:2d}/{total}] {name}", flush=True)

    results = validation.run_all(cfg, progress=progress)
    rows = []
    for res in results:
        mark = "pass" if res.passed else "FAIL"
        print(f"{mark}  {res.name:28s} value={res.value:.3e}"
              f" bound={res.bound:.3e} [{res.seconds:.1f}s]")
        rows.append((res.name, res.passed, res.value, res.bound))
    fileio.write_validation_csv(os.path.join(cfg.out_dir, "validation.csv"),
                                rows, chash)
    failed = sum(1 for res in results if not res.passed)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = apply_overrides(cfg, args.set)
        if args.command == "forward":
            return cmd_forward(cfg, args)
        if args.command == "scan":
            cmd_scan(cfg, args)
            return 0
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args)
        if args.command == "pipeline":
            return cmd_pipeline(cfg, args)
        return cmd_validate(cfg, args)
    except VptomoError as err:
        print(f"error[{err.code}]: {err}", file=sys.stderr)
        return 2 if isinstance(err, _USER_ERRORS) else 1


if __name__ == "__main__":
    sys.exit(main())
