"""
Command-line entry point.

Subcommands ``datagen``, ``calibrate``, ``static``, ``dynamic`` and
``verify``. Exit codes: 0 success, 1 usage or configuration error,
2 numerical failure, 3 I/O failure.
"""

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (ConfigInvalid, DivergedLoss, IoError, NegativeWeight,
                     NewtonDiverged, NonPositiveJacobian, NormalizationMismatch,
                     PanfemError, RootFindFailure, SchemaMismatch)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

DEFAULT_CONFIGS = {
    "datagen": "calibrate.toml",
    "calibrate": "calibrate.toml",
    "static": "cook.toml",
    "dynamic": "lshape.toml",
    "verify": "verify.toml",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parser():
    p = _Parser(prog="panfem", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("datagen", "write calibration and test CSV datasets"),
                        ("calibrate", "train PANN weights"),
                        ("static", "load-stepped static solve"),
                        ("dynamic", "time integration"),
                        ("verify", "finite-difference and conservation checks")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="TOML run configuration")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, default=None, help="random seed")
        s.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: PANFEM_THREADS or 1)")
        if name == "dynamic":
            s.add_argument("--integrator", choices=("EMS", "midpoint", "ems"),
                           help="override the configured integrator")
        if name == "static":
            s.add_argument("--formulation", choices=("H1", "GJ", "IIIJ"),
                           help="override the configured element formulation")
    return p


def _load(args):
    from .fileio import load_config

    if args.config is not None:
        return load_config(args.config)
    ref = resources.files("panfem") / "configs" / DEFAULT_CONFIGS[args.command]
    with resources.as_file(ref) as path:
        return load_config(path)


def _get(cfg, dotted, default=None):
    node = cfg
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def build_material(cfg, section="material"):
    """Mooney-Rivlin from a preset or explicit constants, or PANN from a weights file."""
    from .fileio import read_weights, resolve_path
    from .material import MR_COMPRESSIBLE, MR_NEARLY_INCOMPRESSIBLE, MooneyRivlin, MrParams, pann_build

    kind = str(_get(cfg, f"{section}.model", "mr")).lower()
    if kind == "mr":
        preset = _get(cfg, f"{section}.preset", "compressible")
        presets = {"compressible": MR_COMPRESSIBLE,
                   "nearly_incompressible": MR_NEARLY_INCOMPRESSIBLE}
        if preset not in presets:
            raise ConfigInvalid(f"{section}.preset", f"unknown preset {preset!r}")
        base = presets[preset]
        vals = {k: float(_get(cfg, f"{section}.{k}", getattr(base, k))) for k in "abcd"}
        try:
            return MooneyRivlin(MrParams(**vals))
        except ValueError as exc:
            raise ConfigInvalid(section, str(exc)) from exc
    if kind == "pann":
        path = _get(cfg, f"{section}.weights")
        if path is None:
            raise ConfigInvalid(f"{section}.weights", "missing required field")
        return pann_build(read_weights(resolve_path(cfg, path)))
    raise ConfigInvalid(f"{section}.model", f"unknown model {kind!r}")


def _newton_cfg(cfg):
    from .solver import NewtonConfig

    try:
        return NewtonConfig(
            tol_residual=float(_get(cfg, "solver.tol", 1e-8)),
            abs_floor=float(_get(cfg, "solver.abs_floor", 1e-10)),
            max_iter=int(_get(cfg, "solver.max_iter", 20)),
            backtrack=int(_get(cfg, "solver.backtrack", 0)),
            line_search=bool(_get(cfg, "solver.line_search", False)),
            polish=int(_get(cfg, "solver.polish", 0)),
        )
    except ValueError as exc:
        raise ConfigInvalid("solver", str(exc)) from exc


def _train_cfg(cfg, seed):
    from .calibration import TrainConfig

    try:
        return TrainConfig(
            epochs=int(_get(cfg, "calibration.epochs", 5000)),
            learning_rate=float(_get(cfg, "calibration.learning_rate", 1e-3)),
            seed=int(seed if seed is not None else _get(cfg, "calibration.seed", 42)),
            n=int(_get(cfg, "calibration.n", 8)),
            output_scale=_get(cfg, "calibration.output_scale"),
            input_scale=float(_get(cfg, "calibration.input_scale", 1.0)),
        )
    except ValueError as exc:
        raise ConfigInvalid("calibration", str(exc)) from exc


def _datasets(cfg):
    from .calibration import calibration_dataset, read_dataset_csv, test_dataset
    from .fileio import resolve_path

    n_points = int(_get(cfg, "datagen.n_points", 100))
    cal = _get(cfg, "calibration.data")
    if cal is not None:
        dc = read_dataset_csv(resolve_path(cfg, cal))
        test = _get(cfg, "calibration.test_data")
        dt = read_dataset_csv(resolve_path(cfg, test), "test") if test else None
        return dc, dt
    gt = build_material(cfg, "ground_truth")
    return calibration_dataset(gt, n_points), test_dataset(gt, n_points)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_datagen(cfg, args):
    from .calibration import write_dataset_csv

    dc, dt = _datasets(cfg)
    write_dataset_csv(args.out / "calibration.csv", dc)
    write_dataset_csv(args.out / "test.csv", dt)
    print(f"wrote {len(dc)} calibration and {len(dt)} test samples to {args.out}")
    return EXIT_OK


def cmd_calibrate(cfg, args):
    from .calibration import sobolev_loss, train_adam
    from .fileio import write_csv, write_weights

    dc, dt = _datasets(cfg)
    tc = _train_cfg(cfg, args.seed)
    res = train_adam(tc.seed, dc, tc)
    write_weights(args.out / "weights.json", res.params)
    rows = [(e, float(loss)) for e, loss in res.history]
    write_csv(args.out / "loss_history.csv", ["epoch", "loss"], rows)
    msg = f"calibration log10 MSE {np.log10(sobolev_loss(res.params, dc)):.3f}"
    if dt is not None:
        msg += f", test log10 MSE {np.log10(sobolev_loss(res.params, dt)):.3f}"
    print(msg)
    return EXIT_OK


def cmd_static(cfg, args):
    from .fileio import cell_von_mises, write_csv, write_vtk
    from .scene import build_scene
    from .solver import FeProblem, LoadStepSchedule, static_driver

    scene = build_scene(cfg)
    model = build_material(cfg)
    form = args.formulation or _get(cfg, "solver.formulation", "H1")
    problem = FeProblem(scene, threads=args.threads)
    sched = LoadStepSchedule(int(_get(cfg, "solver.load_steps", 10)))
    res = static_driver(scene, model, form, sched, _newton_cfg(cfg), problem)
    rows = []
    for k, (a, its) in enumerate(zip(res.amplitudes, res.iterations), start=1):
        for name, vals in res.probes.items():
            rows.append([k, float(a), name, *[float(v) for v in vals[k - 1]], its])
    write_csv(args.out / "probes.csv", ["step", "amplitude", "probe", "ux", "uy", "uz",
                                        "newton_iterations"], rows)
    u = res.displacements[-1]
    vm = cell_von_mises(model, problem.geom, problem.gather(u))
    write_vtk(scene.mesh, {"displacement": u.reshape(-1, 3), "von_mises": vm},
              args.out / "static.vtk")
    for name, vals in res.probes.items():
        print(f"probe {name}: u = {np.array2string(vals[-1], precision=6)}")
    return EXIT_OK


def cmd_dynamic(cfg, args):
    from .dynamics import run_dynamic
    from .fileio import cell_von_mises, write_timeseries, write_vtk
    from .scene import build_scene
    from .solver import FeProblem

    scene = build_scene(cfg)
    model = build_material(cfg)
    integrator = args.integrator or _get(cfg, "integrator.kind", "EMS")
    integrator = "EMS" if integrator.lower() == "ems" else integrator
    dt = float(_get(cfg, "integrator.dt", 0.8))
    t_end = float(_get(cfg, "integrator.t_end", 24.0))
    stride = int(_get(cfg, "output.stride", 0))
    problem = FeProblem(scene, threads=args.threads)
    counter = [0]

    def snapshot(state, audit=None):
        if stride > 0 and counter[0] % stride == 0:
            vm = cell_von_mises(model, problem.geom, problem.gather(state.u))
            write_vtk(scene.mesh, {"displacement": state.u.reshape(-1, 3), "von_mises": vm},
                      args.out / f"dynamic_{counter[0]:05d}.vtk")
        counter[0] += 1

    run = run_dynamic(scene, model, integrator, dt, t_end, _newton_cfg(cfg), problem,
                      callback=snapshot)
    write_timeseries(args.out / "timeseries.csv", run.audits)
    if run.aborted:
        print(f"Newton diverged at t = {run.final.t:.6g} ({integrator}): {run.error}",
              file=sys.stderr)
        return EXIT_NUMERIC
    E = [a.E for a in run.audits]
    print(f"{integrator}: {len(run.audits) - 1} steps, final E = {E[-1]:.10g}")
    return EXIT_OK


def cmd_verify(cfg, args):
    from .diagnostics import FD_TARGETS, fd_check
    from .fileio import write_csv

    tol = float(_get(cfg, "verify.fd_tol", 1e-5))
    seed = 0 if args.seed is None else args.seed
    rows, ok = [], True
    for target in FD_TARGETS:
        rep = fd_check(target, seed=seed)
        passed = rep.max_rel_err <= tol
        ok &= passed
        rows.append([target, rep.max_rel_err, "pass" if passed else "FAIL"])
        print(f"fd {target:16s} max_rel_err {rep.max_rel_err:.3e} {'pass' if passed else 'FAIL'}")
    e_res, j_res = conservation_smoke(threads=args.threads)
    e_ok = e_res <= float(_get(cfg, "verify.energy_tol", 1e-8))
    j_ok = j_res <= float(_get(cfg, "verify.momentum_tol", 1e-8))
    ok &= e_ok and j_ok
    rows.append(["energy_balance", e_res, "pass" if e_ok else "FAIL"])
    rows.append(["angular_momentum", j_res, "pass" if j_ok else "FAIL"])
    print(f"EMS energy balance {e_res:.3e} {'pass' if e_ok else 'FAIL'}")
    print(f"EMS angular momentum {j_res:.3e} {'pass' if j_ok else 'FAIL'}")
    write_csv(args.out / "verify.csv", ["check", "value", "status"], rows)
    return EXIT_OK if ok else EXIT_NUMERIC


def conservation_smoke(threads=None, steps=10):
    """
    Free flight of a spinning, pre-stretched two-element bar with EMS.

    Returns the largest relative per-step energy residual and angular
    momentum change.
    """
    from .dynamics import DynamicState, run_dynamic
    from .material import MR_COMPRESSIBLE, MooneyRivlin
    from .scene import Scene, box_mesh
    from .solver import FeProblem, NewtonConfig

    mesh = box_mesh((2, 1, 1), (2.0, 1.0, 1.0))
    scene = Scene(mesh, rho0=10.0, name="smoke")
    problem = FeProblem(scene, threads=threads)
    X = mesh.nodes
    u0 = 0.05 * (X - X.mean(axis=0)) * np.array([1.0, -0.3, -0.3])
    omega = np.array([0.0, 0.3, 1.0])
    v0 = np.cross(omega, X - X.mean(axis=0)) + np.array([0.1, 0.0, 0.0])
    init = DynamicState(0.0, u0.ravel(), v0.ravel())
    run = run_dynamic(scene, MooneyRivlin(MR_COMPRESSIBLE), "EMS", 0.05, 0.05 * steps,
                      NewtonConfig(tol_residual=1e-10, abs_floor=1e-11), problem, init,
                      raise_on_divergence=True)
    E = max(1.0, max(abs(a.E) for a in run.audits))
    e_res = max(abs(a.energy_residual) for a in run.audits[1:]) / E
    J = np.array([a.J_ang for a in run.audits])
    j_res = float(np.max(np.abs(np.diff(J, axis=0)))) / max(1.0, float(np.max(np.abs(J))))
    return e_res, j_res


COMMANDS = {"datagen": cmd_datagen, "calibrate": cmd_calibrate, "static": cmd_static,
            "dynamic": cmd_dynamic, "verify": cmd_verify}


def cli_main(argv=None):
    """Run the command line and return the exit code."""
    try:
        args = _parser().parse_args(argv)
    except _UsageError as exc:
        print(f"panfem: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:          # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    if args.threads is not None:
        if args.threads < 1:
            print("panfem: --threads must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        os.environ["PANFEM_THREADS"] = str(args.threads)
    try:
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except ConfigInvalid as exc:
        print(f"panfem: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NewtonDiverged, NonPositiveJacobian, RootFindFailure, DivergedLoss) as exc:
        print(f"panfem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IoError, SchemaMismatch, NegativeWeight, NormalizationMismatch, OSError) as exc:
        print(f"panfem: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PanfemError as exc:
        print(f"panfem: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
