"""Command-line interface for the inspection toolkit.

Subcommands: assess, plan, formation, simulate, detect, evaluate, pipeline,
compare-planners. Exit codes: 0 success, 2 validation error, 3 stage failure,
4 comparison verdict failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .controlsim import AtsmConfig, QuadParams, simulate_formation_flight, \
    sinusoidal_disturbance
from .coverage import CameraModel, CoverageRequest, generate_viewpoints
from .detection import detect_defects, to_grayscale
from .formation import DEFAULT_FORMATION, individual_trajectories, load_formation
from .pipeline import (
    StageError,
    compare_planners,
    comparison_table,
    evaluate_masks,
    read_path_csv,
    run_pipeline,
    write_csv,
    write_path_csv,
)
from .planner import CostWeights, PsoConfig, plan_path, plan_path_baseline_pso
from .pnm import read_pnm, write_mask
from .scenario import ScenarioError, load_scenario_bundle
from .validation import ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3
EXIT_VERDICT = 4


def _fmt(value):
    return repr(float(value))


def _load_bundle(path):
    return load_scenario_bundle(Path(path).read_text())


def _vector(raw, dim, name):
    parts = [float(v) for v in raw.split(",")]
    if len(parts) != dim:
        raise ValidationError(f"{name} needs {dim} comma-separated values")
    return parts


def cmd_assess(args):
    bundle = _load_bundle(args.scenario)
    camera = bundle.camera
    coverage = bundle.coverage
    if args.resolution_px or args.focal_length or args.sensor_size:
        camera = CameraModel(
            resolution_px=args.resolution_px or (camera.resolution_px if camera else None),
            focal_length=args.focal_length or (camera.focal_length if camera else None),
            sensor_size=args.sensor_size or (camera.sensor_size if camera else None),
        )
    if args.smallest_feature or args.overlap is not None or args.extent:
        coverage = CoverageRequest(
            smallest_feature=args.smallest_feature
            or (coverage.smallest_feature if coverage else None),
            overlap_fraction=args.overlap
            if args.overlap is not None
            else (coverage.overlap_fraction if coverage else 0.0),
            surface_extent=_vector(args.extent, 2, "--extent")
            if args.extent
            else (coverage.surface_extent if coverage else None),
        )
    if camera is None or coverage is None:
        raise ValidationError(
            "camera/coverage parameters required: add [camera] and [coverage] "
            "sections to the scenario or pass the flags"
        )
    origin = _vector(args.origin, 3, "--origin")
    normal = _vector(args.normal, 3, "--normal")
    views = generate_viewpoints(coverage, camera, origin, normal)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "viewpoints.csv",
              ("x", "y", "z", "ox", "oy", "oz", "footprint", "standoff"),
              [(v.position[0], v.position[1], v.position[2],
                v.orientation[0], v.orientation[1], v.orientation[2],
                v.footprint, v.standoff) for v in views])
    print(f"viewpoints: {len(views)}")
    print(f"footprint_m: {_fmt(views[0].footprint)}")
    print(f"standoff_m: {_fmt(views[0].standoff)}")
    print(f"wrote {out / 'viewpoints.csv'}")
    return EXIT_OK


def _pso_config(args):
    return PsoConfig(
        swarm_size=args.particles,
        waypoints=args.waypoints,
        iterations=args.iterations,
        inertia=args.inertia,
        cognitive_gain=args.cognitive,
        social_gain=args.social,
        seed=args.seed,
    )


def _formation_from_args(args):
    if getattr(args, "offsets", None):
        return load_formation(Path(args.offsets).read_text())
    return DEFAULT_FORMATION


def cmd_plan(args):
    bundle = _load_bundle(args.scenario)
    spec = _formation_from_args(args)
    planner = plan_path if args.planner == "theta-pso" else plan_path_baseline_pso
    result = planner(bundle.scenario, spec, _pso_config(args),
                     CostWeights(args.length_weight, args.violation_weight,
                                 args.altitude_weight))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_path_csv(out / "path.csv", result.path)
    write_csv(out / "convergence.csv", ("iteration", "best_cost"),
              result.convergence_trace)
    cost = result.cost
    report = "\n".join([
        f"planner: {args.planner}",
        f"seed: {args.seed}",
        f"total: {_fmt(cost.total)}",
        f"length_cost: {_fmt(cost.length_cost)}",
        f"violation_cost: {_fmt(cost.violation_cost)}",
        f"altitude_cost: {_fmt(cost.altitude_cost)}",
        f"iterations_to_within_1pct: {result.iterations_to_within_1pct}",
    ]) + "\n"
    (out / "cost.txt").write_text(report)
    print(report, end="")
    print(f"wrote {out / 'path.csv'}")
    return EXIT_OK


def cmd_formation(args):
    reference = read_path_csv(args.path)
    spec = load_formation(Path(args.offsets).read_text()) if args.offsets else DEFAULT_FORMATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n, uav_path in enumerate(individual_trajectories(reference, spec), start=1):
        write_path_csv(out / f"uav_{n}_path.csv", uav_path)
    print(f"wrote {spec.n_uavs} per-UAV paths under {out}")
    return EXIT_OK


def cmd_simulate(args):
    paths_dir = Path(args.paths)
    uav_files = sorted(paths_dir.glob("uav_*_path.csv"))
    if not uav_files:
        raise ValidationError(f"no uav_*_path.csv files under {paths_dir}")
    paths = [read_path_csv(p) for p in uav_files]
    disturbance = (
        sinusoidal_disturbance(args.dist_amp, args.dist_freq) if args.dist_amp else None
    )
    traces, errors = simulate_formation_flight(
        paths, AtsmConfig(), QuadParams(), speed=args.speed, dt=args.dt,
        duration=args.duration, disturbance=disturbance,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stride = args.stride
    for n, trace in enumerate(traces, start=1):
        idx = np.arange(0, trace.t.size, stride)
        rows = np.column_stack([
            trace.t[idx], trace.position[idx], trace.euler[idx],
            trace.body_rates[idx], trace.torque[idx], trace.sigma[idx],
            trace.alpha[idx],
        ])
        write_csv(out / f"trace_{n}.csv",
                  ("t", "x", "y", "z", "phi", "theta", "psi", "p", "q", "r",
                   "u_phi", "u_theta", "u_psi", "sigma_phi", "sigma_theta",
                   "sigma_psi", "alpha_phi", "alpha_theta", "alpha_psi"),
                  [tuple(r) for r in rows])
    err_rows = []
    for n, (trace, err) in enumerate(zip(traces, errors), start=1):
        for k in range(0, trace.t.size, stride):
            err_rows.append((n, trace.t[k], err[k, 0], err[k, 1], err[k, 2]))
    write_csv(out / "errors.csv", ("uav", "t", "err_x", "err_y", "err_z"), err_rows)
    for n, err in enumerate(errors, start=1):
        rms = float(np.sqrt((np.linalg.norm(err, axis=1) ** 2).mean()))
        print(f"uav_{n}_rms_tracking_error_m: {_fmt(rms)}")
    print(f"wrote {len(traces)} traces under {out}")
    return EXIT_OK


def cmd_detect(args):
    image = read_pnm(Path(args.infile).read_bytes())
    if image.ndim == 3:
        image = to_grayscale(image)
    result = detect_defects(image, args.cs, args.polarity)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(write_mask(result.mask))
    print(f"final_threshold: {result.final_threshold}")
    print(f"iterations: {len(result.iteration_thresholds)}")
    print(f"converged: {str(result.converged).lower()}")
    print(f"defect_pixel_fraction: {_fmt(result.mask.mean())}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_evaluate(args):
    text = evaluate_masks(args.pred, args.truth)
    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_pipeline(args):
    result = run_pipeline(args.config, out_override=args.out)
    for record in result.records:
        status = "cached" if record.cached else f"{record.duration:.2f}s"
        print(f"stage {record.name}: {status}")
    print(f"manifest: {result.manifest_path}")
    print(f"report: {result.report_path}")
    return EXIT_OK


def cmd_compare_planners(args):
    bundle = _load_bundle(args.scenario)
    spec = _formation_from_args(args)
    comparison = compare_planners(
        bundle.scenario, spec, seeds=range(args.seed, args.seed + args.seeds),
        config=_pso_config(args),
        weights=CostWeights(args.length_weight, args.violation_weight,
                            args.altitude_weight),
    )
    text = comparison_table(comparison)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "planner_comparison.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if comparison.theta_pso_wins else EXIT_VERDICT


def _add_planner_args(p, iterations=300, particles=150):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--particles", type=int, default=particles)
    p.add_argument("--waypoints", type=int, default=10)
    p.add_argument("--iterations", type=int, default=iterations)
    p.add_argument("--inertia", type=float, default=0.7)
    p.add_argument("--cognitive", type=float, default=1.5)
    p.add_argument("--social", type=float, default=1.5)
    p.add_argument("--length-weight", type=float, default=1.0)
    p.add_argument("--violation-weight", type=float, default=100.0)
    p.add_argument("--altitude-weight", type=float, default=1.0)
    p.add_argument("--offsets", help="formation offsets file (default: triangle)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uavinspect",
        description="Multi-UAV surface inspection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="camera coverage assessment")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="assess_out")
    p.add_argument("--resolution-px", type=float)
    p.add_argument("--focal-length", type=float)
    p.add_argument("--sensor-size", type=float)
    p.add_argument("--smallest-feature", type=float)
    p.add_argument("--overlap", type=float)
    p.add_argument("--extent", help="patch extent as 'W,H' meters")
    p.add_argument("--origin", default="0,0,0")
    p.add_argument("--normal", default="0,0,1")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("plan", help="plan the centroid path")
    p.add_argument("--scenario", required=True)
    p.add_argument("--planner", choices=("theta-pso", "pso"), default="theta-pso")
    p.add_argument("--out", default="plan_out")
    _add_planner_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("formation", help="expand a path into per-UAV paths")
    p.add_argument("--path", required=True)
    p.add_argument("--offsets")
    p.add_argument("--out", default="formation_out")
    p.set_defaults(func=cmd_formation)

    p = sub.add_parser("simulate", help="fly the per-UAV paths in simulation")
    p.add_argument("--paths", required=True, help="directory with uav_*_path.csv")
    p.add_argument("--dt", type=float, default=0.001)
    p.add_argument("--duration", type=float)
    p.add_argument("--speed", type=float, default=2.0)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--dist-amp", type=float, default=0.0)
    p.add_argument("--dist-freq", type=float, default=1.0)
    p.add_argument("--out", default="simulate_out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="detect defects in one image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--cs", type=float, default=0.4)
    p.add_argument("--polarity", choices=("dark", "bright"), default="dark")
    p.add_argument("--out", required=True, help="output mask (P5)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run configured stages end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the configured output directory")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("compare-planners", help="seeded planner comparison")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out")
    _add_planner_args(p)
    p.set_defaults(func=cmd_compare_planners)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
