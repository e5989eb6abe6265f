"""End-to-end pipeline: assess, plan, formation, simulate, detect, evaluate.

Stages run in dependency order into one output directory, each guarded by a
content-hash signature so reruns skip stages whose inputs and parameters are
unchanged. Every random choice flows from seeds named in the config; reports
carry no wall-clock data, so identical configs reproduce identical artifact
bytes (timings live only in the run manifest).

Pipeline config grammar (same conventions as the scenario file)::

    [pipeline]
    scenario = scenarios/bridge.scn
    stages = assess, plan, formation, simulate, detect, evaluate
    seed = 7

    [plan]                     # optional per-stage overrides
    planner = theta-pso        # or: pso
    particles = 150
    waypoints = 10
    iterations = 300

    [formation]
    offsets = my_offsets.txt   # default: the triangular three-UAV shape

    [simulate]
    speed = 2.0
    dt = 0.001
    stride = 10                # trace subsampling for CSV output

    [detect]
    cs = 0.4
    polarity = dark
    images = imgs/             # omit to synthesize a corpus instead
    truth = truth/
    synth_count = 6
    noise_sigmas = 0, 10, 20
    width = 256
    height = 192
"""

import hashlib
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .controlsim import AtsmConfig, QuadParams, simulate_formation_flight
from .coverage import generate_viewpoints
from .detection import detect_defects, f_measure, synth_defect_image, to_grayscale
from .formation import DEFAULT_FORMATION, individual_trajectories, load_formation
from .planner import (
    CostWeights,
    PsoConfig,
    plan_path,
    plan_path_baseline_pso,
)
from .pnm import read_pnm, write_mask, write_pgm
from .scenario import ScenarioError, load_scenario_bundle
from .validation import ValidationError


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


@dataclass
class StageRecord:
    name: str
    inputs: list
    outputs: list
    duration: float
    cached: bool


@dataclass
class RunResult:
    out_dir: Path
    records: list
    manifest_path: Path
    report_path: Path


DEFAULT_STAGES = ("assess", "plan", "formation", "simulate", "detect", "evaluate")

_KNOWN_SECTIONS = {"pipeline", "assess", "plan", "formation", "simulate",
                   "detect", "evaluate"}


def parse_config(text):
    """Pipeline config text -> {section: {key: raw string}}."""
    sections = {}
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _KNOWN_SECTIONS:
                raise ScenarioError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ScenarioError(f"duplicate section [{name}]", lineno)
            current = sections.setdefault(name, {})
            continue
        if "=" not in line or current is None:
            raise ScenarioError(f"expected 'key = value' inside a section, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current:
            raise ScenarioError(f"duplicate key {key!r}", lineno)
        current[key] = value
    return sections


def _fmt(value):
    return repr(float(value))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_path_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].strip() != "x,y,z":
        raise ValidationError(f"{path}: expected header 'x,y,z'")
    return np.array([[float(v) for v in line.split(",")] for line in lines[1:]])


def write_path_csv(path, waypoints):
    write_csv(path, ("x", "y", "z"), [tuple(row) for row in np.asarray(waypoints, dtype=float)])


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- planner comparison -------------------------------------------------------


@dataclass(frozen=True)
class PlannerComparison:
    """Per-seed planner results plus medians and the ordering verdict."""

    rows: tuple  # (seed, theta_cost, theta_iters, pso_cost, pso_iters)
    theta_median_cost: float
    pso_median_cost: float
    theta_median_iters: float
    pso_median_iters: float
    theta_initial_median: float
    pso_initial_median: float
    theta_pso_wins: bool


def compare_planners(scenario, formation=None, seeds=range(20), config=None,
                     weights=None, samples_per_segment=10, safe_distance=2.0):
    """Run both planners across seeds and judge the convergence ordering."""
    seeds = list(seeds)
    if len(seeds) < 5:
        raise ValidationError(f"need at least 5 seeds for a comparison, got {len(seeds)}")
    base = config if config is not None else PsoConfig()
    rows = []
    theta_init, pso_init = [], []
    for seed in seeds:
        cfg = PsoConfig(
            swarm_size=base.swarm_size, waypoints=base.waypoints,
            iterations=base.iterations, inertia=base.inertia,
            cognitive_gain=base.cognitive_gain, social_gain=base.social_gain,
            seed=seed,
        )
        theta = plan_path(scenario, formation, cfg, weights,
                          samples_per_segment, safe_distance)
        pso = plan_path_baseline_pso(scenario, formation, cfg, weights,
                                     samples_per_segment, safe_distance)
        rows.append((seed, theta.cost.total, theta.iterations_to_within_1pct,
                     pso.cost.total, pso.iterations_to_within_1pct))
        theta_init.append(theta.convergence_trace[0][1])
        pso_init.append(pso.convergence_trace[0][1])

    theta_cost = statistics.median(r[1] for r in rows)
    pso_cost = statistics.median(r[3] for r in rows)
    theta_iters = statistics.median(r[2] for r in rows)
    pso_iters = statistics.median(r[4] for r in rows)
    return PlannerComparison(
        rows=tuple(rows),
        theta_median_cost=theta_cost,
        pso_median_cost=pso_cost,
        theta_median_iters=theta_iters,
        pso_median_iters=pso_iters,
        theta_initial_median=statistics.median(theta_init),
        pso_initial_median=statistics.median(pso_init),
        theta_pso_wins=(theta_cost <= pso_cost) and (theta_iters < pso_iters),
    )


def comparison_table(comparison: PlannerComparison) -> str:
    lines = [
        f"{'seed':>6} {'theta_cost':>12} {'theta_iters':>12} {'pso_cost':>12} {'pso_iters':>12}",
    ]
    for seed, tc, ti, pc, pi in comparison.rows:
        lines.append(f"{seed:>6} {tc:>12.4f} {ti:>12d} {pc:>12.4f} {pi:>12d}")
    lines += [
        "",
        f"median_initial_cost: theta-pso {comparison.theta_initial_median:.4f} "
        f"| pso {comparison.pso_initial_median:.4f}",
        f"median_final_cost: theta-pso {comparison.theta_median_cost:.4f} "
        f"| pso {comparison.pso_median_cost:.4f}",
        f"median_iterations_to_1pct: theta-pso {comparison.theta_median_iters:g} "
        f"| pso {comparison.pso_median_iters:g}",
        f"theta_pso_wins: {str(comparison.theta_pso_wins).lower()}",
    ]
    return "\n".join(lines) + "\n"


# --- pipeline stages ----------------------------------------------------------


def _get(sections, section, key, default=None):
    return sections.get(section, {}).get(key, default)


def _floats(raw):
    return [float(v.strip()) for v in raw.split(",")]


class Pipeline:
    """Stage runner with content-hash caching over one output directory."""

    def __init__(self, config_text, config_dir=None, out_override=None):
        self.sections = parse_config(config_text)
        top = self.sections.get("pipeline", {})
        base = Path(config_dir) if config_dir is not None else Path.cwd()
        out = out_override or top.get("out", "run")
        self.out_dir = (base / out) if not Path(out).is_absolute() else Path(out)
        self.seed = int(top.get("seed", "0"))
        raw_stages = top.get("stages")
        self.stages = (
            tuple(s.strip() for s in raw_stages.split(",") if s.strip())
            if raw_stages else DEFAULT_STAGES
        )
        unknown = set(self.stages) - set(DEFAULT_STAGES)
        if unknown:
            raise ValidationError(f"unknown stage(s): {sorted(unknown)}")

        scenario_rel = top.get("scenario")
        needs_world = {"assess", "plan", "formation", "simulate"} & set(self.stages)
        if needs_world and not scenario_rel:
            raise ValidationError("[pipeline] scenario is required for the selected stages")
        self.scenario_path = (base / scenario_rel) if scenario_rel else None
        if self.scenario_path is not None and not self.scenario_path.exists():
            raise ValidationError(f"scenario file not found: {self.scenario_path}")
        self.base = base
        self.bundle = (
            load_scenario_bundle(self.scenario_path.read_text())
            if self.scenario_path else None
        )
        self.records = []

    # -- caching helpers

    def _signature(self, stage, params, input_files):
        digest = hashlib.sha256()
        digest.update(stage.encode())
        for key in sorted(params):
            digest.update(f"{key}={params[key]}".encode())
        for path in input_files:
            digest.update(str(Path(path).name).encode())
            digest.update(file_sha256(path).encode())
        return digest.hexdigest()

    def _run_stage(self, stage, params, input_files, outputs, runner):
        cache = self.out_dir / ".cache" / f"{stage}.sig"
        signature = self._signature(stage, params, input_files)
        outputs = [Path(p) for p in outputs]
        if cache.exists() and cache.read_text() == signature and all(
            p.exists() for p in outputs
        ):
            self.records.append(StageRecord(stage, list(input_files), outputs, 0.0, True))
            return
        started = time.perf_counter()
        try:
            runner()
        except (ValidationError, ScenarioError, OSError) as exc:
            raise StageError(stage, str(exc)) from exc
        missing = [p for p in outputs if not p.exists()]
        if missing:
            raise StageError(stage, f"did not produce {missing}")
        cache.parent.mkdir(parents=True, exist_ok=True)
        cache.write_text(signature)
        self.records.append(
            StageRecord(stage, list(input_files), outputs,
                        time.perf_counter() - started, False)
        )

    # -- individual stages

    def run(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for stage in DEFAULT_STAGES:
            if stage in self.stages:
                getattr(self, f"_stage_{stage.replace('-', '_')}")()
        manifest = self._write_manifest()
        report = self._write_report()
        return RunResult(self.out_dir, self.records, manifest, report)

    def _stage_assess(self):
        out = self.out_dir / "assess"
        params = dict(self.sections.get("assess", {}))
        if self.bundle.camera is None or self.bundle.coverage is None:
            raise StageError(
                "assess", "scenario file lacks [camera]/[coverage] sections"
            )

        def runner():
            out.mkdir(parents=True, exist_ok=True)
            origin = _floats(params.get("origin", "0, 0, 0"))
            normal = _floats(params.get("normal", "0, 0, 1"))
            views = generate_viewpoints(self.bundle.coverage, self.bundle.camera,
                                        origin, normal)
            write_csv(out / "viewpoints.csv",
                      ("x", "y", "z", "ox", "oy", "oz", "footprint", "standoff"),
                      [(v.position[0], v.position[1], v.position[2],
                        v.orientation[0], v.orientation[1], v.orientation[2],
                        v.footprint, v.standoff) for v in views])
            lines = [
                f"viewpoints: {len(views)}",
                f"footprint_m: {_fmt(views[0].footprint)}",
                f"standoff_m: {_fmt(views[0].standoff)}",
                f"effective_step_m: {_fmt((1 - self.bundle.coverage.overlap_fraction) * views[0].footprint)}",
            ]
            (out / "assessment.txt").write_text("\n".join(lines) + "\n")

        self._run_stage("assess", params, [self.scenario_path],
                        [out / "viewpoints.csv", out / "assessment.txt"], runner)

    def _plan_config(self):
        sec = self.sections.get("plan", {})
        return PsoConfig(
            swarm_size=int(sec.get("particles", "150")),
            waypoints=int(sec.get("waypoints", "10")),
            iterations=int(sec.get("iterations", "300")),
            inertia=float(sec.get("inertia", "0.7")),
            cognitive_gain=float(sec.get("cognitive", "1.5")),
            social_gain=float(sec.get("social", "1.5")),
            seed=int(sec.get("seed", str(self.seed))),
        )

    def _weights(self):
        sec = self.sections.get("plan", {})
        return CostWeights(
            length_weight=float(sec.get("length_weight", "1.0")),
            violation_weight=float(sec.get("violation_weight", "100.0")),
            altitude_weight=float(sec.get("altitude_weight", "1.0")),
        )

    def _formation_spec(self):
        rel = _get(self.sections, "formation", "offsets")
        if rel is None:
            return DEFAULT_FORMATION, None
        path = self.base / rel
        return load_formation(path.read_text()), path

    def _stage_plan(self):
        out = self.out_dir / "plan"
        sec = dict(self.sections.get("plan", {}))
        sec.setdefault("seed", str(self.seed))
        planner_name = sec.get("planner", "theta-pso")
        if planner_name not in ("theta-pso", "pso"):
            raise StageError("plan", f"unknown planner {planner_name!r}")
        spec, spec_path = self._formation_spec()
        inputs = [self.scenario_path] + ([spec_path] if spec_path else [])

        def runner():
            out.mkdir(parents=True, exist_ok=True)
            planner = plan_path if planner_name == "theta-pso" else plan_path_baseline_pso
            result = planner(self.bundle.scenario, spec, self._plan_config(),
                             self._weights())
            write_path_csv(out / "path.csv", result.path)
            write_csv(out / "convergence.csv", ("iteration", "best_cost"),
                      result.convergence_trace)
            cost = result.cost
            (out / "cost.txt").write_text(
                "\n".join([
                    f"planner: {planner_name}",
                    f"seed: {sec['seed']}",
                    f"total: {_fmt(cost.total)}",
                    f"length_cost: {_fmt(cost.length_cost)}",
                    f"violation_cost: {_fmt(cost.violation_cost)}",
                    f"altitude_cost: {_fmt(cost.altitude_cost)}",
                    f"iterations_to_within_1pct: {result.iterations_to_within_1pct}",
                ]) + "\n"
            )

        self._run_stage("plan", sec, inputs,
                        [out / "path.csv", out / "convergence.csv", out / "cost.txt"],
                        runner)

    def _stage_formation(self):
        out = self.out_dir / "formation"
        sec = dict(self.sections.get("formation", {}))
        spec, spec_path = self._formation_spec()
        path_csv = self.out_dir / "plan" / "path.csv"
        if not path_csv.exists():
            raise StageError("formation", f"missing planner output {path_csv}")
        inputs = [path_csv] + ([spec_path] if spec_path else [])
        outputs = [out / f"uav_{n}_path.csv" for n in range(1, spec.n_uavs + 1)]

        def runner():
            out.mkdir(parents=True, exist_ok=True)
            reference = read_path_csv(path_csv)
            for n, uav_path in enumerate(individual_trajectories(reference, spec), start=1):
                write_path_csv(out / f"uav_{n}_path.csv", uav_path)

        self._run_stage("formation", sec, inputs, outputs, runner)

    def _stage_simulate(self):
        out = self.out_dir / "simulate"
        sec = dict(self.sections.get("simulate", {}))
        paths_dir = self.out_dir / "formation"
        uav_files = sorted(paths_dir.glob("uav_*_path.csv"))
        if not uav_files:
            raise StageError("simulate", f"no uav_*_path.csv files under {paths_dir}")
        outputs = [out / f"trace_{n}.csv" for n in range(1, len(uav_files) + 1)]
        outputs.append(out / "errors.csv")

        def runner():
            out.mkdir(parents=True, exist_ok=True)
            paths = [read_path_csv(p) for p in uav_files]
            dt = float(sec.get("dt", "0.001"))
            speed = float(sec.get("speed", "2.0"))
            stride = int(sec.get("stride", "10"))
            duration = float(sec["duration"]) if "duration" in sec else None
            traces, errors = simulate_formation_flight(
                paths, AtsmConfig(), QuadParams(), speed=speed, dt=dt,
                duration=duration,
            )
            for n, trace in enumerate(traces, start=1):
                idx = np.arange(0, trace.t.size, stride)
                rows = np.column_stack([
                    trace.t[idx], trace.position[idx], trace.euler[idx],
                    trace.body_rates[idx], trace.torque[idx], trace.sigma[idx],
                    trace.alpha[idx],
                ])
                write_csv(out / f"trace_{n}.csv",
                          ("t", "x", "y", "z", "phi", "theta", "psi",
                           "p", "q", "r", "u_phi", "u_theta", "u_psi",
                           "sigma_phi", "sigma_theta", "sigma_psi",
                           "alpha_phi", "alpha_theta", "alpha_psi"),
                          [tuple(r) for r in rows])
            err_rows = []
            for n, (trace, err) in enumerate(zip(traces, errors), start=1):
                for k in range(0, trace.t.size, stride):
                    err_rows.append((n, trace.t[k], err[k, 0], err[k, 1], err[k, 2]))
            write_csv(out / "errors.csv", ("uav", "t", "err_x", "err_y", "err_z"),
                      err_rows)

        self._run_stage("simulate", sec, uav_files, outputs, runner)

    def _stage_detect(self):
        out = self.out_dir / "detect"
        sec = dict(self.sections.get("detect", {}))
        sec.setdefault("seed", str(self.seed))
        cs = float(sec.get("cs", "0.4"))
        polarity = sec.get("polarity", "dark")
        images_rel = sec.get("images")

        if images_rel:
            image_files = sorted((self.base / images_rel).glob("*.p[gbp]m"))
            if not image_files:
                raise StageError("detect", f"no PNM images under {self.base / images_rel}")
            inputs = image_files
            outputs = [out / "masks" / f.name for f in image_files]

            def runner():
                (out / "masks").mkdir(parents=True, exist_ok=True)
                for f in image_files:
                    image = read_pnm(f.read_bytes())
                    if image.ndim == 3:
                        image = to_grayscale(image)
                    result = detect_defects(image, cs, polarity)
                    (out / "masks" / f.name).write_bytes(write_mask(result.mask))
        else:
            count = int(sec.get("synth_count", "6"))
            sigmas = _floats(sec.get("noise_sigmas", "0, 10, 20"))
            width = int(sec.get("width", "256"))
            height = int(sec.get("height", "192"))
            names = [f"img_{i:03d}.pgm" for i in range(count)]
            inputs = []
            outputs = (
                [out / "images" / n for n in names]
                + [out / "truth" / n for n in names]
                + [out / "masks" / n for n in names]
            )

            def runner():
                for sub in ("images", "truth", "masks"):
                    (out / sub).mkdir(parents=True, exist_ok=True)
                base_seed = int(sec["seed"])
                for i, name in enumerate(names):
                    sigma = sigmas[i % len(sigmas)]
                    image, truth = synth_defect_image(
                        width, height, noise_sigma=sigma, seed=base_seed + i
                    )
                    (out / "images" / name).write_bytes(write_pgm(image))
                    (out / "truth" / name).write_bytes(write_mask(truth))
                    result = detect_defects(image, cs, polarity)
                    (out / "masks" / name).write_bytes(write_mask(result.mask))

        self._run_stage("detect", sec, inputs, outputs, runner)

    def _stage_evaluate(self):
        out = self.out_dir / "evaluate"
        sec = dict(self.sections.get("evaluate", {}))
        pred_dir = self.base / sec["pred"] if "pred" in sec else self.out_dir / "detect" / "masks"
        truth_dir = self.base / sec["truth"] if "truth" in sec else self.out_dir / "detect" / "truth"
        pred_files = sorted(pred_dir.glob("*.p[gbp]m"))
        if not pred_files:
            raise StageError("evaluate", f"no predicted masks under {pred_dir}")
        report_path = out / "detection_report.txt"

        def runner():
            out.mkdir(parents=True, exist_ok=True)
            text = evaluate_masks(pred_dir, truth_dir)
            report_path.write_text(text)

        self._run_stage("evaluate", sec, pred_files, [report_path], runner)

    # -- outputs

    def _write_manifest(self):
        lines = [
            f"tool_version: {__version__}",
            f"seed: {self.seed}",
        ]
        if self.scenario_path is not None:
            lines.append(f"scenario: {self.scenario_path}")
            lines.append(f"scenario_sha256: {file_sha256(self.scenario_path)}")
        for rec in self.records:
            lines.append(f"[stage {rec.name}]")
            lines.append(f"cached: {str(rec.cached).lower()}")
            lines.append(f"duration_s: {rec.duration:.3f}")
            for p in rec.inputs:
                lines.append(f"input: {p} sha256={file_sha256(p)}")
            for p in rec.outputs:
                lines.append(f"output: {p} sha256={file_sha256(p)}")
        path = self.out_dir / "manifest.txt"
        path.write_text("\n".join(lines) + "\n")
        return path

    def _write_report(self):
        lines = [f"pipeline_report (seed {self.seed})"]
        cost_file = self.out_dir / "plan" / "cost.txt"
        if cost_file.exists():
            lines.append("")
            lines.append("[plan]")
            lines.append(cost_file.read_text().rstrip())
        errors_file = self.out_dir / "simulate" / "errors.csv"
        if errors_file.exists():
            lines.append("")
            lines.append("[simulate]")
            rows = np.array([
                [float(v) for v in line.split(",")]
                for line in errors_file.read_text().strip().splitlines()[1:]
            ])
            for uav in sorted(set(rows[:, 0].astype(int))):
                sel = rows[rows[:, 0] == uav]
                rms = float(np.sqrt((sel[:, 2:] ** 2).sum(axis=1).mean()))
                lines.append(f"uav_{uav}_rms_tracking_error_m: {_fmt(rms)}")
        eval_file = self.out_dir / "evaluate" / "detection_report.txt"
        if eval_file.exists():
            lines.append("")
            lines.append("[evaluate]")
            lines.append(eval_file.read_text().rstrip())
        path = self.out_dir / "report.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


def evaluate_masks(pred_dir, truth_dir):
    """Per-image and aggregate precision/recall/F table for matching filenames."""
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    pred_files = sorted(pred_dir.glob("*.p[gbp]m"))
    if not pred_files:
        raise ValidationError(f"no predicted masks under {pred_dir}")
    rows = []
    for pred_file in pred_files:
        truth_file = truth_dir / pred_file.name
        if not truth_file.exists():
            raise ValidationError(f"no ground truth for {pred_file.name} under {truth_dir}")
        pred = read_pnm(pred_file.read_bytes()) > 0
        truth = read_pnm(truth_file.read_bytes()) > 0
        rows.append((pred_file.name, f_measure(pred, truth)))

    lines = [f"{'image':<24} {'precision':>10} {'recall':>10} {'f_measure':>10}"]
    for name, m in rows:
        lines.append(f"{name:<24} {m.precision:>10.4f} {m.recall:>10.4f} {m.f_measure:>10.4f}")
    mean_f = sum(m.f_measure for _, m in rows) / len(rows)
    mean_p = sum(m.precision for _, m in rows) / len(rows)
    mean_r = sum(m.recall for _, m in rows) / len(rows)
    lines.append(f"{'mean':<24} {mean_p:>10.4f} {mean_r:>10.4f} {mean_f:>10.4f}")
    return "\n".join(lines) + "\n"


def run_pipeline(config_path, out_override=None) -> RunResult:
    """Execute the configured stages; see the module docstring for the grammar."""
    config_path = Path(config_path)
    pipeline = Pipeline(config_path.read_text(), config_dir=config_path.parent,
                        out_override=out_override)
    return pipeline.run()
