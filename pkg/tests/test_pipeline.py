from pathlib import Path

import numpy as np
import pytest

from uavinspect.pipeline import (
    Pipeline,
    StageError,
    compare_planners,
    comparison_table,
    evaluate_masks,
    parse_config,
    read_path_csv,
    run_pipeline,
    write_path_csv,
)
from uavinspect.planner import PsoConfig
from uavinspect.scenario import ScenarioError, load_scenario
from uavinspect.validation import ValidationError

TINY_SCENARIO = """
[workspace]
min = 0, 0, 0
max = 30, 30, 20

[mission]
start = 3, 15, 10
target = 27, 15, 10
altitude_ref = 10

[obstacle]
center = 15, 15, 10
radius = 3
margin = 0.5
"""

TINY_CONFIG = """
[pipeline]
scenario = tiny.scn
seed = 3
stages = plan, formation, simulate, detect, evaluate

[plan]
particles = 40
waypoints = 4
iterations = 60

[simulate]
speed = 6.0
duration = 5.0
stride = 25

[detect]
synth_count = 3
noise_sigmas = 0, 10
width = 96
height = 64
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "tiny.scn").write_text(TINY_SCENARIO)
    (tmp_path / "run.cfg").write_text(TINY_CONFIG)
    return tmp_path


class TestConfigParsing:
    def test_sections_and_keys(self):
        cfg = parse_config(TINY_CONFIG)
        assert cfg["pipeline"]["seed"] == "3"
        assert cfg["plan"]["particles"] == "40"

    def test_unknown_section_rejected(self):
        with pytest.raises(ScenarioError, match="unknown section"):
            parse_config("[nonsense]\nx = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_config("[plan]\nseed = 1\nseed = 2\n")


class TestPathCsv:
    def test_roundtrip(self, tmp_path):
        pts = np.array([[0.5, 1.25, -3.0], [4.0, 5.5, 6.125]])
        f = tmp_path / "p.csv"
        write_path_csv(f, pts)
        assert np.array_equal(read_path_csv(f), pts)

    def test_header_enforced(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValidationError):
            read_path_csv(f)


class TestPipelineRun:
    def test_full_run_produces_artifacts(self, workdir):
        result = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        out = result.out_dir
        assert (out / "plan" / "path.csv").exists()
        assert (out / "plan" / "convergence.csv").exists()
        assert (out / "formation" / "uav_3_path.csv").exists()
        assert (out / "simulate" / "trace_1.csv").exists()
        assert (out / "simulate" / "errors.csv").exists()
        assert (out / "detect" / "masks" / "img_000.pgm").exists()
        assert (out / "evaluate" / "detection_report.txt").exists()
        assert (out / "manifest.txt").exists()
        assert (out / "report.txt").exists()
        # every stage ran fresh
        assert [r.cached for r in result.records] == [False] * 5

    def test_second_run_all_cached(self, workdir):
        run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        rerun = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        assert [r.cached for r in rerun.records] == [True] * 5

    def test_detect_param_change_only_recomputes_detection(self, workdir):
        run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        changed = TINY_CONFIG.replace("[detect]", "[detect]\ncs = 0.35")
        (workdir / "run.cfg").write_text(changed)
        rerun = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        cached = {r.name: r.cached for r in rerun.records}
        assert cached["plan"] and cached["formation"] and cached["simulate"]
        assert not cached["detect"]

    def test_determinism_across_fresh_runs(self, workdir):
        a = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out_a"))
        b = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out_b"))
        for rel in (
            Path("plan") / "path.csv",
            Path("plan") / "convergence.csv",
            Path("simulate") / "trace_1.csv",
            Path("simulate") / "errors.csv",
            Path("detect") / "masks" / "img_000.pgm",
            Path("detect") / "masks" / "img_002.pgm",
            Path("report.txt"),
        ):
            assert (a.out_dir / rel).read_bytes() == (b.out_dir / rel).read_bytes(), rel

    def test_manifest_hashes_match_files(self, workdir):
        result = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        import hashlib

        for line in result.manifest_path.read_text().splitlines():
            if line.startswith(("input: ", "output: ")):
                path_part, hash_part = line.split(" sha256=")
                path = Path(path_part.split(": ", 1)[1])
                assert path.exists()
                digest = hashlib.sha256(path.read_bytes()).hexdigest()
                assert digest == hash_part

    def test_missing_scenario_is_validation_error(self, workdir):
        cfg = TINY_CONFIG.replace("tiny.scn", "nope.scn")
        (workdir / "run.cfg").write_text(cfg)
        with pytest.raises(ValidationError):
            run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))

    def test_stage_failure_carries_stage_name(self, workdir):
        cfg = "[pipeline]\nscenario = tiny.scn\nstages = assess\n"
        (workdir / "run.cfg").write_text(cfg)
        with pytest.raises(StageError, match="assess"):
            # tiny scenario has no [camera]/[coverage] sections
            run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))

    def test_detect_only_stage(self, workdir):
        cfg = "[pipeline]\nseed = 5\nstages = detect, evaluate\n[detect]\nsynth_count = 2\nwidth = 64\nheight = 48\n"
        (workdir / "run.cfg").write_text(cfg)
        result = run_pipeline(workdir / "run.cfg", out_override=str(workdir / "out"))
        assert {r.name for r in result.records} == {"detect", "evaluate"}
        report = (result.out_dir / "evaluate" / "detection_report.txt").read_text()
        assert "mean" in report


class TestComparePlanners:
    def test_requires_five_seeds(self):
        scenario = load_scenario(TINY_SCENARIO)
        with pytest.raises(ValidationError):
            compare_planners(scenario, seeds=[1], config=PsoConfig(swarm_size=5,
                                                                   waypoints=2,
                                                                   iterations=5))

    def test_self_comparison_is_consistent(self):
        scenario = load_scenario(TINY_SCENARIO)
        cfg = PsoConfig(swarm_size=20, waypoints=3, iterations=40)
        comparison = compare_planners(scenario, seeds=range(5), config=cfg)
        assert len(comparison.rows) == 5
        # the two planners share decoded initial populations per seed
        assert comparison.theta_initial_median == comparison.pso_initial_median
        table = comparison_table(comparison)
        assert "theta_pso_wins" in table


class TestEvaluateMasks:
    def test_reports_per_image_and_mean(self, tmp_path):
        from uavinspect.pnm import write_mask

        pred = tmp_path / "pred"
        truth = tmp_path / "truth"
        pred.mkdir()
        truth.mkdir()
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:4] = True
        (pred / "a.pgm").write_bytes(write_mask(mask))
        (truth / "a.pgm").write_bytes(write_mask(mask))
        text = evaluate_masks(pred, truth)
        assert "a.pgm" in text
        assert "1.0000" in text

    def test_missing_truth_rejected(self, tmp_path):
        from uavinspect.pnm import write_mask

        pred = tmp_path / "pred"
        truth = tmp_path / "truth"
        pred.mkdir()
        truth.mkdir()
        (pred / "a.pgm").write_bytes(write_mask(np.zeros((4, 4), dtype=bool)))
        with pytest.raises(ValidationError, match="ground truth"):
            evaluate_masks(pred, truth)
