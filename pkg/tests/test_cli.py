import json

import numpy as np
import pytest

from cablerecon import cli, pipeline
from cablerecon.cloudproc import load_ply


class TestGenScene:
    def test_same_seed_is_byte_identical(self, tmp_path):
        a = tmp_path / "a.yaml"
        b = tmp_path / "b.yaml"
        assert cli.main(["gen-scene", "cs1_occluded", "--seed", "7", "--out", str(a)]) == 0
        assert cli.main(["gen-scene", "cs1_occluded", "--seed", "7", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_template_fails_naming_the_valid_ones(self, tmp_path, capsys):
        assert cli.main(["gen-scene", "nosuch", "--out", str(tmp_path / "x.yaml")]) == 1
        err = capsys.readouterr().err
        assert "cs1_plain" in err and "cs2_occluded" in err


class TestRun:
    def test_complete_templates_exit_zero(self, template_runs):
        for tpl, result in template_runs.items():
            assert result.exit_status == pipeline.EXIT_COMPLETE, tpl

    def test_no_tactile_is_partial(self, no_tactile_run):
        assert no_tactile_run.exit_status == pipeline.EXIT_PARTIAL
        assert all(s.final_endpoints > 2 for s in no_tactile_run.stats)

    def test_cli_run_and_seed_precedence(self, tmp_path, scenario_files, monkeypatch):
        monkeypatch.setenv("DLO_SEED", "123")
        out = tmp_path / "envseed"
        code = cli.main(
            ["run", str(scenario_files["cs1_plain"]), "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 123
        # --seed wins over the environment
        out2 = tmp_path / "argseed"
        cli.main(
            ["run", str(scenario_files["cs1_plain"]), "--out", str(out2), "--seed", "5"]
        )
        manifest2 = json.loads((out2 / "manifest.json").read_text())
        assert manifest2["seed"] == 5

    def test_run_directory_is_self_describing(self, template_runs):
        run_dir = template_runs["cs1_occluded"].out_dir
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert (run_dir / manifest["scenario"]).exists()
        for rel, digest in manifest["artifacts"].items():
            assert (run_dir / rel).exists()
        assert len(manifest["plane"]) == 4

    def test_canonical_artifacts_present(self, template_runs):
        cable_dir = template_runs["cs2_occluded"].out_dir / "cable_00"
        for name in pipeline.CANONICAL_CLOUDS:
            suffix = ".csv" if name == "P_sorted" else ".ply"
            assert (cable_dir / f"{name}{suffix}").exists()
        assert (cable_dir / "P_dense.ply").exists()
        assert (cable_dir / "trace.csv").exists()

    def test_cs2_plain_yields_one_spline_per_cable(self, template_runs):
        run = template_runs["cs2_plain"]
        assert len(run.stats) == 2
        for stats in run.stats:
            cable_dir = run.out_dir / stats.directory
            splines = sorted(cable_dir.glob("spline_seg*.yaml"))
            assert len(splines) == 1
            assert stats.final_endpoints == 2
            # near-closed loops terminate their walks at the adjacent
            # opposite endpoint, adding only a couple of contact points
            assert stats.tactile_points <= 4

    def test_interpolated_cloud_sits_at_cable_height(self, template_runs):
        # the exported model is lifted one radius off the fitted plane
        run = template_runs["cs2_plain"]
        manifest = run.manifest
        plane = np.asarray(manifest["plane"])
        cloud = load_ply(run.out_dir / "cable_00" / "P_interpolated.ply")
        heights = cloud @ plane[:3] + plane[3]
        radius = manifest["cables"][0]["radius"]
        assert np.allclose(heights, radius, atol=2e-4)


class TestEval:
    def test_self_evaluation_is_tight(self, template_runs, tmp_path):
        run_dir = template_runs["cs1_plain"].out_dir
        report = pipeline.evaluate_run(run_dir, run_dir, tmp_path / "r.yaml")
        # source is the interpolated model, target the dense visual cloud,
        # so the self-comparison is small but not exactly zero
        assert report["cables"][0]["icp_rmse"] < 1.5e-3

    def test_cli_eval_against_reference_run(self, template_runs, tmp_path, capsys):
        code = cli.main(
            [
                "eval",
                str(template_runs["cs1_occluded"].out_dir),
                str(template_runs["cs1_plain"].out_dir),
                "--out",
                str(tmp_path / "report.yaml"),
            ]
        )
        assert code == 0
        assert "icp_rmse" in capsys.readouterr().out
        assert (tmp_path / "report.yaml").exists()

    def test_eval_accepts_a_scenario_as_reference(self, template_runs, scenario_files, tmp_path):
        report = pipeline.evaluate_run(
            template_runs["cs2_occluded"].out_dir,
            scenario_files["cs2_plain"],
            tmp_path / "r.yaml",
        )
        assert len(report["cables"]) == 2
        for row in report["cables"]:
            assert row["icp_rmse"] < 0.008

    def test_missing_artifacts_error(self, tmp_path):
        with pytest.raises(OSError):
            pipeline.evaluate_run(tmp_path / "nope", tmp_path / "nope2")


class TestPlot:
    def test_seven_svgs_per_cable_with_endpoint_markers(self, template_runs):
        run_dir = template_runs["cs1_occluded"].out_dir
        written = pipeline.plot_run(run_dir)
        per_cable = [p for p in written if p.parent.name == "cable_00"]
        assert len(per_cable) == 7

        sorted_csv = (run_dir / "cable_00" / "P_sorted.csv").read_text().splitlines()
        segment_ids = {line.split(",")[0] for line in sorted_csv[1:] if line}
        endpoint_count = 2 * len(segment_ids)
        svg = (run_dir / "cable_00" / "P_sorted.svg").read_text()
        assert svg.count('stroke="red"') == endpoint_count

    def test_empty_tactile_plot_still_renders(self, no_tactile_run):
        written = pipeline.plot_run(no_tactile_run.out_dir)
        tactile_svg = next(p for p in written if p.name == "P_tactile.svg")
        text = tactile_svg.read_text()
        assert "<svg" in text and "<line" in text
