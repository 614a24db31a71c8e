"""Image files, sidecars, manifests, and the command-line front end."""

import math
import os

import numpy as np
import pytest

from dtgv import cli, imageio
from dtgv.degradation import make_stripe_phantom


@pytest.fixture
def phantom_file(tmp_path):
    ph = make_stripe_phantom(48, 48, math.radians(30.0), num_stripes=6, seed=3)
    path = tmp_path / "clean.png"
    imageio.write_image(path, ph.to_matrix())
    return path


class TestImageIo:
    @pytest.mark.parametrize("name,depth", [("a.png", 16), ("b.png", 8),
                                            ("c.pgm", 16), ("d.pgm", 8)])
    def test_round_trip_is_identity_on_quantized_data(self, tmp_path, name,
                                                      depth):
        rng = np.random.default_rng(1)
        values = rng.random((12, 17))
        path = tmp_path / name
        imageio.write_image(path, values, bit_depth=depth)
        back = imageio.read_image(path)
        # a second write/read cycle reproduces the file exactly
        path2 = tmp_path / ("again_" + name)
        imageio.write_image(path2, back, bit_depth=depth)
        again = imageio.read_image(path2)
        assert np.array_equal(back, again)
        maxval = 255 if depth == 8 else 65535
        assert np.allclose(back, values, atol=0.5 / maxval + 1e-12)

    def test_missing_file_raises_with_path(self, tmp_path):
        missing = tmp_path / "nope.png"
        with pytest.raises(FileNotFoundError, match="nope.png"):
            imageio.read_image(missing)

    def test_sidecar_round_trip(self, tmp_path):
        img = tmp_path / "img.png"
        imageio.write_image(img, np.zeros((4, 4)))
        imageio.write_sidecar(img, {"seed": 7, "scale": repr(1.25)})
        meta = imageio.read_sidecar(img)
        assert meta["seed"] == "7"
        assert float(meta["scale"]) == 1.25

    def test_manifest_parsing(self, tmp_path):
        mf = tmp_path / "run.txt"
        mf.write_text("# comment\ninput = a.png\nlambda-grid = 1,2,3\nrho=5\n")
        entries = imageio.read_manifest(mf)
        assert entries == {"input": "a.png", "lambda_grid": "1,2,3", "rho": "5"}


class TestCliDegrade:
    def test_degrade_writes_image_and_sidecar(self, tmp_path, phantom_file):
        out = tmp_path / "degraded.png"
        rc = cli.main(["degrade", "--input", str(phantom_file), "--output",
                       str(out), "--psf", "disk", "--psf-radius", "2",
                       "--snr", "40", "--seed", "9"])
        assert rc == 0
        assert out.exists()
        meta = imageio.read_sidecar(out)
        assert meta["seed"] == "9"
        assert meta["psf"] == "disk"

    def test_seed_reproduces_output_bit_for_bit(self, tmp_path, phantom_file):
        out1, out2 = tmp_path / "d1.png", tmp_path / "d2.png"
        args = ["--input", str(phantom_file), "--psf", "gaussian",
                "--snr", "38", "--seed", "4"]
        assert cli.main(["degrade", *args, "--output", str(out1)]) == 0
        assert cli.main(["degrade", *args, "--output", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_input_nonzero_exit_names_path(self, tmp_path, capsys):
        rc = cli.main(["degrade", "--input", str(tmp_path / "ghost.png"),
                       "--output", str(tmp_path / "x.png")])
        assert rc != 0
        assert "ghost.png" in capsys.readouterr().err

    def test_manifest_supplies_settings(self, tmp_path, phantom_file):
        out = tmp_path / "dm.png"
        mf = tmp_path / "m.txt"
        mf.write_text(f"input = {phantom_file}\noutput = {out}\n"
                      "psf = gaussian\nsnr = 39\nseed = 2\n")
        assert cli.main(["degrade", "--manifest", str(mf)]) == 0
        assert out.exists()
        assert imageio.read_sidecar(out)["target_snr"] == "39.0"


class TestCliEstimateDirection:
    def test_prints_angle_for_stripes(self, tmp_path, phantom_file, capsys):
        rc = cli.main(["estimate-direction", str(phantom_file)])
        assert rc == 0
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if l.startswith("theta_degrees")][0]
        assert abs(float(line.split(":")[1]) - 30.0) <= 2.0

    def test_blank_image_fails_cleanly(self, tmp_path, capsys):
        blank = tmp_path / "blank.png"
        imageio.write_image(blank, np.zeros((32, 32)))
        rc = cli.main(["estimate-direction", str(blank)])
        assert rc != 0
        assert "no dominant direction" in capsys.readouterr().err

    def test_debug_dumps_three_images_and_score_csv(self, tmp_path,
                                                    phantom_file):
        dumps = tmp_path / "dumps"
        rc = cli.main(["estimate-direction", str(phantom_file),
                       "--debug-dumps", str(dumps)])
        assert rc == 0
        images = sorted(p.name for p in dumps.glob("*.png"))
        assert images == ["edges.png", "hough.png", "scores.png"]
        rows = (dumps / "scores.csv").read_text().strip().splitlines()
        assert rows[0] == "eta_degrees,score"
        assert len(rows) == 181


class TestCliRestore:
    def _degraded(self, tmp_path, phantom_file):
        out = tmp_path / "obs.png"
        cli.main(["degrade", "--input", str(phantom_file), "--output",
                  str(out), "--psf", "disk", "--psf-radius", "2",
                  "--snr", "40", "--seed", "1"])
        return out

    def test_restore_single_lambda_writes_artifacts(self, tmp_path,
                                                    phantom_file):
        obs = self._degraded(tmp_path, phantom_file)
        out = tmp_path / "restored.png"
        rc = cli.main(["restore", "--input", str(obs), "--output", str(out),
                       "--lambda", "20", "--theta", "30", "--kmax", "40",
                       "--tol", "1e-3"])
        assert rc == 0
        assert out.exists()
        assert (tmp_path / "restored.png.report.csv").exists()
        assert (tmp_path / "restored.png.convergence.png").exists()

    def test_tgv_flag_forces_axis_alignment(self, tmp_path, phantom_file,
                                            capsys):
        obs = self._degraded(tmp_path, phantom_file)
        out = tmp_path / "r.png"
        rc = cli.main(["restore", "--input", str(obs), "--output", str(out),
                       "--lambda", "20", "--regularizer", "tgv",
                       "--kmax", "20", "--tol", "1e-3"])
        assert rc == 0
        assert "forcing theta = 0, a = 1" in capsys.readouterr().out
        meta = imageio.read_sidecar(out)
        assert float(meta["theta_degrees"]) == 0.0
        assert float(meta["a"]) == 1.0

    def test_omitted_theta_triggers_estimation(self, tmp_path, phantom_file,
                                               capsys):
        obs = self._degraded(tmp_path, phantom_file)
        out = tmp_path / "r2.png"
        rc = cli.main(["restore", "--input", str(obs), "--output", str(out),
                       "--lambda", "20", "--kmax", "20", "--tol", "1e-3"])
        assert rc == 0
        assert "estimated direction" in capsys.readouterr().out

    def test_lambda_grid_selects_min_rmse(self, tmp_path, phantom_file,
                                          capsys):
        obs = self._degraded(tmp_path, phantom_file)
        out = tmp_path / "r3.png"
        rc = cli.main(["restore", "--input", str(obs), "--output", str(out),
                       "--lambda-grid", "0.1,20,100",
                       "--reference", str(phantom_file),
                       "--theta", "30", "--kmax", "60", "--tol", "1e-3"])
        assert rc == 0
        meta = imageio.read_sidecar(out)
        chosen = float(meta["lambda"])
        assert chosen in (0.1, 20.0, 100.0)
        # the chosen lambda must actually be the best of the grid
        ref = imageio.read_image(phantom_file)
        best = imageio.read_image(out)
        for lam in (0.1, 20.0, 100.0):
            alt = tmp_path / f"alt_{lam}.png"
            cli.main(["restore", "--input", str(obs), "--output", str(alt),
                      "--lambda", str(lam), "--theta", "30",
                      "--kmax", "60", "--tol", "1e-3"])
            alt_rmse = np.sqrt(np.mean((imageio.read_image(alt) - ref) ** 2))
            best_rmse = np.sqrt(np.mean((best - ref) ** 2))
            assert best_rmse <= alt_rmse + 1e-6

    def test_grid_without_reference_fails(self, tmp_path, phantom_file,
                                          capsys):
        obs = self._degraded(tmp_path, phantom_file)
        rc = cli.main(["restore", "--input", str(obs), "--output",
                       str(tmp_path / "x.png"), "--lambda-grid", "1,10"])
        assert rc != 0
        assert "reference" in capsys.readouterr().err

    def test_failed_run_removes_partial_outputs(self, tmp_path, phantom_file,
                                                capsys):
        obs = self._degraded(tmp_path, phantom_file)
        out = tmp_path / "broken.png"
        # lambda missing entirely -> error after outputs were declared
        rc = cli.main(["restore", "--input", str(obs), "--output", str(out),
                       "--theta", "30"])
        assert rc != 0
        assert not out.exists()


class TestCliMetrics:
    def test_metrics_row(self, tmp_path, phantom_file, capsys):
        noisy = tmp_path / "noisy.png"
        ref_img = imageio.read_image(phantom_file)
        rng = np.random.default_rng(0)
        imageio.write_image(noisy, np.clip(
            ref_img + 0.05 * rng.standard_normal(ref_img.shape), 0, 1))
        out_csv = tmp_path / "m.csv"
        rc = cli.main(["metrics", "--restored", str(noisy), "--reference",
                       str(phantom_file), "--label", "demo",
                       "--output", str(out_csv)])
        assert rc == 0
        stdout = capsys.readouterr().out.splitlines()
        assert stdout[0] == "Model,RMSE,ISNR,MSSIM"
        assert stdout[1].startswith("demo,")
        assert out_csv.read_text().splitlines()[1].startswith("demo,")


class TestCliBenchmark:
    def test_small_benchmark_produces_table_and_figures(self, tmp_path,
                                                        capsys):
        outdir = tmp_path / "bench"
        rc = cli.main(["benchmark", "--output-dir", str(outdir),
                       "--size", "48", "--num-stripes", "6",
                       "--snrs", "40", "--blurs", "disk",
                       "--psf-radius", "2", "--lambda-grid", "5,50",
                       "--kmax", "40", "--tol", "1e-3", "--seed", "0",
                       "--a", "0.7"])
        assert rc == 0
        csv_path = outdir / "benchmark.csv"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "Blur,SNR,Model,lambda,RMSE,ISNR,MSSIM,Iters,Time"
        assert len(lines) == 3  # one cell, two models
        models = [l.split(",")[2] for l in lines[1:]]
        assert sorted(models) == ["DTGV", "TGV"]
        assert (outdir / "rmse_bars.png").exists()
        assert (outdir / "phantom.png").exists()
        history = list(outdir.glob("rmse_history_*.png"))
        assert len(history) == 1

    def test_cells_share_the_degraded_image(self, tmp_path):
        # fairness: both model rows of a cell must come from the same data;
        # the benchmark stores a single degraded image per cell
        from dtgv.benchmark import BenchmarkCell, run_cell
        from dtgv.degradation import out_of_focus_psf
        from dtgv.solver import SolverConfig
        ph = make_stripe_phantom(48, 48, math.radians(30.0), num_stripes=6,
                                 seed=3)
        cell = BenchmarkCell("out-of-focus", out_of_focus_psf(2.0, 5), 40.0, 1)
        base = SolverConfig(lam=1.0, a=0.7, k_max=40, tol=1e-3)
        result = run_cell(cell, ph, [5.0, 50.0], base)
        assert len(result.rows) == 2
        assert result.degraded.data.max() == 1.0
