"""Batch command-line front end.

Commands: degrade, estimate-direction, restore, benchmark, metrics.  Every
command is deterministic given its flags (plus manifest) and seed; report
paths render matplotlib figures next to the delimited output.  Flags override
manifest entries, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import benchmark as bench
from . import imageio
from .degradation import DegradationConfig, degrade, make_stripe_phantom
from .direction import estimate_direction
from .errors import DtgvError
from .grids import ImageGrid
from .metrics import evaluate
from .operators import identity_operator, make_blur_operator
from .solver import ProblemOperators, SolverConfig, run_admm

_DEFAULTS = {
    "rho": 10.0,
    "beta": 2.0 / 3.0,
    "a": 1.0,
    "tol": 1e-4,
    "kmax": 500,
    "gamma": 1e-10,
    "seed": 0,
    "snr": 43.0,
    "psf": "disk",
    "psf_radius": 5.0,
    "psf_variance": 2.0,
    "regularizer": "dtgv",
}


class _OutputGuard:
    """Remove declared output files if the command fails midway."""

    def __init__(self):
        self.paths = []

    def declare(self, *paths):
        self.paths.extend(str(p) for p in paths)
        return paths[0] if len(paths) == 1 else paths

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.paths:
                if os.path.exists(p):
                    os.remove(p)
        return False


def _load_manifest(args) -> dict:
    if getattr(args, "manifest", None):
        return imageio.read_manifest(args.manifest)
    return {}


def _pick(args, manifest, key, cast=str, default=None):
    """Flag value if given, else manifest entry, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in manifest:
        raw = manifest[key]
        return cast(raw)
    return default if default is not None else _DEFAULTS.get(key)


def _float_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _str_list(text) -> list:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _require_input(path) -> str:
    if path is None:
        raise DtgvError("no input image given")
    if not os.path.exists(str(path)):
        raise DtgvError(f"input path does not exist: {path}")
    return str(path)


def _psf_from_settings(kind, radius, variance, size):
    return bench.build_psf(kind, radius=radius, variance=variance, size=size)


def _blur_operator(psf, height, width):
    if psf is None:
        return identity_operator(height, width)
    return make_blur_operator(psf, height, width)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_degrade(args) -> int:
    manifest = _load_manifest(args)
    in_path = _require_input(_pick(args, manifest, "input"))
    out_path = _pick(args, manifest, "output")
    if out_path is None:
        raise DtgvError("degrade: no output path given")
    psf_kind = _pick(args, manifest, "psf")
    radius = float(_pick(args, manifest, "psf_radius", float))
    variance = float(_pick(args, manifest, "psf_variance", float))
    size = _pick(args, manifest, "psf_size", int, default=0) or None
    snr = float(_pick(args, manifest, "snr", float))
    gamma = float(_pick(args, manifest, "gamma", float))
    seed = int(_pick(args, manifest, "seed", int))
    bit_depth = int(_pick(args, manifest, "bit_depth", int, default=16))

    clean = ImageGrid.from_matrix(imageio.read_image(in_path))
    psf = _psf_from_settings(psf_kind, radius, variance, size)
    blur = _blur_operator(psf, clean.height, clean.width)
    config = DegradationConfig(psf=psf, target_snr=snr, gamma_const=gamma, seed=seed)
    b, scale = degrade(clean, config, blur)

    with _OutputGuard() as guard:
        guard.declare(out_path, imageio.sidecar_path(out_path))
        imageio.write_image(out_path, b.to_matrix(), bit_depth=bit_depth)
        imageio.write_sidecar(out_path, {
            "input": in_path, "psf": psf_kind, "psf_radius": radius,
            "psf_variance": variance, "psf_size": size or "",
            "target_snr": snr, "gamma": gamma, "seed": seed,
            "scale": repr(scale), "height": clean.height, "width": clean.width,
        })
    print(f"wrote {out_path} (scale {scale:.6g}, target SNR {snr} dB)")
    return 0


def cmd_estimate_direction(args) -> int:
    in_path = _require_input(args.image)
    b = ImageGrid.from_matrix(imageio.read_image(in_path))
    est = estimate_direction(b, weighted=args.weighted,
                             keep_stages=args.debug_dumps is not None)
    print(f"theta_degrees: {est.theta_degrees:.3f}")
    print(f"theta_radians: {est.theta:.6f}")
    print(f"eta_max: {est.eta_max}")
    if args.debug_dumps is not None:
        from . import reports
        outdir = args.debug_dumps
        os.makedirs(outdir, exist_ok=True)
        reports.image_figure(os.path.join(outdir, "edges.png"),
                             est.masked_edges.magnitude, title="masked edges")
        reports.hough_figure(os.path.join(outdir, "hough.png"), est.accumulator)
        reports.score_figure(os.path.join(outdir, "scores.png"),
                             est.scores, est.eta_max)
        with open(os.path.join(outdir, "scores.csv"), "w", encoding="utf-8") as fh:
            fh.write("eta_degrees,score\n")
            for eta, score in zip(range(-90, 90), est.scores):
                fh.write(f"{eta},{score!r}\n")
        print(f"debug dumps in {outdir}")
    return 0


def _restore_config(args, manifest, theta_rad, a_value=None) -> SolverConfig:
    beta = float(_pick(args, manifest, "beta", float))
    if not (0.0 < beta < 1.0):
        raise DtgvError(f"beta must lie in (0, 1), got {beta}")
    if a_value is None:
        a_value = float(_pick(args, manifest, "a", float))
    return SolverConfig(
        lam=1.0,  # placeholder, set per run
        theta=theta_rad,
        a=a_value,
        alpha0=beta, alpha1=1.0 - beta,
        rho=float(_pick(args, manifest, "rho", float)),
        tol=float(_pick(args, manifest, "tol", float)),
        k_max=int(_pick(args, manifest, "kmax", int)),
        gamma=float(_pick(args, manifest, "gamma", float)),
    )


def cmd_restore(args) -> int:
    manifest = _load_manifest(args)
    in_path = _require_input(_pick(args, manifest, "input"))
    out_path = _pick(args, manifest, "output")
    if out_path is None:
        raise DtgvError("restore: no output path given")
    sidecar = imageio.read_sidecar(in_path)
    regularizer = str(_pick(args, manifest, "regularizer")).lower()
    if regularizer not in ("dtgv", "tgv"):
        raise DtgvError(f"unknown regularizer {regularizer!r}")

    b = ImageGrid.from_matrix(imageio.read_image(in_path))

    # blur settings: flags, then manifest, then the degradation sidecar
    psf_kind = _pick(args, manifest, "psf", default=sidecar.get("psf", "disk"))
    radius = float(_pick(args, manifest, "psf_radius", float,
                         default=float(sidecar.get("psf_radius", 5.0))))
    variance = float(_pick(args, manifest, "psf_variance", float,
                           default=float(sidecar.get("psf_variance", 2.0))))
    size = _pick(args, manifest, "psf_size", int, default=0) or None
    psf = _psf_from_settings(psf_kind, radius, variance, size)
    blur = _blur_operator(psf, b.height, b.width)

    if regularizer == "tgv":
        theta_rad, a_value = 0.0, 1.0
        print("regularizer tgv: forcing theta = 0, a = 1")
    else:
        theta_flag = _pick(args, manifest, "theta", float, default=math.nan)
        if theta_flag is None or (isinstance(theta_flag, float) and math.isnan(theta_flag)):
            est = estimate_direction(b)
            theta_rad = est.theta
            print(f"estimated direction: {est.theta_degrees:.3f} deg "
                  f"(eta_max {est.eta_max})")
        else:
            theta_rad = math.radians(float(theta_flag))
        a_value = None

    config = _restore_config(args, manifest, theta_rad, a_value)

    lam_single = _pick(args, manifest, "lam", float, default=math.nan)
    grid_raw = _pick(args, manifest, "lambda_grid", _float_list, default=[])
    lam_grid = _float_list(grid_raw) if grid_raw else []
    ref_path = _pick(args, manifest, "reference")

    operators = ProblemOperators(blur, bench._grad_for(config, b.height, b.width))
    reference = None
    if ref_path is not None:
        reference = imageio.read_image(_require_input(ref_path))

    report_csv = str(out_path) + ".report.csv"
    figure_png = str(out_path) + ".convergence.png"
    with _OutputGuard() as guard:
        guard.declare(out_path, report_csv, figure_png)
        if lam_grid:
            if reference is None:
                raise DtgvError("restore: --lambda-grid tuning needs --reference")
            tuned = bench.restore_tuned(b, config, operators, lam_grid,
                                        reference, label=regularizer)
            restored, report, lam_used = tuned.restored, tuned.report, tuned.lam
            record = tuned.record
        else:
            if lam_single is None or math.isnan(lam_single):
                raise DtgvError("restore: give --lambda or --lambda-grid")
            u, report = run_admm(b, config.with_lambda(float(lam_single)),
                                 operators, reference=reference)
            restored = np.clip(u.to_matrix(), 0.0, 1.0)
            lam_used = float(lam_single)
            record = (evaluate(b.to_matrix(), restored, reference,
                               label=regularizer)
                      if reference is not None else None)
        imageio.write_image(out_path, restored, bit_depth=16)
        report.to_csv(report_csv)
        from . import reports
        reports.convergence_figure(figure_png, report)
        imageio.write_sidecar(out_path, {
            "model": regularizer, "lambda": lam_used,
            "theta_degrees": math.degrees(config.theta), "a": config.a,
            "rho": config.rho, "tol": config.tol, "kmax": config.k_max,
            "iterations": report.iterations, "stop_reason": report.stop_reason,
            "solver_seconds": f"{report.total_seconds:.3f}",
            "max_negativity": repr(report.max_negativity),
        })
    print(f"restored {in_path} -> {out_path} "
          f"[{regularizer}, lambda={lam_used:g}, iters={report.iterations}, "
          f"stop={report.stop_reason}, {report.total_seconds:.2f}s]")
    if record is not None:
        print(f"rmse={record.rmse:.6e} isnr={record.isnr:.4f} "
              f"mssim={record.mssim:.6f}")
    return 0


def cmd_metrics(args) -> int:
    rec_path = _require_input(args.restored)
    ref_path = _require_input(args.reference)
    rec = imageio.read_image(rec_path)
    ref = imageio.read_image(ref_path)
    obs = imageio.read_image(_require_input(args.observed)) \
        if args.observed else rec
    record = evaluate(obs, rec, ref, label=args.label)
    line = record.csv_row()
    print("Model,RMSE,ISNR,MSSIM")
    print(line)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("Model,RMSE,ISNR,MSSIM\n")
            fh.write(line + "\n")
    return 0


def cmd_benchmark(args) -> int:
    manifest = _load_manifest(args)
    outdir = _pick(args, manifest, "output_dir")
    if outdir is None:
        raise DtgvError("benchmark: no output directory given")
    os.makedirs(outdir, exist_ok=True)
    size = int(_pick(args, manifest, "size", int, default=128))
    theta_true = float(_pick(args, manifest, "theta_true", float, default=30.0))
    num_stripes = int(_pick(args, manifest, "num_stripes", int, default=16))
    snrs = _float_list(_pick(args, manifest, "snrs", _float_list, default="43,37"))
    blurs = _str_list(_pick(args, manifest, "blurs", _str_list,
                            default="disk,gaussian"))
    radius = float(_pick(args, manifest, "psf_radius", float))
    variance = float(_pick(args, manifest, "psf_variance", float))
    grid_raw = _pick(args, manifest, "lambda_grid", _float_list,
                     default=list(bench.DEFAULT_LAMBDA_GRID))
    lam_grid = _float_list(grid_raw)
    seed = int(_pick(args, manifest, "seed", int))
    models = tuple(_str_list(_pick(args, manifest, "models", _str_list,
                                   default="dtgv,tgv")))
    base = _restore_config(args, manifest, 0.0)

    cells = []
    cell_seed = seed
    for blur_name in blurs:
        psf = _psf_from_settings(blur_name, radius, variance, None)
        pretty = {"disk": "out-of-focus", "oof": "out-of-focus",
                  "gauss": "gaussian"}.get(blur_name, blur_name)
        for snr in snrs:
            cells.append(bench.BenchmarkCell(pretty, psf, float(snr), cell_seed))
            cell_seed += 1

    results = bench.run_benchmark(size, theta_true, lam_grid, base,
                                  cells=cells, num_stripes=num_stripes,
                                  phantom_seed=seed + 1000, models=models)

    from . import reports
    rows = []
    for res in results:
        tag = f"{res.cell.blur_name.replace('-', '_')}_snr{res.cell.snr:g}"
        imageio.write_image(os.path.join(outdir, f"degraded_{tag}.png"),
                            res.degraded.to_matrix())
        histories = {}
        for model, tuned in res.tuned.items():
            imageio.write_image(os.path.join(outdir, f"restored_{model}_{tag}.png"),
                                tuned.restored)
            if tuned.report.rmse_history:
                histories[model] = tuned.report.rmse_history
        if histories:
            reports.rmse_history_figure(
                os.path.join(outdir, f"rmse_history_{tag}.png"), histories)
        rows.extend(res.rows)

    csv_path = os.path.join(outdir, "benchmark.csv")
    bench.write_benchmark_csv(csv_path, rows)
    reports.benchmark_bars_figure(os.path.join(outdir, "rmse_bars.png"), rows)
    imageio.write_image(os.path.join(outdir, "phantom.png"),
                        results[0].clean.to_matrix())
    print(f"benchmark table: {csv_path} ({len(rows)} rows)")
    for row in rows:
        print("  " + ",".join(row[c] for c in bench.BENCHMARK_COLUMNS))
    return 0


def cmd_make_phantom(args) -> int:
    phantom = make_stripe_phantom(args.size, args.size,
                                  math.radians(args.theta_true),
                                  profile=args.profile,
                                  num_stripes=args.num_stripes, seed=args.seed)
    with _OutputGuard() as guard:
        guard.declare(args.output)
        imageio.write_image(args.output, phantom.to_matrix())
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=float,
                   help="regularization weight")
    p.add_argument("--lambda-grid", dest="lambda_grid",
                   help="comma list of lambdas for trial-and-error tuning")
    p.add_argument("--rho", type=float, help="penalty parameter (default 10)")
    p.add_argument("--beta", type=float,
                   help="alpha0 = beta, alpha1 = 1 - beta (default 2/3)")
    p.add_argument("--theta", type=float,
                   help="texture direction in degrees (default: estimate)")
    p.add_argument("--a", type=float, help="cross-direction scaling (default 1)")
    p.add_argument("--tol", type=float, help="relative-change tolerance (default 1e-4)")
    p.add_argument("--kmax", type=int, help="iteration cap (default 500)")
    p.add_argument("--gamma", type=float, help="background term (default 1e-10)")
    p.add_argument("--regularizer", choices=("dtgv", "tgv"),
                   help="dtgv (directional) or tgv (theta=0, a=1)")


def _add_psf_flags(p):
    p.add_argument("--psf", choices=("gaussian", "gauss", "disk", "oof", "none"),
                   help="blur kind (default disk)")
    p.add_argument("--psf-radius", dest="psf_radius", type=float,
                   help="disk radius (default 5)")
    p.add_argument("--psf-variance", dest="psf_variance", type=float,
                   help="gaussian variance (default 2)")
    p.add_argument("--psf-size", dest="psf_size", type=int,
                   help="kernel size (odd; default fits the blur)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtgv",
        description="Directional-texture image restoration under Poisson noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="blur + Poisson-corrupt a clean image")
    p.add_argument("--manifest")
    p.add_argument("--input")
    p.add_argument("--output")
    _add_psf_flags(p)
    p.add_argument("--snr", type=float, help="target SNR in dB (default 43)")
    p.add_argument("--gamma", type=float, help="background term (default 1e-10)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--bit-depth", dest="bit_depth", type=int, choices=(8, 16))
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("estimate-direction",
                       help="print the dominant texture direction")
    p.add_argument("image")
    p.add_argument("--weighted", action="store_true",
                   help="vote with edge magnitudes instead of binary flags")
    p.add_argument("--debug-dumps", dest="debug_dumps", metavar="DIR",
                   help="write edge/vote images and the score CSV here")
    p.set_defaults(func=cmd_estimate_direction)

    p = sub.add_parser("restore", help="run the ADMM restoration")
    p.add_argument("--manifest")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--reference", help="clean image (enables tuning + metrics)")
    _add_psf_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("metrics", help="RMSE/ISNR/MSSIM of a restoration")
    p.add_argument("--restored", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--observed", help="degraded image for the ISNR numerator")
    p.add_argument("--label", default="run")
    p.add_argument("--output", help="also write the CSV row here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("benchmark",
                       help="degrade/estimate/restore sweep with a results table")
    p.add_argument("--manifest")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--size", type=int, help="phantom side length (default 128)")
    p.add_argument("--theta-true", dest="theta_true", type=float,
                   help="phantom direction in degrees (default 30)")
    p.add_argument("--num-stripes", dest="num_stripes", type=int)
    p.add_argument("--snrs", help="comma list of target SNRs (default 43,37)")
    p.add_argument("--blurs", help="comma list of blur kinds (default disk,gaussian)")
    p.add_argument("--models", help="comma list of models (default dtgv,tgv)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    _add_psf_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("make-phantom", help="write a synthetic stripe phantom")
    p.add_argument("--output", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--theta-true", dest="theta_true", type=float, default=30.0)
    p.add_argument("--profile", choices=("affine", "constant"), default="affine")
    p.add_argument("--num-stripes", dest="num_stripes", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_phantom)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DtgvError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
