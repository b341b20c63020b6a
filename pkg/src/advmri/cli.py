"""Command-line interface.

Examples::

    advmri phantom --n 64 --count 2 --seed 1 --out data
    advmri attack --image data/phantom_0000.cfi --lines 20 --noise-rel 0.04 \\
        --grid 4 4 --calib-samples 5 --out runs
    advmri table --results runs --out runs
    advmri spike1d --n 256 --m 32
    advmri recover1d --mode l1 --n 128 --s 3 --m 40 --trials 100
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import formats, report
from . import transforms as tf
from .attack import AttackConfig, attack_grid
from .phantoms import PhantomSpec, gen_phantom
from .theory1d import InvariantError, RecoveryTrial, recovery_experiment, spike_attack
from .tvrecon import CalibrationReport, ReconConfig, add_noise, calibrate, default_grid, reconstruct_tv

log = logging.getLogger("advmri")


class CLIError(Exception):
    pass


def derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def phantom_images(n: int, count: int, seed: int, ellipses=(3, 10)) -> list[np.ndarray]:
    return [gen_phantom(PhantomSpec(n, derived_seed(seed, i), tuple(ellipses))) for i in range(count)]


def _mask_from_args(args, n: int | None = None) -> tf.SamplingMask:
    if getattr(args, "mask", None):
        bitmap = formats.read_cfi(args.mask).real != 0
        return tf.SamplingMask(bitmap)
    if args.lines is None:
        raise CLIError("give either --mask or --lines")
    n = n if n is not None else args.n
    if n is None:
        raise CLIError("--lines needs an image size (--n or an input image)")
    return tf.make_radial_mask(n, args.lines)


def _load_image(path) -> np.ndarray:
    img = formats.read_cfi(path).astype(complex)
    if img.shape[0] != img.shape[1]:
        raise CLIError(f"{path}: image must be square")
    return img


# ---------------------------------------------------------------------------
# subcommands; each returns (inputs, outputs, extra)
# ---------------------------------------------------------------------------


def cmd_phantom(args):
    out = []
    for i, img in enumerate(phantom_images(args.n, args.count, args.seed, args.ellipses)):
        p = args.out / f"phantom_{i:04d}.cfi"
        formats.write_cfi(p, img)
        out.append(p)
    print(f"wrote {len(out)} phantom(s) to {args.out}")
    return [], out, None


def cmd_mask(args):
    mask = tf.make_radial_mask(args.n, args.lines)
    p = args.out / f"mask_{args.n}_{args.lines}.cfi"
    formats.write_cfi(p, mask.bitmap.astype(float))
    print(f"n={mask.n} lines={args.lines} m={mask.m} fraction={mask.fraction:.4f} subsampling={1 / mask.fraction:.3f}")
    return [], [p], {"m": mask.m}


def cmd_measure(args):
    x = _load_image(args.image)
    mask = _mask_from_args(args, x.shape[0])
    y = tf.forward(x, mask)
    if args.noise_rel:
        y = add_noise(y, args.noise_rel, np.random.default_rng(args.seed))
    p = args.out / f"{Path(args.image).stem}_y.cfi"
    formats.write_cfi(p, y)
    inputs = [args.image] + ([args.mask] if args.mask else [])
    return inputs, [p], {"m": mask.m}


def cmd_reconstruct(args):
    y = formats.read_vector(args.measurements).astype(complex)
    mask = _mask_from_args(args)
    z = reconstruct_tv(y, mask, ReconConfig(args.lam, args.penalty, args.iterations))
    stem = Path(args.measurements).stem
    p = args.out / f"{stem}_tv.cfi"
    formats.write_cfi(p, z)
    q = args.out / f"{stem}_tv.ppm"
    formats.render(z, q)
    inputs = [args.measurements] + ([args.mask] if args.mask else [])
    return inputs, [p, q], None


def _calibration(args, mask: tf.SamplingMask, images, n_lambda: int = 8) -> CalibrationReport:
    scale = float(np.mean([np.linalg.norm(tf.forward(x, mask)) for x in images]))
    return calibrate(images, mask, args.noise_rel, default_grid(scale, n_lambda), iterations=args.iterations,
                     seed=args.seed, threads=args.threads)


def cmd_calibrate(args):
    if args.images:
        images = [_load_image(p) for p in args.images]
        n = images[0].shape[0]
    else:
        if args.n is None:
            raise CLIError("give --images or --n with --samples")
        n = args.n
        images = phantom_images(n, args.samples, args.seed)
    mask = _mask_from_args(args, n)
    rep = _calibration(args, mask, images, args.n_lambda)
    p = args.out / "calibration.json"
    p.write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    print(f"chosen lam={rep.chosen[0]:.6g} penalty={rep.chosen[1]:.6g} mean rel. error={min(rep.scores):.4f}")
    return list(args.images or []), [p], None


def cmd_attack(args):
    x = _load_image(args.image)
    n = x.shape[0]
    mask = _mask_from_args(args, n)
    y = tf.forward(x, mask)
    inputs = [args.image] + ([args.mask] if args.mask else [])

    if args.lam == "auto":
        if args.calibration:
            rep = CalibrationReport.from_dict(json.loads(Path(args.calibration).read_text()))
            inputs.append(args.calibration)
        elif args.calib_samples:
            rep = _calibration(args, mask, phantom_images(n, args.calib_samples, derived_seed(args.seed, 1)))
        else:
            raise CLIError("--lam auto needs --calibration FILE or --calib-samples N")
        lam, penalty = rep.chosen
    else:
        lam = float(args.lam)
        penalty = args.penalty if args.penalty is not None else 10.0 * lam

    recon = ReconConfig(lam, penalty, args.iterations)
    cfg = AttackConfig.relative(
        args.noise_rel, y, recon, steps=args.steps, step_size=args.step_size, grid_dims=tuple(args.grid),
        sigma=args.sigma, unroll_K=args.unroll, seed=args.seed, threads=args.threads,
    )
    t0 = time.perf_counter()
    res = attack_grid(y, mask, cfg)
    wall = time.perf_counter() - t0

    lines = args.lines if args.lines is not None else -1
    image_id = args.image_id or Path(args.image).stem
    tag = f"{image_id}_L{lines}_eta{args.noise_rel:g}"
    outs = []
    for name, arr in [("e", res.e), ("r", res.r), ("rho", res.rho), ("recon_clean", res.recon_clean),
                      ("recon_adv", res.recon_adv)]:
        p = args.out / f"{tag}_{name}.cfi"
        formats.write_cfi(p, arr)
        outs.append(p)
    for name, arr in [("x_plus_r", x + res.r), ("recon_adv", res.recon_adv), ("recon_clean", res.recon_clean)]:
        p = args.out / f"{tag}_{name}.ppm"
        formats.render(arr, p, args.vmax_excess)
        outs.append(p)

    centers = args.out / f"{tag}_centers.csv"
    formats.write_rows(centers, ["mu1", "mu2", "rho_inf"],
                       [{"mu1": mu[0], "mu2": mu[1], "rho_inf": s} for mu, s in res.per_center_scores])
    outs.append(centers)

    row = {
        "image_id": image_id, "lines": lines, "m": mask.m, "n": n, "noise_rel": float(args.noise_rel),
        "mu1": res.mu[0], "mu2": res.mu[1], "sigma": float(args.sigma), "e_l2": res.norms["e_l2"],
        "r_inf": res.norms["r_inf"], "rho_inf": res.norms["rho_inf"], "alpha": res.alpha,
    }
    csv_path = args.out / "attacks.csv"
    formats.append_rows(csv_path, formats.ATTACK_FIELDS, [row])
    outs.append(csv_path)
    print(f"{image_id}: mu=({res.mu[0]:.3f}, {res.mu[1]:.3f}) alpha={res.alpha:.3f} "
          f"subsampling={n * n / mask.m:.3f} |rho|_inf={res.norms['rho_inf']:.4f} |r|_inf={res.norms['r_inf']:.4f}")
    if res.stalled:
        log.warning("attack stalled (zero gradient) at some center")
    return inputs, outs, {"wall_time": wall, "lam": lam, "penalty": penalty, "stalled": res.stalled}


def _mask1d(args, rng) -> tf.Mask1D:
    if args.full:
        return tf.Mask1D.full(args.n)
    if args.freqs:
        return tf.Mask1D(args.n, [int(k) for k in args.freqs.split(",")])
    if args.m is None:
        raise CLIError("give --m, --freqs or --full")
    return tf.Mask1D.random(args.n, args.m, rng)


def cmd_spike1d(args):
    mask = _mask1d(args, np.random.default_rng(args.seed))
    sa = spike_attack(mask)
    n, m = mask.n, mask.m
    print(f"n={n} m={m} alpha={sa.alpha:.6f} n/m={n / m:.6f} "
          f"|r|_2={np.linalg.norm(sa.r):.12f} sqrt(m/n)={np.sqrt(m / n):.12f} |r|_inf={np.abs(sa.r).max():.6g}")
    p = args.out / "spike1d.csv"
    formats.write_rows(p, ["n", "m", "alpha", "subsampling", "r_l2", "r_inf"], [{
        "n": n, "m": m, "alpha": sa.alpha, "subsampling": n / m,
        "r_l2": float(np.linalg.norm(sa.r)), "r_inf": float(np.abs(sa.r).max()),
    }])
    return [], [p], None


def cmd_recover1d(args):
    freqs = None
    if args.freqs:
        freqs = tuple(int(k) for k in args.freqs.split(","))
        if args.mode == "tv" and 0 not in freqs:
            log.warning("tv mode needs frequency 0 in the mask; adding it")
            freqs = (0,) + freqs
    trial = RecoveryTrial(args.n, args.s, args.m if args.m is not None else 0, args.trials, mode=args.mode,
                          failure_tolerance=args.tol, freqs=freqs, max_iter=args.max_iter, seed=args.seed)
    rep = recovery_experiment(trial)
    m_eff = trial.m if freqs is None else len(set(freqs))
    print(f"mode={args.mode} n={args.n} s={args.s} m={m_eff} trials={args.trials} "
          f"rate={rep.rate:.3f} spiked_rate={rep.spiked_rate:.3f} mean alpha={np.mean(rep.alphas):.3f}")
    p = args.out / f"recover1d_{args.mode}.csv"
    formats.write_rows(p, ["trial", "error", "spiked_error", "alpha"], [
        {"trial": i, "error": e, "spiked_error": s, "alpha": a}
        for i, (e, s, a) in enumerate(zip(rep.errors, rep.spiked_errors, rep.alphas))
    ])
    return [], [p], {"rate": rep.rate, "spiked_rate": rep.spiked_rate}


def cmd_table(args):
    src = args.results if args.results is not None else args.out
    try:
        table = report.aggregate(report.collect_rows(src))
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    p = args.out / "table.csv"
    formats.write_rows(p, report.TABLE_FIELDS, table)
    md = report.to_markdown(table)
    q = args.out / "table.md"
    q.write_text(md)
    print(md, end="")
    return sorted(Path(src).rglob("attacks.csv")), [p, q], None


def cmd_render(args):
    img = formats.read_cfi(args.image)
    p = Path(args.output) if args.output else args.out / (Path(args.image).stem + ".ppm")
    formats.render(img, p, args.vmax_excess)
    return [args.image], [p], None


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed (default: 0)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")

    parser = argparse.ArgumentParser(prog="advmri", description="Localized adversarial attacks on TV-regularized MRI.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", parents=[common], help="generate ellipse phantoms")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--ellipses", type=int, nargs=2, default=(3, 10), metavar=("MIN", "MAX"))
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("mask", parents=[common], help="write a radial sampling mask")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--lines", type=int, default=40)
    p.set_defaults(func=cmd_mask)

    def mask_args(p, n=True):
        p.add_argument("--mask", help="mask CFI file (0/1 bitmap, FFT order)")
        p.add_argument("--lines", type=int, help="radial line count (instead of --mask)")
        if n:
            p.add_argument("--n", type=int)

    p = sub.add_parser("measure", parents=[common], help="simulate k-space measurements")
    p.add_argument("--image", required=True)
    mask_args(p, n=False)
    p.add_argument("--noise-rel", type=float, default=0.0)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("reconstruct", parents=[common], help="TV reconstruction by ADMM")
    p.add_argument("--measurements", required=True)
    mask_args(p)
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--penalty", type=float, required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("calibrate", parents=[common], help="grid-search lam and the ADMM penalty")
    mask_args(p)
    p.add_argument("--images", nargs="*")
    p.add_argument("--samples", type=int, default=10, help="generated phantoms when --images is absent")
    p.add_argument("--noise-rel", type=float, required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--n-lambda", type=int, default=8)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("attack", parents=[common], help="localized attack over a grid of centers")
    p.add_argument("--image", required=True)
    p.add_argument("--image-id")
    mask_args(p, n=False)
    p.add_argument("--noise-rel", type=float, required=True)
    p.add_argument("--grid", type=int, nargs=2, default=(8, 8), metavar=("G1", "G2"))
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--step-size", type=float, default=0.2)
    p.add_argument("--unroll", type=int, default=50)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--lam", default="auto", help="regularization weight or 'auto'")
    p.add_argument("--penalty", type=float)
    p.add_argument("--calibration", help="calibration.json for --lam auto")
    p.add_argument("--calib-samples", type=int, default=0, help="phantoms to calibrate on for --lam auto")
    p.add_argument("--vmax-excess", type=float, default=1.0)
    p.set_defaults(func=cmd_attack)

    for name, func in [("spike1d", cmd_spike1d), ("recover1d", cmd_recover1d)]:
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--m", type=int)
        p.add_argument("--freqs", help="comma-separated fixed mask frequencies")
        if name == "spike1d":
            p.add_argument("--full", action="store_true")
        else:
            p.add_argument("--mode", choices=["l1", "tv"], default="l1")
            p.add_argument("--s", type=int, required=True)
            p.add_argument("--trials", type=int, default=100)
            p.add_argument("--tol", type=float, default=1e-3)
            p.add_argument("--max-iter", type=int, default=50_000)
        p.set_defaults(func=func)

    p = sub.add_parser("table", parents=[common], help="aggregate attacks.csv files")
    p.add_argument("--results", type=Path)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("render", parents=[common], help="render a CFI image as PPM")
    p.add_argument("--image", required=True)
    p.add_argument("--output")
    p.add_argument("--vmax-excess", type=float, default=1.0)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    started = formats.now()
    try:
        inputs, outputs, extra = args.func(args)
    except CLIError as exc:
        parser.error(str(exc))
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 1
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    formats.record_run(args.out, {"subcommand": args.command, "argv": argv, "flags": flags}, args.seed,
                       inputs, outputs, started, extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
