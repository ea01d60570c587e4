"""Command-line entry point.

Every run-producing subcommand writes a ``run.meta`` echo of its fully
resolved options (line-oriented ``key=value``); passing that file back via
``--config`` reproduces the run. Flags override config-file values, which
override built-in defaults. Exit codes: 0 success, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import bias as bias_mod
from . import sensing
from .denoise import (
    TrainConfig,
    cache_images,
    denoise,
    evaluate_denoiser,
    load_cached_images,
    synthesize_noisy_set,
    train_denoiser,
    write_metrics_csv,
)
from .gradcheck import grad_check
from .images import read_image, read_image_dir, write_image
from .metrics import psnr, ssim
from .models import Model, ModelConfig, count_params, forward, mixing_param_count
from .rng import substream
from .synthdata import synthetic_images
from .tensor import NumericalError, Tensor, mse_loss

ARCH_NAMES = {
    "img2img": "img2img_mixer",
    "original": "original_mixer",
    "linear": "linear_mixer",
    "multires": "multires_mixer",
    "vit": "vit_recon",
}

# Desk-scale defaults for the bias probe and benchmark (overridable by flags).
DESK_SHAPES = {
    "img2img": dict(patch=4, depth=4, embed=32, factor=2),
    "original": dict(patch=4, depth=2, embed=32, factor=2),
    "linear": dict(patch=4, depth=4, embed=32, factor=2),
    "multires": dict(patch=4, depth=4, embed=32, factor=2, levels=1),
    "vit": dict(patch=4, depth=4, embed=64, factor=2, heads=4),
}


def _add_model_flags(p: argparse.ArgumentParser, require_arch: bool = True) -> None:
    p.add_argument("--arch", choices=sorted(ARCH_NAMES), required=require_arch)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--patch", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--embed", type=int, default=None)
    p.add_argument("--factor", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)


def _model_config(args: argparse.Namespace) -> ModelConfig:
    shape = dict(DESK_SHAPES[args.arch])
    for key in ("patch", "depth", "embed", "factor", "heads", "levels"):
        value = getattr(args, key, None)
        if value is not None:
            shape[key] = value
    return ModelConfig(
        family=ARCH_NAMES[args.arch],
        height=args.height,
        width=args.width,
        channels=args.channels,
        **shape,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--eval-interval", type=int, default=100)
    p.add_argument("--holdout", type=int, default=0, help="images held out for eval metrics")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", type=str, default=None, help="directory of 8-bit PNG/PGM images")
    p.add_argument(
        "--synthetic", type=int, default=None, help="generate N synthetic images instead"
    )
    p.add_argument(
        "--cache", type=str, default=None, help="binary tensor file the dataset is cached in"
    )


def _load_images(args: argparse.Namespace) -> np.ndarray:
    cache = getattr(args, "cache", None)
    if cache and Path(cache).exists():
        return load_cached_images(cache)
    if (args.data_dir is None) == (args.synthetic is None):
        raise ValueError("provide exactly one of --data-dir or --synthetic N")
    if args.data_dir is not None:
        images = read_image_dir(args.data_dir)
    else:
        images = synthetic_images(
            args.synthetic, args.height, args.width, channels=args.channels, seed=args.seed
        )
    if cache:
        cache_images(cache, images)
    return images


def _meta_items(args: argparse.Namespace) -> dict[str, str]:
    skip = {"func", "config"}
    items = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        if isinstance(value, bool):
            items[key] = "true" if value else "false"
        else:
            items[key] = "" if value is None else str(value)
    return items


def write_run_meta(path: Path, args: argparse.Namespace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{k}={v}" for k, v in _meta_items(args).items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# -- subcommands ----------------------------------------------------------------


def cmd_count_params(args: argparse.Namespace) -> int:
    cfg = _model_config(args)
    cfg.validate(require_blocks=False)
    total = count_params(cfg)
    print(f"family={cfg.family}")
    print(f"total_params={total}")
    try:
        print(f"spatial_mixing_params={mixing_param_count(cfg)}")
    except ValueError:
        pass
    return 0


TINY_GRADCHECK = dict(height=16, width=16, channels=1, patch=4, depth=2, embed=8, factor=2)


def cmd_grad_check(args: argparse.Namespace) -> int:
    shape = dict(TINY_GRADCHECK)
    for key in ("height", "width", "channels", "patch", "depth", "embed", "factor"):
        value = getattr(args, key, None)
        if value is not None:
            shape[key] = value
    extra = {}
    if args.heads is not None:
        extra["heads"] = args.heads
    if args.levels is not None:
        extra["levels"] = args.levels
    cfg = ModelConfig(family=ARCH_NAMES[args.arch], **shape, **extra)
    cfg.validate()
    rng = np.random.default_rng(args.seed)
    x = rng.uniform(0.0, 1.0, (1, cfg.height, cfg.width, cfg.channels))
    target = rng.uniform(0.0, 1.0, (1, cfg.height, cfg.width, cfg.channels))

    worst = 0.0
    for seed in range(args.seeds):
        model = Model.build(cfg, seed=seed)

        def program(params):
            return mse_loss(forward(Tensor(x), params, cfg), Tensor(target))

        err = grad_check(program, model.params, coords_per_tensor=args.coords, seed=seed)
        worst = max(worst, err)
        print(f"seed {seed}: max rel error {err:.3e}")
    print(f"worst over {args.seeds} seeds: {worst:.3e} (tol {args.tol:g})")
    if worst > args.tol:
        raise NumericalError(f"grad check failed: {worst:.3e} > {args.tol:g}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_meta(out_dir / "run.meta", args)

    images = _load_images(args)
    if images.shape[1] != args.height or images.shape[2] != args.width:
        args.height, args.width = images.shape[1], images.shape[2]
    if images.shape[3] != args.channels:
        args.channels = images.shape[3]
    cfg = _model_config(args)
    cfg.validate()

    pairs = synthesize_noisy_set(images, args.sigma / 255.0, args.seed)
    holdout = min(args.holdout, len(pairs) - 1)
    train_pairs = pairs[: len(pairs) - holdout] if holdout else pairs
    eval_pairs = pairs[len(pairs) - holdout :] if holdout else None

    model = Model.build(cfg, seed=args.seed, dtype=np.float64)
    tc = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
        precision=args.precision,
        eval_interval=args.eval_interval,
    )
    result = train_denoiser(model, train_pairs, tc, eval_pairs=eval_pairs)
    model.save(out_dir)
    write_metrics_csv(out_dir / "metrics.csv", result.records)
    last = result.records[-1]
    print(
        f"trained {cfg.family}: {last.iteration} iterations, "
        f"final train loss {last.train_loss:.6g}"
    )
    if eval_pairs:
        print(f"held-out: psnr {last.eval_psnr_db:.2f} dB, ssim {last.eval_ssim:.4f}")
    return 0


def cmd_denoise(args: argparse.Namespace) -> int:
    model = Model.load(args.checkpoint)
    noisy = read_image(args.input)
    restored = denoise(model, noisy)
    write_image(args.output, np.clip(restored, 0.0, 1.0))
    write_run_meta(Path(args.output + ".meta"), args)
    print(f"wrote {args.output}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = Model.load(args.checkpoint)
    cfg = model.config
    args.height, args.width, args.channels = cfg.height, cfg.width, cfg.channels
    images = _load_images(args)
    pairs = synthesize_noisy_set(images, args.sigma / 255.0, args.seed)
    rows = []
    for i, pair in enumerate(pairs):
        restored = denoise(model, pair.noisy)
        rows.append((i, psnr(restored, pair.clean), ssim(restored, pair.clean)))
    with open(args.csv, "w", encoding="utf-8") as fh:
        fh.write("index,psnr_db,ssim\n")
        for i, p, s in rows:
            fh.write(f"{i},{p!r},{s!r}\n")
    write_run_meta(Path(args.csv + ".meta"), args)
    mean_psnr, mean_ssim = evaluate_denoiser(model, pairs)
    print(f"eval over {len(pairs)} images: psnr {mean_psnr:.2f} dB, ssim {mean_ssim:.4f}")
    return 0


def cmd_bias(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_meta(out_dir / "run.meta", args)

    if args.image:
        clean = read_image(args.image)
        args.height, args.width, args.channels = clean.shape
    else:
        clean = bias_mod.default_bias_image(
            args.height, args.width, channels=args.channels, seed=args.seed
        )
    cfg = _model_config(args)
    cfg.validate()
    sigma = args.sigma / 255.0
    noise = substream(args.seed, "noise").normal(0.0, sigma, size=clean.shape)

    lr = args.lr
    if lr is None:
        lr = bias_mod.sweep_lr(cfg, clean, noise, input_seed=args.seed, init_seed=args.seed)
        print(f"step-size sweep picked lr={lr:g}")
    results = []
    for target in bias_mod.TARGETS:
        spec = bias_mod.BiasRunSpec(
            config=cfg,
            target=target,
            clean=clean,
            noise=noise,
            lr=lr,
            iterations=args.iters,
            input_seed=args.seed,
            init_seed=args.seed,
        )
        result = bias_mod.run_bias_fit(spec)
        results.append(result)
        bias_mod.write_curve_dat(out_dir / f"{args.arch}_{target}.dat", result)
        best_iter, best_psnr = bias_mod.best_iteration_psnr(result.curve)
        print(f"{args.arch} {target}: best iter {best_iter}, best psnr {best_psnr:.2f} dB (lr {lr:g})")
    bias_mod.write_summary_csv(out_dir / "summary.csv", results, args.arch)
    return 0


def cmd_cs_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_meta(out_dir / "run.meta", args)

    args.channels = 1
    images = _load_images(args)
    op = sensing.build_operator(
        args.height, args.width, args.accel, seed=args.seed, kind=args.transform
    )
    sensing.save_operator(out_dir / "operator.op", op)
    pairs = sensing.make_cs_pairs(images, op)
    holdout = min(args.holdout, len(pairs) - 1)
    train_pairs = pairs[: len(pairs) - holdout] if holdout else pairs
    eval_pairs = pairs[len(pairs) - holdout :] if holdout else None

    cfg = _model_config(args)
    cfg.validate()
    model = Model.build(cfg, seed=args.seed, dtype=np.float64)
    tc = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
        precision=args.precision,
        loss="one_minus_ssim",
        eval_interval=args.eval_interval,
    )
    result = sensing.train_cs_refiner(model, train_pairs, tc, eval_pairs=eval_pairs)
    model.save(out_dir)
    write_metrics_csv(out_dir / "metrics.csv", result.records)
    print(f"trained cs refiner, final loss {result.records[-1].train_loss:.6g}")
    if eval_pairs:
        coarse = sensing.coarse_ssim(eval_pairs)
        print(
            f"held-out ssim: coarse {coarse:.4f} -> refined {result.records[-1].eval_ssim:.4f}"
        )
    return 0


def cmd_cs_eval(args: argparse.Namespace) -> int:
    model = Model.load(args.checkpoint)
    op = sensing.load_operator(args.operator)
    args.height, args.width, args.channels = op.height, op.width, 1
    images = _load_images(args)
    pairs = sensing.make_cs_pairs(images, op)
    rows = []
    for i, pair in enumerate(pairs):
        refined_psnr, refined_ssim = sensing.evaluate_refiner(model, [pair])
        rows.append((i, ssim(pair.coarse, pair.clean), refined_ssim, refined_psnr))
    with open(args.csv, "w", encoding="utf-8") as fh:
        fh.write("index,coarse_ssim,refined_ssim,refined_psnr_db\n")
        for i, cs, rs, rp in rows:
            fh.write(f"{i},{cs!r},{rs!r},{rp!r}\n")
    write_run_meta(Path(args.csv + ".meta"), args)
    mean_coarse = float(np.mean([r[1] for r in rows]))
    mean_refined = float(np.mean([r[2] for r in rows]))
    print(f"ssim over {len(rows)} images: coarse {mean_coarse:.4f} -> refined {mean_refined:.4f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    arch_list = [a.strip() for a in args.archs.split(",") if a.strip()]
    unknown = [a for a in arch_list if a not in ARCH_NAMES]
    if unknown:
        raise ValueError(f"unknown arch(es) {unknown}; valid: {sorted(ARCH_NAMES)}")
    batches = [int(b) for b in args.batches.split(",")]
    configs = {}
    for arch in arch_list:
        shape = dict(DESK_SHAPES[arch])
        configs[arch] = ModelConfig(
            family=ARCH_NAMES[arch],
            height=args.height,
            width=args.width,
            channels=args.channels,
            **shape,
        )
        configs[arch].validate()
    rows = bench_mod.bench_throughput(configs, batches, repeats=args.repeats, seed=args.seed)
    print(bench_mod.format_table(rows))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_run_meta(out_dir / "run.meta", args)
        with open(out_dir / "bench.csv", "w", encoding="utf-8") as fh:
            fh.write("arch,batch,images_per_sec,cv\n")
            for row in rows:
                fh.write(f"{row.arch},{row.batch},{row.images_per_sec!r},{row.cv!r}\n")
    return 0


# -- parser construction -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imgmixer",
        description="Image reconstruction with image-to-image MLP-mixers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def new_cmd(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="key=value defaults file")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = new_cmd("count-params", cmd_count_params, "closed-form trainable parameter count")
    _add_model_flags(p)
    # Counting defaults mirror the color setup the reference sizes use.
    p.set_defaults(channels=3, height=256, width=256)

    p = new_cmd("grad-check", cmd_grad_check, "finite-difference gradient validation")
    _add_model_flags(p)
    p.set_defaults(height=None, width=None, channels=None, patch=None, depth=None, embed=None, factor=None)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--coords", type=int, default=64)

    p = new_cmd("train", cmd_train, "train a denoiser on noisy/clean pairs")
    _add_model_flags(p)
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--sigma", type=float, default=30.0, help="noise std on the 8-bit scale")
    p.add_argument("--out-dir", type=str, required=True)

    p = new_cmd("denoise", cmd_denoise, "run residual inference on one image")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--output", type=str, required=True)

    p = new_cmd("eval", cmd_eval, "evaluate a checkpoint on a dataset")
    _add_data_flags(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--sigma", type=float, default=30.0, help="noise std on the 8-bit scale")
    p.add_argument("--csv", type=str, required=True)

    p = new_cmd("bias", cmd_bias, "untrained inductive-bias fitting experiment")
    _add_model_flags(p)
    p.add_argument("--image", type=str, default=None, help="clean image (default: synthetic)")
    p.add_argument("--sigma", type=float, default=60.4, help="noise std on the 8-bit scale")
    p.add_argument("--iters", type=int, default=bias_mod.DEFAULT_ITERATIONS)
    p.add_argument("--lr", type=float, default=None, help="step size (default: 3-point sweep)")
    p.add_argument("--out-dir", type=str, required=True)

    p = new_cmd("cs-train", cmd_cs_train, "train a compressive-sensing refiner")
    _add_model_flags(p)
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--accel", type=float, default=4.0)
    p.add_argument("--transform", choices=sensing.TRANSFORMS, default="hadamard")
    p.add_argument("--out-dir", type=str, required=True)

    p = new_cmd("cs-eval", cmd_cs_eval, "evaluate a cs refiner against coarse recon")
    _add_data_flags(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--operator", type=str, required=True)
    p.add_argument("--csv", type=str, required=True)

    p = new_cmd("bench", cmd_bench, "forward-pass throughput benchmark")
    p.add_argument("--archs", type=str, default=",".join(sorted(ARCH_NAMES)))
    p.add_argument("--batches", type=str, default="1,4,16")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--out-dir", type=str, default=None)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Resolve --config into per-flag defaults so explicit flags still win."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        parser.error("--config needs a file path")
    values = _load_config_file(argv[at + 1])
    command = values.pop("command", None)
    if not argv or argv[0].startswith("-"):
        if command is None:
            parser.error("config file has no command= line and none was given")
        argv = [command] + argv
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices.get(argv[0])
    if subparser is None:
        return argv
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest not in known:
            parser.error(f"config file key '{key}' is not a flag of '{argv[0]}'")
        action = known[dest]
        if raw == "":
            defaults[dest] = None
        elif isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[dest] = raw.lower() in ("1", "true", "yes")
        elif action.type is not None:
            defaults[dest] = action.type(raw)
        else:
            defaults[dest] = raw
    subparser.set_defaults(**defaults)
    for action in subparser._actions:
        if action.dest in defaults:
            action.required = False
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
