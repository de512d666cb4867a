"""Command-line entry point: train, sample, survey, blur, sharpness, verify-theory.

Exit codes: 0 success, 1 run or check failure, 2 usage or configuration error.
ITUGAN_THREADS caps BLAS/OpenMP threads (speed only).
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or configuration detected before any work starts."""


# -- helpers ---------------------------------------------------------------------------

def _echo(command: str, resolved: dict, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"# itugan {command}", file=stream)
    for k in sorted(resolved):
        print(f"#   {k} = {resolved[k]}", file=stream)
    stream.flush()


def _train_flags(p: argparse.ArgumentParser, data_required_note: str = "") -> None:
    g = p.add_argument_group("training")
    g.add_argument("--data", help="IDX image file (gzip ok), or 'toy' for the 2x2 two-mode problem" + data_required_note)
    g.add_argument("--subset-n", type=int, help="train on a seeded random subset of this many images (0 = all)")
    g.add_argument("--subset-seed", type=int, help="seed for the subset draw")
    g.add_argument("--seed", type=int, help="run seed (weights, minibatches, latent draws)")
    g.add_argument("--steps", type=int, help="training iterations")
    g.add_argument("--batch-size", type=int, help="minibatch size (default 64)")
    g.add_argument("--d-steps", type=int, help="discriminator updates per generator update (default 1)")
    g.add_argument("--arch", choices=("dcgan", "mlp"), help="network shape (dcgan for 28x28, mlp for tiny images)")
    g.add_argument("--latent-dim", type=int, help="latent vector size (default 64)")
    g.add_argument("--hidden", type=int, help="mlp hidden width")
    g.add_argument("--lr", type=float, help="Adam learning rate (default 2e-4)")
    g.add_argument("--beta1", type=float, help="Adam beta1 (default 0.5)")
    g.add_argument("--beta2", type=float, help="Adam beta2 (default 0.999)")
    g.add_argument("--adam-eps", type=float, help="Adam epsilon (default 1e-8)")
    g.add_argument("--loss", choices=("nonsaturating", "minimax"), help="generator loss form")
    g.add_argument("--label-smoothing", type=float, help="real-label smoothing s (targets 1 - s; default 0)")
    g.add_argument("--clamp-eps", type=float, help="clamp D outputs to [eps, 1 - eps] before logs (default 1e-7)")
    g.add_argument("--precision", choices=("float64", "float32"), help="floating-point width")
    g.add_argument("--checkpoint-every", type=int, help="save a checkpoint every N steps (0 = final only)")
    g.add_argument("--sample-every", type=int, help="write raw and transformed sample montages every N steps")
    g.add_argument("--config", help="INI file of key = value defaults; flags override it")


_TRAIN_KEYS = (
    "data", "subset_n", "subset_seed", "seed", "steps", "batch_size", "d_steps", "arch", "latent_dim", "hidden",
    "lr", "beta1", "beta2", "adam_eps", "loss", "label_smoothing", "clamp_eps", "precision", "checkpoint_every",
    "sample_every", "transform", "out",
)


def _resolve_config(args, **forced):
    from .gan.config import TrainConfig, read_ini

    base = TrainConfig()
    try:
        if getattr(args, "config", None):
            base = base.overlay(read_ini(args.config))
        flags = {k: getattr(args, k, None) for k in _TRAIN_KEYS}
        flags.update({k: v for k, v in forced.items() if v is not None})
        return base.overlay(flags)
    except (KeyError, ValueError, OSError) as exc:
        raise UsageError(_msg(exc)) from None


def _msg(exc: Exception) -> str:
    if isinstance(exc, KeyError) and exc.args:
        return str(exc.args[0])
    return str(exc)


# -- subcommands ----------------------------------------------------------------------

def cmd_train(args) -> int:
    from .gan.train import train
    from .transforms import registry_get

    cfg = _resolve_config(args)
    if not cfg.data:
        raise UsageError("--data is required (or set data in --config)")
    try:
        registry_get(cfg.transform)
    except (KeyError, ValueError) as exc:
        raise UsageError(_msg(exc)) from None
    if cfg.data == "toy" and cfg.arch == "dcgan":
        cfg = cfg.overlay({"arch": "mlp"})
    _echo("train", cfg.to_dict())
    res = train(cfg, progress=_progress(args.log_every))
    if res.halted:
        print(f"halted: {res.diagnostic}; last good state in {res.out_dir / 'last_good.itug'}", file=sys.stderr)
        return EXIT_FAIL
    print(f"done: {res.steps_done} steps, checkpoint {res.checkpoint}")
    return EXIT_OK


def _progress(every):
    if not every:
        return None

    def report(s):
        if s.step % every == 0:
            print(f"step {s.step}: d_loss {s.d_loss:.4f} g_loss {s.g_loss:.4f} D(x) {s.d_real_mean:.3f} D(T(G(z))) {s.d_fake_mean:.3f}", flush=True)

    return report


def cmd_sample(args) -> int:
    from .data import write_idx, write_montage
    from .gan.train import sample

    _echo("sample", {k: v for k, v in vars(args).items() if k not in ("func", "command")})
    imgs = sample(args.checkpoint, args.n, args.seed, apply_T=args.apply_t)
    out = Path(args.out)
    if args.n:
        write_montage(np.clip(imgs[:, 0], -1, 1), args.cols, out)
        print(f"wrote {out}")
    if args.idx_out:
        from .data import unit_to_bytes

        write_idx(args.idx_out, unit_to_bytes(np.clip(imgs[:, 0], -1, 1)))
        print(f"wrote {args.idx_out}")
    return EXIT_OK


def cmd_survey(args) -> int:
    from .gan.train import train
    from .transforms import SURVEY_NAMES, TABLE1

    names = list(SURVEY_NAMES)
    if args.only:
        wanted = [n for part in args.only for n in part.split(",") if n]
        bad = [n for n in wanted if n not in TABLE1]
        if bad:
            raise UsageError(f"--only: unknown transforms {bad}; survey names are {list(SURVEY_NAMES)}")
        names = [n for n in names if n in wanted]
    base = _resolve_config(args, out=None, transform=None)
    if not base.data:
        raise UsageError("--data is required (or set data in --config)")
    out = Path(args.out)
    _echo("survey", base.to_dict() | {"transforms": ",".join(names), "survey_out": str(out)})
    rows = []
    for name in names:
        cfg = base.overlay({"transform": name, "out": str(out / name)})
        row = TABLE1[name]
        flags = [row.formula, _yn(row.injective), _yn(row.surjective), row.differentiable, row.continuity, _yn(row.effect)]
        try:
            res = train(cfg)
            last = res.history[-1] if res.history else None
            status = "halted" if res.halted else "completed"
            rows.append([name, *flags, status, res.steps_done, repr(last.d_loss) if last else "", repr(last.g_loss) if last else "", res.diagnostic])
        except Exception as exc:  # per-T failures are recorded, the survey goes on
            rows.append([name, *flags, "error", 0, "", "", f"{type(exc).__name__}: {exc}"])
        print(f"{name}: {rows[-1][7]} after {rows[-1][8]} steps", flush=True)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "survey.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["transform", "formula", "injective", "surjective", "differentiable", "continuity", "effect",
                    "status", "steps_done", "final_d_loss", "final_g_loss", "diagnostic"])
        w.writerows(rows)
    print(f"wrote {summary}")
    failed_good = [r[0] for r in rows if r[6] == "Yes" and r[7] != "completed"]
    if failed_good:
        print(f"transforms with a listed good effect did not complete: {failed_good}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _yn(flag: bool) -> str:
    return "Yes" if flag else "No"


def cmd_blur(args) -> int:
    from .data import ImageDataset, load_idx, write_idx, write_montage
    from .transforms import blur_array, load_kernel

    try:
        kernel = load_kernel(args.kernel)
    except (KeyError, ValueError, OSError) as exc:
        raise UsageError(_msg(exc)) from None
    _echo("blur", {"data": args.data, "kernel": kernel.id, "weights": " ".join(repr(float(v)) for v in kernel.weights.ravel()), "out": args.out})
    ds = load_idx(args.data)
    blurred = np.clip(blur_array(ds.images, kernel), -1.0, 1.0)
    out = Path(args.out)
    idx_path = write_idx(out / "blurred-images-idx3-ubyte", ImageDataset(blurred))
    n = min(args.montage_n, ds.count)
    if n:
        write_montage(ds.images[:n], args.cols, out / "before.pgm")
        write_montage(blurred[:n], args.cols, out / "after.pgm")
    print(f"wrote {idx_path}")
    return EXIT_OK


def cmd_sharpness(args) -> int:
    from .data import load_idx
    from .metrics import MODEL_GROUPS, six_group_report, write_boxplot_dat, write_samples_csv, write_summary_csv

    checkpoints = {}
    for item in args.groups or []:
        group, sep, path = item.partition("=")
        if not sep or group not in MODEL_GROUPS:
            raise UsageError(f"--groups expects NAME=CHECKPOINT with NAME in {sorted(MODEL_GROUPS)}, got {item!r}")
        checkpoints[group] = path
    _echo("sharpness", {"data": args.data, "n": args.n, "seed": args.seed, "out": args.out, **{f"group.{k}": v for k, v in checkpoints.items()}})
    images = load_idx(args.data).images if args.data else np.zeros((0, 28, 28))
    reports, notices = six_group_report(images, checkpoints, args.n, args.seed)
    for note in notices:
        print(note)
    out = Path(args.out)
    write_samples_csv(reports, out / "chi_s.csv")
    write_summary_csv(reports, out / "summary.csv")
    write_boxplot_dat(reports, out / "boxplot.dat")
    for r in reports:
        print(f"{r.group}: n={r.count} min/q1/median/q3/max = " + " ".join(f"{v:.6f}" for v in r.summary))
    return EXIT_OK


def cmd_verify_theory(args) -> int:
    from .theory import checks_passed, run_theory_checks

    _echo("verify-theory", {"grid_m": args.grid_m, "probes": args.probes, "seed": args.seed, "report": args.report})
    if args.grid_m < 16:
        raise UsageError("--grid-m must be at least 16")
    results = run_theory_checks(m=args.grid_m, probes=args.probes, seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = ("PASS" if r.passed else "FAIL") if r.required else "INFO"
        print(f"{status}  {r.name:<{width}}  value={r.value:.6g}  tol={r.tolerance:.3g}  {r.detail}")
    if args.report:
        path = Path(args.report)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "value", "tolerance", "status", "detail"])
            for r in results:
                w.writerow([r.name, repr(r.value), repr(r.tolerance), ("pass" if r.passed else "fail") if r.required else "info", r.detail])
    ok = checks_passed(results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itugan", description="GANs with an inverse transformation unit: training, surveys, sharpness and theory checks.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    t = sub.add_parser("train", help="train one model", description="Train G and D with a transformation unit between them.")
    _train_flags(t, " (required)")
    t.add_argument("--transform", help="registry name: identity, T1, T21 ... T52, blur:<kernel id or file> (default identity)")
    t.add_argument("--out", help="output directory (default runs/default)")
    t.add_argument("--log-every", type=int, default=100, help="print losses every N steps (0 = quiet)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="draw images from a checkpoint", description="Draw generator samples from a checkpoint.")
    s.add_argument("--checkpoint", required=True, help="checkpoint file written by train")
    s.add_argument("--n", type=int, default=64, help="number of images")
    s.add_argument("--seed", type=int, default=0, help="latent draw seed")
    s.add_argument("--apply-t", action="store_true", help="return T(G(z)) instead of the raw G(z)")
    s.add_argument("--cols", type=int, default=8, help="montage columns")
    s.add_argument("--out", default="samples.pgm", help="PGM montage path")
    s.add_argument("--idx-out", help="also write the samples as an IDX file")
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("survey", help="train every survey transform with one budget", description="Train all nine survey transforms with identical budget and seed.")
    _train_flags(v, " (required)")
    v.add_argument("--only", action="append", help="restrict to these transforms (repeatable or comma-separated)")
    v.add_argument("--out", default="runs/survey", help="output directory")
    v.set_defaults(func=cmd_survey)

    b = sub.add_parser("blur", help="blur a dataset with a 3x3 kernel", description="Replicate-extend and convolve every image with a 3x3 kernel.")
    b.add_argument("--data", required=True, help="IDX image file")
    b.add_argument("--kernel", default="K_blur", help="kernel id (K_sharpen, K_blur, K_rec1, K_rec2, K_rec3) or a file of 9 numbers")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--montage-n", type=int, default=64, help="images in the before/after montages")
    b.add_argument("--cols", type=int, default=8, help="montage columns")
    b.set_defaults(func=cmd_blur)

    h = sub.add_parser("sharpness", help="sharpness statistics for the six image groups", description="Sharpness summaries for originals, blurred originals and model samples.")
    h.add_argument("--data", help="IDX file of original images")
    h.add_argument("--groups", action="append", help="NAME=CHECKPOINT for a model group (sharpen-model, rec1-model, rec2-model, rec3-model); repeatable")
    h.add_argument("--n", type=int, default=108, help="samples per group")
    h.add_argument("--seed", type=int, default=0, help="sampling seed")
    h.add_argument("--out", default="runs/sharpness", help="output directory for the CSV and boxplot files")
    h.set_defaults(func=cmd_sharpness)

    r = sub.add_parser("verify-theory", help="run the optimal-discriminator checks", description="1-D numerical checks of the optimal discriminator results.")
    r.add_argument("--grid-m", type=int, default=256, help="grid points on [-1, 1]; tolerances scale by (256/m)^2 below 256")
    r.add_argument("--probes", type=int, default=1000, help="random perturbations per maximality check")
    r.add_argument("--seed", type=int, default=0, help="probe seed")
    r.add_argument("--report", help="write a CSV of all checks here")
    r.set_defaults(func=cmd_verify_theory)
    return p


def _thread_limit():
    raw = os.environ.get("ITUGAN_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ITUGAN_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("ITUGAN_THREADS must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as exc:
        print(f"itugan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"itugan {args.command}: failed: {_msg(exc)}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
