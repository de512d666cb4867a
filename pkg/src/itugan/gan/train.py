"""Alternating GAN training with a transformation unit between G and D."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import data as dataio
from ..grad import Adam, NonFiniteError, Tensor, no_grad
from ..transforms import TransformUnit, registry_get
from . import checkpoint as ckpt_io
from .config import TrainConfig
from .losses import d_loss, g_loss
from .nets import Net, build_nets

METRICS_HEADER = ("step", "d_loss", "g_loss", "d_real_mean", "d_fake_mean")

# two fixed 2x2 patterns, neither left-right symmetric
TOY_MODES = np.array([
    [[0.8, -0.6], [0.5, -0.3]],
    [[0.4, -0.8], [0.7, -0.1]],
])
TOY_NOISE = 0.05
TOY_SIZE = 4096


def toy_two_mode(n: int, seed: int = 0, noise: float = TOY_NOISE) -> np.ndarray:
    """n 2x2 images: a fair pick of one of TOY_MODES plus Gaussian jitter, clipped to [-1, 1]."""
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, len(TOY_MODES), size=n)
    imgs = TOY_MODES[pick] + noise * rng.standard_normal((n, 2, 2))
    return np.clip(imgs, -1.0, 1.0)


def load_training_images(cfg: TrainConfig) -> np.ndarray:
    """(N, 1, H, W) images in [-1, 1] for ``cfg.data``."""
    if cfg.data == "toy":
        imgs = toy_two_mode(TOY_SIZE, cfg.subset_seed)
    else:
        if not cfg.data:
            raise ValueError("no training data given")
        ds = dataio.load_idx(cfg.data)
        if cfg.subset_n:
            ds = dataio.subset(ds, cfg.subset_n, cfg.subset_seed)
        imgs = ds.images
    if imgs.shape[0] == 0:
        raise ValueError("training set is empty")
    return imgs[:, None, :, :]


@dataclass
class StepStats:
    step: int
    d_loss: float
    g_loss: float
    d_real_mean: float
    d_fake_mean: float

    def row(self) -> list[str]:
        return [str(self.step), repr(self.d_loss), repr(self.g_loss), repr(self.d_real_mean), repr(self.d_fake_mean)]


class Trainer:
    """Holds networks, optimizers and RNG streams; one ``step()`` = d_steps D updates + one G update.

    Streams are spawned from the run seed: [0] initializes the weights (G
    first, then D), [1] draws minibatch indices, [2] draws latent vectors.
    """

    def __init__(self, config: TrainConfig, images: np.ndarray):
        self.config = config
        self.dtype = np.dtype(config.precision)
        self.images = np.ascontiguousarray(images, dtype=self.dtype)
        if self.images.ndim != 4 or self.images.shape[1] != 1:
            raise ValueError(f"images must be (N, 1, H, W), got {self.images.shape}")
        self.image_hw = self.images.shape[2:]
        self.T: TransformUnit = registry_get(config.transform)
        init, data_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(3)
        self.G, self.D = build_nets(config.arch, config.latent_dim, config.hidden, self.image_hw, np.random.default_rng(init), self.dtype)
        self.rng_data = np.random.default_rng(data_ss)
        self.rng_noise = np.random.default_rng(noise_ss)
        hp = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
        self.opt_g = Adam(self.G.parameters(), **hp)
        self.opt_d = Adam(self.D.parameters(), **hp)
        self.step_count = 0
        self.loss_cap = 2.0 * math.log(1.0 / config.clamp_eps)

    # -- one iteration ---------------------------------------------------------
    def _noise(self, n: int) -> Tensor:
        return Tensor(self.rng_noise.standard_normal((n, self.config.latent_dim)).astype(self.dtype))

    def _batch(self) -> Tensor:
        n = self.images.shape[0]
        b = self.config.batch_size
        idx = self.rng_data.choice(n, size=b, replace=b > n)
        return Tensor(self.images[idx])

    def step(self) -> StepStats:
        cfg = self.config
        for _ in range(cfg.d_steps):
            real = self._batch()
            z = self._noise(cfg.batch_size)
            self.opt_d.zero_grad()
            ld, d_real, d_fake = d_loss(self.D, self.G, self.T, real, z, cfg.clamp_eps, cfg.label_smoothing)
            ld.backward()
            self.opt_d.step()
        ld_val = float(ld.item())
        if not 0.0 < ld_val <= self.loss_cap:
            raise FloatingPointError(f"d_loss {ld_val!r} outside (0, {self.loss_cap:.4f}] at step {self.step_count + 1}")
        z = self._noise(cfg.batch_size)
        self.opt_g.zero_grad()
        lg, _ = g_loss(self.D, self.G, self.T, z, cfg.clamp_eps, minimax=cfg.loss == "minimax")
        lg.backward()
        self.opt_g.step()
        self.step_count += 1
        return StepStats(self.step_count, ld_val, float(lg.item()), float(d_real.data.mean()), float(d_fake.data.mean()))

    # -- state ------------------------------------------------------------------
    def to_checkpoint(self) -> ckpt_io.Checkpoint:
        blocks: dict[str, np.ndarray] = {}
        for tag, net, opt in (("G", self.G, self.opt_g), ("D", self.D, self.opt_d)):
            names = list(net.params)
            for k, v in net.params.items():
                blocks[f"{tag}/{k}"] = v.data.copy()
            if opt.state.m:
                for k, m, v in zip(names, opt.state.m, opt.state.v):
                    blocks[f"{tag}.adam_m/{k}"] = m.copy()
                    blocks[f"{tag}.adam_v/{k}"] = v.copy()
        meta = {
            "adam_step": {"G": self.opt_g.state.step, "D": self.opt_d.state.step},
            "rng": {"data": self.rng_data.bit_generator.state, "noise": self.rng_noise.bit_generator.state},
            "image_hw": list(self.image_hw),
        }
        return ckpt_io.Checkpoint(self.config.to_dict(), self.step_count, blocks, meta)

    def load_checkpoint(self, ck: ckpt_io.Checkpoint) -> None:
        for tag, net, opt in (("G", self.G, self.opt_g), ("D", self.D, self.opt_d)):
            net.load_state_dict({k: ck.blocks[f"{tag}/{k}"] for k in net.params})
            opt.state.step = int(ck.meta["adam_step"][tag])
            if f"{tag}.adam_m/{next(iter(net.params))}" in ck.blocks:
                opt.state.m = [ck.blocks[f"{tag}.adam_m/{k}"].astype(self.dtype) for k in net.params]
                opt.state.v = [ck.blocks[f"{tag}.adam_v/{k}"].astype(self.dtype) for k in net.params]
            else:
                opt.state.m, opt.state.v = [], []
        self.rng_data.bit_generator.state = ck.meta["rng"]["data"]
        self.rng_noise.bit_generator.state = ck.meta["rng"]["noise"]
        self.step_count = ck.step


@dataclass
class TrainResult:
    out_dir: Path
    steps_done: int
    checkpoint: Path | None
    metrics: Path
    manifest: Path | None = None
    halted: bool = False
    diagnostic: str = ""
    history: list[StepStats] = field(default_factory=list, repr=False)


def _write_samples(trainer: Trainer, out: Path, tag: str, n: int = 64) -> list[Path]:
    z = Tensor(np.random.default_rng(trainer.config.seed).standard_normal((n, trainer.config.latent_dim)).astype(trainer.dtype))
    with no_grad():
        raw = trainer.G(z)
        seen = trainer.T.apply(raw)
    cols = 8
    return [
        dataio.write_montage(np.clip(raw.data[:, 0], -1, 1), cols, out / f"samples-raw-{tag}.pgm"),
        dataio.write_montage(np.clip(seen.data[:, 0], -1, 1), cols, out / f"samples-T-{tag}.pgm"),
    ]


def train(
    config: TrainConfig,
    images: np.ndarray | None = None,
    progress: Callable[[StepStats], None] | None = None,
    write_files: bool = True,
) -> TrainResult:
    """Run ``config.steps`` iterations; on a non-finite value, stop and save the last good state."""
    if images is None:
        images = load_training_images(config)
    trainer = Trainer(config, images)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    outputs: list[Path] = [metrics_path]
    history: list[StepStats] = []
    halted, diagnostic = False, ""
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for _ in range(config.steps):
            good = trainer.to_checkpoint()
            try:
                stats = trainer.step()
            except (NonFiniteError, FloatingPointError) as exc:
                halted = True
                diagnostic = f"step {trainer.step_count + 1}: {exc}"
                trainer.load_checkpoint(good)
                if write_files:
                    outputs.append(ckpt_io.save(good, out / "last_good.itug"))
                    (out / "halt.txt").write_text(diagnostic + "\n")
                break
            history.append(stats)
            writer.writerow(stats.row())
            if progress:
                progress(stats)
            if write_files and config.checkpoint_every and stats.step % config.checkpoint_every == 0:
                outputs.append(ckpt_io.save(trainer.to_checkpoint(), out / f"ckpt-{stats.step:06d}.itug"))
            if write_files and config.sample_every and stats.step % config.sample_every == 0:
                outputs += _write_samples(trainer, out, f"{stats.step:06d}")
    final = None
    manifest = None
    if write_files:
        if not halted:
            final = ckpt_io.save(trainer.to_checkpoint(), out / "final.itug")
            outputs.append(final)
            if config.sample_every:
                outputs += _write_samples(trainer, out, "final")
        manifest = dataio.run_manifest(out / "manifest.txt", {**config.to_dict(), "config_hash": config.hash(), "steps_done": trainer.step_count, "halted": halted}, outputs)
    return TrainResult(out, trainer.step_count, final, metrics_path, manifest, halted, diagnostic, history)


# -- sampling -----------------------------------------------------------------------

def restore(path) -> Trainer:
    """Rebuild a trainer (without data) from a checkpoint file."""
    ck = ckpt_io.load(path)
    cfg = TrainConfig.from_dict(ck.config)
    hw = tuple(ck.meta["image_hw"])
    trainer = Trainer(cfg, np.zeros((1, 1) + hw))
    trainer.load_checkpoint(ck)
    return trainer


def generate(G: Net, T: TransformUnit, n: int, seed: int, latent_dim: int, dtype, apply_T: bool = False) -> np.ndarray:
    z = np.random.default_rng(seed).standard_normal((n, latent_dim)).astype(dtype)
    if n == 0:
        return np.zeros((0, 1) + tuple(getattr(G, "image_hw", (28, 28))), dtype=dtype)
    with no_grad():
        out = G(Tensor(z))
        if apply_T:
            out = T.apply(out)
    return out.data.copy()


def sample(path, n: int, seed: int, apply_T: bool = False) -> np.ndarray:
    """n images from the checkpoint's generator: raw G(z), or T(G(z)) with ``apply_T``."""
    tr = restore(path)
    return generate(tr.G, tr.T, n, seed, tr.config.latent_dim, tr.dtype, apply_T)


def sample_from_checkpoint(path, n: int, seed: int) -> np.ndarray:
    return sample(path, n, seed, apply_T=False)
