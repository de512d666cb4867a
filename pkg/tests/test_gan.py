import hashlib
import math
import struct
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itugan.data import load_idx, subset
from itugan.gan import (
    Checkpoint,
    CheckpointError,
    MLPDiscriminator,
    MLPGenerator,
    TrainConfig,
    Trainer,
    d_loss,
    g_loss,
    read_ini,
    restore,
    sample,
    toy_two_mode,
    train,
)
from itugan.gan import checkpoint as ckpt_io
from itugan.grad import Tensor
from itugan.transforms import registry_get

from vanilla import vanilla_losses

train_mod = sys.modules["itugan.gan.train"]  # the package re-exports a function of the same name

DATA = Path(__file__).parent / "data"
FIXTURE64 = DATA / "digits64-idx3-ubyte"


def toy_cfg(tmp_path, **kw):
    base = dict(data="toy", arch="mlp", latent_dim=4, hidden=8, batch_size=16, steps=5, out=str(tmp_path / "run"))
    base.update(kw)
    return TrainConfig(**base)


def zero_D(hw=(2, 2)):
    D = MLPDiscriminator(4, hw, np.random.default_rng(0))
    for p in D.parameters():
        p.data[...] = 0.0
    return D


# -- config ---------------------------------------------------------------------------

def test_config_defaults_match_documented_hyperparameters():
    c = TrainConfig()
    assert (c.lr, c.beta1, c.beta2, c.adam_eps, c.batch_size) == (2e-4, 0.5, 0.999, 1e-8, 64)
    assert c.loss == "nonsaturating" and c.d_steps == 1 and c.precision == "float64"


@pytest.mark.parametrize("kw", [dict(loss="wgan"), dict(precision="float16"), dict(arch="resnet"),
                                dict(batch_size=0), dict(steps=-1), dict(label_smoothing=0.6)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_config_from_dict_coerces_and_rejects_unknown():
    c = TrainConfig.from_dict({"steps": "7", "lr": "1e-3", "seed": 2.0})
    assert (c.steps, c.lr, c.seed) == (7, 1e-3, 2)
    with pytest.raises(KeyError, match="unknown config keys"):
        TrainConfig.from_dict({"stepz": 1})
    with pytest.raises(ValueError, match="steps"):
        TrainConfig.from_dict({"steps": "many"})


def test_overlay_ignores_none_and_accepts_dashes():
    c = TrainConfig().overlay({"batch-size": 8, "seed": None})
    assert c.batch_size == 8 and c.seed == 0


def test_hash_stable_and_sensitive():
    assert TrainConfig().hash() == TrainConfig().hash()
    assert TrainConfig(seed=1).hash() != TrainConfig().hash()


def test_read_ini_with_and_without_section(tmp_path):
    a = tmp_path / "a.ini"
    a.write_text("# comment\nsteps = 12\nbatch-size = 4\n")
    b = tmp_path / "b.ini"
    b.write_text("[train]\nsteps = 12\n")
    assert read_ini(a) == {"steps": "12", "batch_size": "4"}
    assert read_ini(b) == {"steps": "12"}
    assert TrainConfig().overlay(read_ini(a)).steps == 12


# -- losses ---------------------------------------------------------------------------

def test_losses_at_half_discriminator():
    D = zero_D()
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    T = registry_get("identity")
    real = Tensor(toy_two_mode(8)[:, None])
    z = Tensor(np.random.default_rng(2).standard_normal((8, 3)))
    ld, d_real, d_fake = d_loss(D, G, T, real, z)
    assert np.all(d_real.data == 0.5) and np.all(d_fake.data == 0.5)
    assert ld.item() == pytest.approx(math.log(4), abs=1e-15)
    lg, _ = g_loss(D, G, T, z)
    assert lg.item() == pytest.approx(math.log(2), abs=1e-15)
    lm, _ = g_loss(D, G, T, z, minimax=True)
    assert lm.item() == pytest.approx(-math.log(2), abs=1e-15)


def test_label_smoothing_at_half_is_unchanged():
    D = zero_D()
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    real = Tensor(toy_two_mode(8)[:, None])
    z = Tensor(np.random.default_rng(2).standard_normal((8, 3)))
    ld, _, _ = d_loss(D, G, registry_get("identity"), real, z, label_smoothing=0.1)
    assert ld.item() == pytest.approx(math.log(4), abs=1e-15)


def test_d_loss_does_not_touch_generator():
    D = MLPDiscriminator(4, (2, 2), np.random.default_rng(0))
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    z = Tensor(np.random.default_rng(2).standard_normal((8, 3)))
    ld, _, _ = d_loss(D, G, registry_get("T23"), Tensor(toy_two_mode(8)[:, None]), z)
    ld.backward()
    assert all(p.grad is None or not p.grad.any() for p in G.parameters())
    assert any(p.grad is not None and p.grad.any() for p in D.parameters())


@pytest.mark.parametrize("name", ["T1", "T21", "T22", "T23", "T31", "T32", "T4", "T51", "T52"])
def test_generator_gradient_flows_through_every_unit(name):
    D = MLPDiscriminator(4, (2, 2), np.random.default_rng(0))
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    z = Tensor(np.random.default_rng(2).standard_normal((8, 3)))
    lg, _ = g_loss(D, G, registry_get(name), z)
    lg.backward()
    grads = [p.grad for p in G.parameters()]
    assert all(g is not None and np.isfinite(g).all() for g in grads)
    assert any(g.any() for g in grads)


@pytest.mark.parametrize("name", ["T51", "T52"])
def test_gradient_finite_when_generator_outputs_exact_zero(name):
    D = MLPDiscriminator(4, (2, 2), np.random.default_rng(0))
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    G.params["l3.w"].data[...] = 0.0
    G.params["l3.b"].data[...] = 0.0
    z = Tensor(np.random.default_rng(2).standard_normal((8, 3)))
    assert not G(z).data.any()
    lg, _ = g_loss(D, G, registry_get(name), z)
    lg.backward()
    assert all(np.isfinite(p.grad).all() for p in G.parameters())


def test_nan_discriminator_output_is_reported():
    from itugan.grad import NonFiniteError

    D = zero_D()
    D.params["l3.b"].data[...] = np.nan
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    with pytest.raises(NonFiniteError, match="non-finite|NaN"):
        g_loss(D, G, registry_get("identity"), Tensor(np.zeros((2, 3))))


# -- networks -------------------------------------------------------------------------

def test_dcgan_shapes_and_ranges():
    from itugan.gan import build_nets

    G, D = build_nets("dcgan", 16, 0, (28, 28), np.random.default_rng(0))
    x = G(Tensor(np.random.default_rng(1).standard_normal((3, 16))))
    assert x.shape == (3, 1, 28, 28) and np.abs(x.data).max() < 1
    y = D(x)
    assert y.shape == (3, 1) and ((y.data > 0) & (y.data < 1)).all()
    with pytest.raises(ValueError, match="28x28"):
        build_nets("dcgan", 16, 0, (2, 2), np.random.default_rng(0))


def test_load_state_dict_checks_names_and_shapes():
    G = MLPGenerator(3, 4, (2, 2), np.random.default_rng(1))
    state = G.state_dict()
    with pytest.raises(KeyError):
        G.load_state_dict({k: v for k, v in state.items() if k != "l1.w"})
    state["l1.w"] = np.zeros((2, 2))
    with pytest.raises(ValueError, match="shape"):
        G.load_state_dict(state)


# -- training -------------------------------------------------------------------------

def test_identity_matches_hand_coded_vanilla_gan(tmp_path):
    imgs = load_idx(FIXTURE64).images[:, None]
    ref, ref_params = vanilla_losses(imgs, 10, seed=3, latent_dim=8, hidden=16, batch=16)
    cfg = TrainConfig(data=str(FIXTURE64), arch="mlp", latent_dim=8, hidden=16, batch_size=16, steps=10, seed=3, out=str(tmp_path))
    res = train(cfg, write_files=False)
    assert [(s.d_loss, s.g_loss) for s in res.history] == ref
    final = restore_params(cfg, imgs)
    assert all(np.array_equal(final[k], ref_params[k]) for k in ref_params)


def restore_params(cfg, imgs):
    tr = Trainer(cfg, imgs)
    for _ in range(cfg.steps):
        tr.step()
    return tr.G.state_dict()


def test_zero_steps_keeps_initial_weights(tmp_path):
    cfg = toy_cfg(tmp_path, steps=0)
    res = train(cfg)
    fresh = Trainer(cfg, toy_two_mode(16)[:, None])
    back = restore(res.checkpoint)
    for k, v in fresh.G.state_dict().items():
        assert np.array_equal(back.G.state_dict()[k], v)
    assert res.steps_done == 0 and res.metrics.read_text().strip() == "step,d_loss,g_loss,d_real_mean,d_fake_mean"


def test_runs_are_bitwise_deterministic(tmp_path):
    a = train(toy_cfg(tmp_path, out=str(tmp_path / "a"), seed=5))
    b = train(toy_cfg(tmp_path, out=str(tmp_path / "b"), seed=5))
    c = train(toy_cfg(tmp_path, out=str(tmp_path / "c"), seed=6))
    assert a.metrics.read_bytes() == b.metrics.read_bytes()
    assert a.checkpoint.read_bytes() != c.checkpoint.read_bytes()
    ka, kb = ckpt_io.load(a.checkpoint), ckpt_io.load(b.checkpoint)
    assert all(np.array_equal(ka.blocks[k], kb.blocks[k]) for k in ka.blocks)


def test_resume_from_checkpoint_equals_uninterrupted(tmp_path):
    imgs = toy_two_mode(64)[:, None]
    cfg = toy_cfg(tmp_path, steps=6)
    straight = Trainer(cfg, imgs)
    for _ in range(6):
        straight.step()
    first = Trainer(cfg, imgs)
    for _ in range(3):
        first.step()
    blob = ckpt_io.decode(ckpt_io.encode(first.to_checkpoint()))
    second = Trainer(cfg, imgs)
    second.load_checkpoint(blob)
    for _ in range(3):
        second.step()
    for k, v in straight.D.state_dict().items():
        assert np.array_equal(second.D.state_dict()[k], v)
    for k, v in straight.G.state_dict().items():
        assert np.array_equal(second.G.state_dict()[k], v)


def test_outputs_written(tmp_path):
    res = train(toy_cfg(tmp_path, steps=4, checkpoint_every=2, sample_every=2))
    names = {p.name for p in res.out_dir.iterdir()}
    assert {"metrics.csv", "final.itug", "manifest.txt", "ckpt-000002.itug", "ckpt-000004.itug",
            "samples-raw-000002.pgm", "samples-T-000002.pgm", "samples-raw-final.pgm"} <= names
    manifest = res.manifest.read_text()
    assert f"sha256.final.itug = {hashlib.sha256(res.checkpoint.read_bytes()).hexdigest()}" in manifest
    assert len(res.metrics.read_text().splitlines()) == 5


def test_d_steps_counts_discriminator_updates(tmp_path):
    imgs = toy_two_mode(64)[:, None]
    tr = Trainer(toy_cfg(tmp_path, d_steps=3), imgs)
    tr.step()
    assert tr.opt_d.state.step == 3 and tr.opt_g.state.step == 1


def test_float32_training_runs(tmp_path):
    res = train(toy_cfg(tmp_path, precision="float32", steps=3))
    ck = ckpt_io.load(res.checkpoint)
    assert all(b.dtype == np.float32 for b in ck.blocks.values())
    assert restore(res.checkpoint).G.params["l1.w"].data.dtype == np.float32


def test_halt_on_nan_keeps_last_good_state(tmp_path, monkeypatch):
    calls = {"n": 0}
    real_d_loss = train_mod.d_loss

    def poisoned(D, *args, **kw):
        calls["n"] += 1
        if calls["n"] == 4:
            D.params["l3.b"].data[...] = np.nan
        return real_d_loss(D, *args, **kw)

    monkeypatch.setattr(train_mod, "d_loss", poisoned)
    res = train(toy_cfg(tmp_path, steps=10))
    assert res.halted and res.steps_done == 3
    assert res.diagnostic.startswith("step 4")
    assert res.checkpoint is None and not (res.out_dir / "final.itug").exists()
    good = ckpt_io.load(res.out_dir / "last_good.itug")
    assert good.step == 3 and all(np.isfinite(b).all() for b in good.blocks.values())
    assert (res.out_dir / "halt.txt").read_text().startswith("step 4")
    assert len(res.metrics.read_text().splitlines()) == 4


def test_toy_and_subset_loading(tmp_path):
    from itugan.gan import load_training_images

    assert load_training_images(TrainConfig(data="toy")).shape == (4096, 1, 2, 2)
    x = load_training_images(TrainConfig(data=str(FIXTURE64), subset_n=10, subset_seed=1))
    assert np.array_equal(x[:, 0], subset(load_idx(FIXTURE64), 10, 1).images)
    with pytest.raises(ValueError):
        load_training_images(TrainConfig())


# -- sampling -------------------------------------------------------------------------

def test_sample_deterministic_and_mirror_applied(tmp_path):
    res = train(toy_cfg(tmp_path, transform="T1", steps=3))
    a = sample(res.checkpoint, 6, seed=2)
    b = sample(res.checkpoint, 6, seed=2)
    c = sample(res.checkpoint, 6, seed=3)
    seen = sample(res.checkpoint, 6, seed=2, apply_T=True)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(seen, a[..., ::-1])
    assert sample(res.checkpoint, 0, seed=2).shape == (0, 1, 2, 2)


def test_checkpoint_roundtrip_sample_bitwise(tmp_path):
    imgs = toy_two_mode(64)[:, None]
    tr = Trainer(toy_cfg(tmp_path), imgs)
    for _ in range(2):
        tr.step()
    from itugan.gan.train import generate

    before = generate(tr.G, tr.T, 5, 9, tr.config.latent_dim, tr.dtype)
    path = ckpt_io.save(tr.to_checkpoint(), tmp_path / "x.itug")
    after = sample(path, 5, 9)
    assert np.array_equal(before, after)


# -- checkpoint format ----------------------------------------------------------------

def _ck():
    blocks = {"a": np.arange(6, dtype=np.float64).reshape(2, 3), "b": np.array([1.5], dtype=np.float32)}
    return Checkpoint({"seed": 1, "arch": "mlp"}, 7, blocks, {"note": "x"})


def _retrailer(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


def test_checkpoint_roundtrip():
    raw = ckpt_io.encode(_ck())
    back = ckpt_io.decode(raw)
    assert back.step == 7 and back.meta == {"note": "x"} and back.config == {"seed": 1, "arch": "mlp"}
    assert back.blocks["a"].dtype == np.float64 and back.blocks["b"].dtype == np.float32
    assert np.array_equal(back.blocks["a"], _ck().blocks["a"])
    assert ckpt_io.encode(back) == raw
    assert raw[:4] == b"ITUG" and struct.unpack("<I", raw[4:8]) == (1,)
    assert raw[8:40].hex() == back.config_hash


def test_checkpoint_bad_magic():
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        ckpt_io.decode(b"PK\x03\x04" + bytes(80))


def test_checkpoint_newer_version_rejected():
    raw = bytearray(ckpt_io.encode(_ck()))
    raw[4:8] = struct.pack("<I", 2)
    with pytest.raises(CheckpointError, match="version 2"):
        ckpt_io.decode(bytes(raw))


def test_checkpoint_bitflip_reports_version_and_hash():
    raw = bytearray(ckpt_io.encode(_ck()))
    raw[-40] ^= 0x01
    with pytest.raises(CheckpointError, match="corrupt checkpoint .*version 1, config hash [0-9a-f]{16}"):
        ckpt_io.decode(bytes(raw))


def test_checkpoint_truncation_reports_offset():
    body = ckpt_io.encode(_ck())[:-32]
    with pytest.raises(CheckpointError, match="truncated checkpoint reading block b data at offset"):
        ckpt_io.decode(_retrailer(body[:-2]))


def test_checkpoint_config_hash_mismatch():
    body = ckpt_io.encode(_ck())[:-32]
    tampered = body.replace(b'"seed":1', b'"seed":2')
    assert tampered != body
    with pytest.raises(CheckpointError, match="config hash mismatch"):
        ckpt_io.decode(_retrailer(tampered))


def test_checkpoint_rejects_int_blocks():
    with pytest.raises(CheckpointError, match="unsupported dtype"):
        ckpt_io.encode(Checkpoint({}, 0, {"x": np.arange(3)}))


def test_checkpoint_save_is_atomic(tmp_path):
    p = ckpt_io.save(_ck(), tmp_path / "c.itug")
    assert p.exists() and not (tmp_path / "c.itug.tmp").exists()


@given(st.binary(max_size=200))
@settings(max_examples=100, deadline=None)
def test_checkpoint_decoder_never_crashes_on_garbage(blob):
    try:
        ckpt_io.decode(blob)
    except CheckpointError:
        pass
