"""IDX ingestion, PGM export and run manifests."""
from __future__ import annotations

import datetime as _dt
import gzip
import hashlib
import io
import os
import struct
import subprocess
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_UBYTE_3D = 0x00000803
HEADER_BYTES = 16


class IdxError(ValueError):
    """Malformed IDX file; the message carries the byte offset."""


@dataclass(frozen=True)
class ImageDataset:
    """Grayscale images scaled to [-1, 1], shape (count, height, width)."""

    images: np.ndarray = field(repr=False)
    source: str = ""
    descriptor: str = "full"

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=np.float64)
        if imgs.ndim != 3:
            raise ValueError(f"images must be (count, height, width), got shape {imgs.shape}")
        if imgs.size and (imgs.min() < -1.0 or imgs.max() > 1.0):
            raise ValueError("pixel values must lie in [-1, 1]")
        imgs.setflags(write=False)
        object.__setattr__(self, "images", imgs)

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    def __len__(self) -> int:
        return self.count


def bytes_to_unit(b: np.ndarray) -> np.ndarray:
    """Map bytes 0..255 to 2 * (b / 255) - 1."""
    return 2.0 * (np.asarray(b, dtype=np.float64) / 255.0) - 1.0


def unit_to_bytes(v: np.ndarray) -> np.ndarray:
    """Inverse of bytes_to_unit: round(255 * (v + 1) / 2) clamped to 0..255."""
    return np.clip(np.rint(255.0 * (np.asarray(v, dtype=np.float64) + 1.0) / 2.0), 0, 255).astype(np.uint8)


def _read_maybe_gzip(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def parse_idx(raw: bytes, source: str = "<bytes>") -> ImageDataset:
    if len(raw) < HEADER_BYTES:
        raise IdxError(f"{source}: header truncated at offset {len(raw)} (need {HEADER_BYTES} bytes)")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:HEADER_BYTES])
    if magic != IDX_UBYTE_3D:
        raise IdxError(f"{source}: bad magic 0x{magic:08x} at offset 0 (expected 0x{IDX_UBYTE_3D:08x})")
    if rows == 0 or cols == 0:
        raise IdxError(f"{source}: zero image dimension {rows}x{cols} at offset 8")
    need = HEADER_BYTES + n * rows * cols
    if len(raw) < need:
        raise IdxError(f"{source}: truncated pixel data, file ends at offset {len(raw)} but header promises {n} images ending at offset {need}")
    if len(raw) > need:
        raise IdxError(f"{source}: {len(raw) - need} trailing bytes after offset {need}")
    pix = np.frombuffer(raw, dtype=np.uint8, offset=HEADER_BYTES).reshape(n, rows, cols)
    return ImageDataset(bytes_to_unit(pix), source=source)


def load_idx(path) -> ImageDataset:
    """Read an unsigned-byte 3-D IDX file (gzip detected by its magic bytes)."""
    path = Path(path)
    return parse_idx(_read_maybe_gzip(path), source=str(path))


def encode_idx(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8 or pixels.ndim != 3:
        raise ValueError("IDX encoder expects a (count, rows, cols) uint8 array")
    return struct.pack(">IIII", IDX_UBYTE_3D, *pixels.shape) + pixels.tobytes()


def write_idx(path, dataset_or_bytes, compress: bool | None = None) -> Path:
    """Write images as IDX; gzip when ``compress`` or the name ends in .gz (mtime 0, reproducible)."""
    path = Path(path)
    data = dataset_or_bytes
    if isinstance(data, ImageDataset):
        data = unit_to_bytes(data.images)
    payload = encode_idx(np.asarray(data))
    if compress is None:
        compress = path.suffix == ".gz"
    if compress:
        buf = io.BytesIO()
        with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
            gz.write(payload)
        payload = buf.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return path


def subset(dataset: ImageDataset, n: int, seed: int) -> ImageDataset:
    """Seeded uniform subset without replacement."""
    if n < 0 or n > dataset.count:
        raise ValueError(f"cannot take {n} images from a dataset of {dataset.count}")
    idx = np.random.default_rng(seed).permutation(dataset.count)[:n]
    imgs = dataset.images[idx] if n else np.zeros((0, dataset.height, dataset.width))
    return ImageDataset(imgs, source=dataset.source, descriptor=f"subset n={n} seed={seed} of {dataset.descriptor}")


# -- PGM ------------------------------------------------------------------------------

def tile(batch: np.ndarray, grid_cols: int) -> np.ndarray:
    """Row-major tiling of (count, h, w) images into one array; empty slots are -1."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 4 and batch.shape[1] == 1:
        batch = batch[:, 0]
    if batch.ndim != 3 or batch.shape[0] == 0:
        raise ValueError("montage needs a non-empty (count, h, w) batch")
    if grid_cols < 1:
        raise ValueError("grid_cols must be positive")
    n, h, w = batch.shape
    cols = min(grid_cols, n)
    rows = -(-n // cols)
    out = np.full((rows * h, cols * w), -1.0)
    for k in range(n):
        r, c = divmod(k, cols)
        out[r * h:(r + 1) * h, c * w:(c + 1) * w] = batch[k]
    return out


def encode_pgm(image: np.ndarray) -> bytes:
    pix = unit_to_bytes(image)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def write_montage(batch, grid_cols: int, path) -> Path:
    """Tile a batch row-major and write it as an 8-bit binary PGM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pgm(tile(batch, grid_cols)))
    return path


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM back to [-1, 1] values."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    pix = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1)
    return bytes_to_unit(pix.reshape(h, w))


# -- manifests ------------------------------------------------------------------------

def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def git_describe(cwd=None) -> str | None:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=cwd or Path(__file__).parent, capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return res.stdout.strip() or None if res.returncode == 0 else None


def run_manifest(path, config: dict, outputs=(), timestamp: str | None = None) -> Path:
    """Write ``key = value`` lines: config echo, build id, then sha256 of each output file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"timestamp = {ts}", f"build = {git_describe() or 'unknown'}"]
    lines += [f"config.{k} = {config[k]}" for k in sorted(config)]
    for out in outputs:
        out = Path(out)
        if out.exists():
            lines.append(f"sha256.{out.name} = {sha256_file(out)}")
        else:
            lines.append(f"missing.{out.name} = {out}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            k, _, v = line.partition(" = ")
            out[k] = v
    return out


# -- download -------------------------------------------------------------------------

MNIST_FILES = {
    "train-images": "train-images-idx3-ubyte.gz",
    "test-images": "t10k-images-idx3-ubyte.gz",
}


def fetch(base_url: str, dest_dir, names=tuple(MNIST_FILES.values()), timeout: float = 60.0) -> list[Path]:
    """Download IDX files from ``base_url`` (any mirror of the MNIST layout) into ``dest_dir``."""
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    got = []
    for name in names:
        target = dest / name
        if not target.exists():
            url = base_url.rstrip("/") + "/" + name
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                tmp = target.with_suffix(target.suffix + ".part")
                tmp.write_bytes(resp.read())
                os.replace(tmp, target)
        got.append(target)
    return got
