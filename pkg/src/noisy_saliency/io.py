"""Images on disk, dataset layout, checkpoints, manifests and config files.

Dataset layout::

    root/images/<id>.png          RGB or grayscale input
    root/labels/<labeller>/<id>.png
    root/gt/<id>.png              optional binary ground truth

PGM (P5) files are accepted anywhere a PNG is.
"""
from __future__ import annotations

import hashlib
import io as _io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .noise import NoiseBank
from .optim import OptimizerState
from .predictor import PredictorConfig
from .trainer import Dataset

IMAGE_SUFFIXES = (".png", ".pgm")


# images

def read_image(path) -> np.ndarray:
    """Decode an 8-bit PNG/PGM to float64 in [0, 1]; H x W or H x W x 3."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def read_map(path) -> np.ndarray:
    """Decode a saliency or label map; color files are reduced to luminance."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.float64) / 255.0


def to_uint8(values: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_image(path, values: np.ndarray) -> None:
    """Write [0, 1] values as 8-bit grayscale or RGB; the suffix picks PNG or PGM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = to_uint8(values)
    im = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    im.save(path, format=fmt)


def write_uint8(path, arr: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(path, format="PNG")


def _image_files(folder: Path) -> dict[str, Path]:
    if not folder.is_dir():
        return {}
    return {p.stem: p for p in sorted(folder.iterdir())
            if p.suffix.lower() in IMAGE_SUFFIXES}


# datasets

def ingest_dataset(root) -> Dataset:
    root = Path(root)
    images = _image_files(root / "images")
    if not images:
        raise FileNotFoundError(f"no images under {root / 'images'}")
    label_root = root / "labels"
    labellers = sorted(p.name for p in label_root.iterdir() if p.is_dir()) if label_root.is_dir() else []
    if not labellers:
        raise FileNotFoundError(f"no labeller directories under {label_root}")
    label_files = {name: _image_files(label_root / name) for name in labellers}
    gt_files = _image_files(root / "gt")
    ids = sorted(images)
    imgs, labels, gts = [], [], []
    shape = None
    for iid in ids:
        img = read_image(images[iid])
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        if shape is None:
            shape = img.shape[:2]
        elif img.shape[:2] != shape:
            raise ValueError(f"{images[iid]} is {img.shape[:2]}, other images are {shape}")
        imgs.append(img)
        row = []
        for name in labellers:
            if iid not in label_files[name]:
                raise FileNotFoundError(f"image {iid!r} has no label from labeller {name!r}")
            m = read_map(label_files[name][iid])
            if m.shape != img.shape[:2]:
                raise ValueError(
                    f"{label_files[name][iid]} is {m.shape}, but {images[iid]} is {img.shape[:2]}")
            row.append(m)
        labels.append(row)
        if gt_files:
            if iid not in gt_files:
                raise FileNotFoundError(f"image {iid!r} has no ground-truth map")
            g = read_map(gt_files[iid])
            if g.shape != img.shape[:2]:
                raise ValueError(f"{gt_files[iid]} is {g.shape}, but {images[iid]} is {img.shape[:2]}")
            gts.append((g >= 0.5).astype(np.float64))
    return Dataset(ids, np.stack(imgs), np.array(labels), np.stack(gts) if gts else None,
                   labellers)


def write_dataset(root, dataset: Dataset) -> list[Path]:
    """Write a dataset in the on-disk layout; returns the files written."""
    root = Path(root)
    written = []
    for k, iid in enumerate(dataset.ids):
        p = root / "images" / f"{iid}.png"
        write_image(p, dataset.images[k])
        written.append(p)
        for j, name in enumerate(dataset.labeller_names):
            p = root / "labels" / name / f"{iid}.png"
            write_image(p, dataset.labels[k, j])
            written.append(p)
        if dataset.gt is not None:
            p = root / "gt" / f"{iid}.png"
            write_image(p, dataset.gt[k])
            written.append(p)
    return written


def fingerprint(root) -> str:
    """sha256 over every file under ``root`` (relative path + bytes, sorted)."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file() and q.name != "manifest.json"):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# checkpoints

MAGIC = b"NLSD"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    predictor: PredictorConfig
    params: list[np.ndarray]
    optimizer: OptimizerState
    bank: NoiseBank
    round: int
    seed: int
    extra: dict = field(default_factory=dict)   # train config echo, mode, ...


def _pack_tensor(buf: _io.BytesIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    buf.write(struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    buf.write(arr.astype("<f8").tobytes())


def _pack_tensors(arrays) -> bytes:
    buf = _io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for a in arrays:
        _pack_tensor(buf, a)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensor(self) -> np.ndarray:
        (ndim,) = self.unpack("<I")
        shape = self.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(shape)) if ndim else 1
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)

    def tensors(self) -> list[np.ndarray]:
        (count,) = self.unpack("<I")
        return [self.tensor() for _ in range(count)]

    def done(self) -> bool:
        return self.pos == len(self.data)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    config = json.dumps({"predictor": ckpt.predictor.to_dict(), "extra": ckpt.extra},
                        sort_keys=True).encode()
    params = _pack_tensors(ckpt.params)
    opt = struct.pack("<Q", ckpt.optimizer.iteration) + _pack_tensors(ckpt.optimizer.velocity)
    vb = _io.BytesIO()
    vb.write(struct.pack("<I", len(ckpt.bank.variances)))
    for iid, v in ckpt.bank.variances.items():
        key = iid.encode()
        vb.write(struct.pack("<I", len(key)))
        vb.write(key)
        _pack_tensor(vb, v)
    counters = struct.pack("<IIQ", ckpt.round, ckpt.bank.round, ckpt.seed)
    out = _io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    for section in (config, params, opt, vb.getvalue(), counters):
        out.write(struct.pack("<Q", len(section)))
        out.write(section)
    return out.getvalue()


def decode_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    sections = []
    for _ in range(5):
        (n,) = r.unpack("<Q")
        sections.append(_Reader(r.take(n)))
    if not r.done():
        raise CheckpointError("trailing bytes after checkpoint sections")
    try:
        cfg = json.loads(sections[0].data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt config section: {e}") from e
    params = sections[1].tensors()
    (iteration,) = sections[2].unpack("<Q")
    velocity = sections[2].tensors()
    vr = sections[3]
    (count,) = vr.unpack("<I")
    variances = {}
    for _ in range(count):
        (klen,) = vr.unpack("<I")
        iid = vr.take(klen).decode()
        variances[iid] = vr.tensor()
    rnd, bank_round, seed = sections[4].unpack("<IIQ")
    for s in sections[1:]:
        if not s.done():
            raise CheckpointError("checkpoint section has unexpected trailing bytes")
    return Checkpoint(PredictorConfig.from_dict(cfg["predictor"]), params,
                      OptimizerState(velocity, iteration), NoiseBank(variances, bank_round),
                      rnd, seed, cfg.get("extra", {}))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


def checkpoint_sections(data: bytes) -> list[bytes]:
    """Raw section payloads, for inspection."""
    r = _Reader(data)
    r.take(8)
    out = []
    for _ in range(5):
        (n,) = r.unpack("<Q")
        out.append(r.take(n))
    return out


# config files and manifests

def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def manifest(command: str, config: dict, data_root=None, seed: int | None = None,
             artifacts: dict | None = None, **extra) -> dict:
    m = {"tool": "noisy_saliency", "version": __version__, "command": command,
         "config": config, "seed": seed, "artifacts": artifacts or {}}
    if data_root is not None:
        m["data"] = str(data_root)
        m["dataset_fingerprint"] = fingerprint(data_root)
    m.update(extra)
    return m
