"""Dataset ingestion and feature persistence.

* CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar
  pixel bytes (R plane, G plane, B plane, each 32x32 row-major).
* Binary P6 portable pixmaps, 8 bit.
* Feature files: a small little-endian container, see ``write_features``.

Images are channel-first float arrays ``(3, H, W)`` with values in [0, 1].
"""
import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

CIFAR_CLASSES = 10
CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"

FEATURE_MAGIC = b"SCATFT01"
MODEL_MAGIC = b"SCATLP01"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<8s5IB")
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


@dataclass(frozen=True)
class LabeledImage:
    image: np.ndarray
    label: int
    source_index: int


# ---------------------------------------------------------------------------
# CIFAR-10

def read_cifar10_arrays(path):
    """Images ``(N, 3, 32, 32)`` in [0, 1] and labels ``(N,)`` from one batch."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % CIFAR_RECORD:
        raise FormatError(
            f"{path}: size {raw.size} is not a multiple of the {CIFAR_RECORD}-byte record")
    records = raw.reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= CIFAR_CLASSES)
    if bad.size:
        raise FormatError(f"{path}: record {bad[0]} has label {labels[bad[0]]} > 9")
    images = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE) / 255.0
    return images, labels


def load_cifar10_batch(path):
    """All records of a batch file as LabeledImages, in file order."""
    images, labels = read_cifar10_arrays(path)
    return [LabeledImage(img, int(lab), i) for i, (img, lab) in enumerate(zip(images, labels))]


def load_cifar10_split(directory, split="train"):
    """Concatenate the standard batch files of a ``cifar-10-batches-bin``
    directory.  ``split`` is ``"train"`` or ``"test"``."""
    names = {"train": CIFAR_TRAIN_FILES, "test": (CIFAR_TEST_FILE,)}.get(split)
    if names is None:
        raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
    directory = Path(directory)
    parts = [read_cifar10_arrays(directory / name) for name in names]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def balanced_indices(labels, total, seed, classes=CIFAR_CLASSES):
    """Indices of a seeded class-balanced subset, sorted by class then draw
    order."""
    labels = np.asarray(labels)
    if total <= 0 or total % classes:
        raise ParameterError(f"subset size {total} is not a positive multiple of {classes}")
    per_class = total // classes
    rng = np.random.default_rng(seed)
    order = rng.permutation(labels.size)
    picked = []
    for c in range(classes):
        members = order[labels[order] == c]
        if members.size < per_class:
            raise ParameterError(f"class {c} has {members.size} images, {per_class} needed")
        picked.append(members[:per_class])
    return np.concatenate(picked)


def sample_balanced_subset(data, total, seed, classes=CIFAR_CLASSES):
    """``total / classes`` images of every class, chosen by a seeded shuffle."""
    idx = balanced_indices([d.label for d in data], total, seed, classes)
    return [data[i] for i in idx]


# ---------------------------------------------------------------------------
# PPM

_PPM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n?)*([^\s#]+)")


def load_ppm(path):
    """Read a binary (P6) pixmap as a ``(3, H, W)`` array in [0, 1]."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    for _ in range(4):
        m = _PPM_TOKEN.match(data, pos)
        if not m:
            raise FormatError(f"{path}: truncated PPM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P6":
        raise FormatError(f"{path}: unsupported pixmap variant {fields[0][:8]!r}, need P6")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PPM header") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: degenerate {width}x{height} image")
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: only 8-bit pixmaps are supported (maxval {maxval})")
    pos += 1  # single whitespace byte before the raster
    need = width * height * 3
    raster = np.frombuffer(data, dtype=np.uint8, count=min(need, max(0, len(data) - pos)), offset=pos)
    if raster.size < need:
        raise FormatError(f"{path}: truncated raster, {raster.size} of {need} bytes")
    return raster.reshape(height, width, 3).transpose(2, 0, 1) / float(maxval)


def write_ppm(image, path):
    """Write a ``(3, H, W)`` image in [0, 1] as an 8-bit P6 pixmap."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3 or x.shape[1] == 0 or x.shape[2] == 0:
        raise FormatError(f"cannot write image of shape {x.shape} as a pixmap")
    if not np.all(np.isfinite(x)):
        raise FormatError("image contains non-finite values")
    raster = np.round(np.clip(x, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)
    header = f"P6\n{x.shape[2]} {x.shape[1]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster.tobytes())


# ---------------------------------------------------------------------------
# feature / model container

def _atomic_write(path, blob):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def pack_container(magic, array, scalar_width, manifest):
    """Header + row-major payload + JSON manifest text."""
    if scalar_width not in _DTYPES:
        raise ParameterError(f"scalar width must be 4 or 8, got {scalar_width!r}")
    a = np.asarray(array)
    if a.ndim != 4:
        raise ParameterError(f"container payload must be 4-d, got shape {a.shape}")
    header = _HEADER.pack(magic, CONTAINER_VERSION, *a.shape, scalar_width)
    payload = np.ascontiguousarray(a, dtype=_DTYPES[scalar_width]).tobytes()
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return header + payload + text


def unpack_container(magic, blob, source="<bytes>"):
    if len(blob) < _HEADER.size:
        raise FormatError(f"{source}: file shorter than the {_HEADER.size}-byte header")
    got, version, count, channels, height, width, scalar_width = _HEADER.unpack_from(blob)
    if got != magic:
        raise FormatError(f"{source}: bad magic {got!r}, expected {magic!r}")
    if version != CONTAINER_VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if scalar_width not in _DTYPES:
        raise FormatError(f"{source}: bad scalar width {scalar_width}")
    n = count * channels * height * width
    end = _HEADER.size + n * scalar_width
    if end > len(blob):
        raise FormatError(f"{source}: payload truncated, header promises {n} scalars")
    data = np.frombuffer(blob, dtype=_DTYPES[scalar_width], count=n, offset=_HEADER.size)
    try:
        manifest = json.loads(blob[end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError(f"{source}: manifest block is not valid JSON "
                          "(header and payload size disagree?)") from None
    if not isinstance(manifest, dict):
        raise FormatError(f"{source}: manifest must be a JSON object")
    return data.reshape(count, channels, height, width), scalar_width, manifest


@dataclass
class FeatureSet:
    """Contents of a feature file."""

    features: np.ndarray          # (count, channels, height, width)
    labels: np.ndarray            # (count,), -1 where unknown
    paths: list                   # one dict per channel
    seed: int = None
    config_hash: str = None
    source_indices: np.ndarray = None
    scalar_width: int = 8
    extra: dict = None


def write_features(path, features, labels=None, paths=None, seed=None, config_hash=None,
                   source_indices=None, scalar_width=4, extra=None):
    """Write a feature file.

    Layout (little-endian): magic ``SCATFT01``; uint32 version, count,
    channels, height, width; uint8 scalar width (4 or 8); the payload as
    IEEE floats in ``(count, channels, height, width)`` order; then a UTF-8
    JSON manifest running to end of file.
    """
    try:
        f = np.asarray(features, dtype=np.float64)
    except ValueError:
        raise ParameterError("feature tensors differ in shape") from None
    if f.ndim != 4:
        raise ParameterError("features must be a homogeneous (count, channels, height, width) array")
    if not np.all(np.isfinite(f)):
        raise ParameterError("features contain non-finite values")
    count, channels = f.shape[:2]
    labels = np.full(count, -1) if labels is None else np.asarray(labels)
    if labels.shape != (count,):
        raise ParameterError(f"{labels.shape[0] if labels.ndim else 0} labels for {count} tensors")
    paths = [{"channel": i} for i in range(channels)] if paths is None else list(paths)
    if len(paths) != channels:
        raise ParameterError(f"{len(paths)} path descriptors for {channels} channels")
    if source_indices is None:
        source_indices = np.arange(count)
    manifest = {
        "labels": [int(v) for v in labels],
        "paths": paths,
        "seed": seed,
        "config_hash": config_hash,
        "source_indices": [int(v) for v in source_indices],
        "extra": extra or {},
    }
    _atomic_write(path, pack_container(FEATURE_MAGIC, f, scalar_width, manifest))


def read_features(path):
    data, width, manifest = unpack_container(FEATURE_MAGIC, Path(path).read_bytes(), str(path))
    labels = np.asarray(manifest.get("labels", []), dtype=np.int64)
    if labels.shape != (data.shape[0],) or len(manifest.get("paths", [])) != data.shape[1]:
        raise FormatError(f"{path}: manifest does not match header counts")
    return FeatureSet(
        features=data,
        labels=labels,
        paths=manifest["paths"],
        seed=manifest.get("seed"),
        config_hash=manifest.get("config_hash"),
        source_indices=np.asarray(manifest.get("source_indices", []), dtype=np.int64),
        scalar_width=width,
        extra=manifest.get("extra") or {},
    )


def stacked(data):
    """LabeledImages -> ``(N, 3, H, W)`` images and ``(N,)`` labels."""
    if not data:
        return np.zeros((0, 3, CIFAR_SIDE, CIFAR_SIDE)), np.zeros(0, dtype=np.int64)
    return np.stack([d.image for d in data]), np.array([d.label for d in data])
