"""Synthetic micro-cluster data, corruption generators, OOD sampling, file I/O."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import sample_sphere

_HEADER_LEN = struct.Struct("<I")

MAX_CENTER_ATTEMPTS = 1_000_000
CENTER_COS_CAP = 0.5
TRAIN_FRACTION = 0.8
CIFAR_RECORD_BYTES = 3073

CORRUPTION_KINDS = ("uniform", "gaussian", "brightness")


@dataclass
class Dataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    name: str
    num_classes: int

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be (n, d) and labels (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels lengths differ")
        # label == num_classes marks out-of-distribution sentinels
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() > self.num_classes
        ):
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Hypersphere micro-cluster layout: well separated modes, tight spread."""

    d: int = 64
    k: int = 4
    modes_per_class: int = 2
    cluster_std: float = 0.05
    samples_per_mode: int = 250
    radius: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.d, self.k, self.modes_per_class, self.samples_per_mode) < 1:
            raise ValueError("all counts must be >= 1")
        if self.cluster_std <= 0.0 or self.radius <= 0.0:
            raise ValueError("cluster_std and radius must be > 0")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    level: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"kind must be one of {CORRUPTION_KINDS}")
        if not np.isfinite(self.level) or self.level < 0.0:
            raise ValueError("level must be finite and >= 0")


def mode_centers(spec: SyntheticSpec) -> np.ndarray:
    """Modes on the radius sphere, rejection-sampled to pairwise cosine < 0.5."""
    rng = np.random.default_rng([spec.seed, 0])
    n_modes = spec.k * spec.modes_per_class
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < n_modes:
        block = sample_sphere(min(256, MAX_CENTER_ATTEMPTS - attempts + 1), spec.d, rng)
        for candidate in block:
            attempts += 1
            if attempts > MAX_CENTER_ATTEMPTS:
                raise ValueError(
                    f"mode-center rejection sampling exceeded {MAX_CENTER_ATTEMPTS} "
                    f"attempts; {n_modes} modes at pairwise cosine < {CENTER_COS_CAP} "
                    f"do not fit in dimension {spec.d}"
                )
            if all(float(candidate @ c) < CENTER_COS_CAP for c in centers):
                centers.append(candidate)
                if len(centers) == n_modes:
                    break
    out = np.stack(centers) * spec.radius
    unit = out / np.linalg.norm(out, axis=1, keepdims=True)
    gram = unit @ unit.T
    assert float(gram[np.triu_indices(n_modes, k=1)].max(initial=-1.0)) < CENTER_COS_CAP
    return out


def gen_microclusters(spec: SyntheticSpec) -> tuple[Dataset, Dataset]:
    """Gaussian blobs around each mode, split 80/20 per mode into train/test."""
    centers = mode_centers(spec)
    rng = np.random.default_rng([spec.seed, 1])
    train_per_mode = int(TRAIN_FRACTION * spec.samples_per_mode)
    train_feats, train_labels, test_feats, test_labels = [], [], [], []
    for mode, center in enumerate(centers):
        label = mode // spec.modes_per_class
        points = center + rng.normal(0.0, spec.cluster_std, (spec.samples_per_mode, spec.d))
        train_feats.append(points[:train_per_mode])
        test_feats.append(points[train_per_mode:])
        train_labels.extend([label] * train_per_mode)
        test_labels.extend([label] * (spec.samples_per_mode - train_per_mode))
    train = Dataset(
        features=np.concatenate(train_feats),
        labels=np.array(train_labels),
        name="microclusters-train",
        num_classes=spec.k,
    )
    test = Dataset(
        features=np.concatenate(test_feats),
        labels=np.array(test_labels),
        name="microclusters-test",
        num_classes=spec.k,
    )
    return train, test


def corrupt(data: Dataset, spec: CorruptionSpec) -> Dataset:
    """Additive corruption scaled by the dataset's overall feature std."""
    scale = spec.level * float(data.features.std())
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "uniform":
        noise = rng.uniform(-scale, scale, data.features.shape)
    elif spec.kind == "gaussian":
        noise = rng.normal(0.0, scale, data.features.shape)
    else:
        noise = scale
    return Dataset(
        features=data.features + noise,
        labels=data.labels.copy(),
        name=f"{data.name}-{spec.kind}{spec.level:g}",
        num_classes=data.num_classes,
    )


def gen_ood(n: int, d: int, radius: float, seed: int, num_classes: int) -> Dataset:
    """Uniform points on the radius sphere, labeled with the sentinel class."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng([seed, 2])
    points = sample_sphere(n, d, rng) * radius
    return Dataset(
        features=points,
        labels=np.full(n, num_classes, dtype=np.int64),
        name="ood-sphere",
        num_classes=num_classes,
    )


def load_cifar10_bin(path: str) -> Dataset:
    """Read the classic binary format: 1 label byte + 3072 channel-major pixels."""
    blob = Path(path).read_bytes()
    if len(blob) % CIFAR_RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: length {len(blob)} is not a multiple of {CIFAR_RECORD_BYTES}"
        )
    n = len(blob) // CIFAR_RECORD_BYTES
    raw = np.frombuffer(blob, dtype=np.uint8).reshape(n, CIFAR_RECORD_BYTES) if n else (
        np.zeros((0, CIFAR_RECORD_BYTES), dtype=np.uint8)
    )
    labels = raw[:, 0].astype(np.int64)
    if len(labels) and labels.max() > 9:
        raise ValueError(f"{path}: label byte {labels.max()} exceeds 9")
    features = raw[:, 1:].astype(float) / 255.0
    return Dataset(features=features, labels=labels, name=Path(path).stem, num_classes=10)


def save_dataset(data: Dataset, path: str) -> None:
    """Length-prefixed JSON header, then f64 features and u32 labels (LE)."""
    header = json.dumps(
        {"name": data.name, "d": data.dim, "k": data.num_classes, "n": len(data)},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER_LEN.pack(len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(data.features, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(data.labels, dtype="<u4").tobytes())


def load_dataset(path: str) -> Dataset:
    blob = Path(path).read_bytes()
    (header_len,) = _HEADER_LEN.unpack_from(blob, 0)
    off = _HEADER_LEN.size
    header = json.loads(blob[off : off + header_len].decode("utf-8"))
    off += header_len
    n, d = int(header["n"]), int(header["d"])
    expected = n * d * 8 + n * 4
    if len(blob) - off != expected:
        raise ValueError(f"{path}: payload is {len(blob) - off} bytes, expected {expected}")
    features = np.frombuffer(blob, dtype="<f8", count=n * d, offset=off).reshape(n, d)
    off += n * d * 8
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=off)
    return Dataset(
        features=features.astype(float),
        labels=labels.astype(np.int64),
        name=str(header["name"]),
        num_classes=int(header["k"]),
    )


def load_any(path: str) -> Dataset:
    """Dispatch on extension: .bin is CIFAR-10 binary, anything else native."""
    if str(path).endswith(".bin"):
        return load_cifar10_bin(path)
    return load_dataset(path)
