"""Dataset generators and loaders.

Synthetic generators are deterministic per seed (all draws go through
named substreams, so train and test splits are independent but
reproducible). Two label mechanisms exist and are easy to conflate:
``gen_mlr`` assigns the argmax class of a random linear score, while
``gen_deepnet`` samples labels from the softmax rows of a random deep
generator network.

Loaders parse the IDX image/label format and CIFAR-10 binary batches
bit-exactly, rejecting malformed files with the byte offset of the
problem.
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DataFormatError
from .rng import RngStream
from .validation import check_features, check_labels

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixels


@dataclass
class Dataset:
    X: np.ndarray  # (n, p) float64
    y: np.ndarray  # (n,) int64 labels in 1..k
    k: int

    def __post_init__(self):
        self.X = check_features(self.X)
        self.y = check_labels(self.y, self.k)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def gen_mlr(n=100, p=20, k=4, seed=0, n_test=0, weights=None):
    """Linear-score data: X ~ N(0, I), labels argmax of X @ W, W ~ N(0, 1).

    Returns (train, test) where test is None unless ``n_test > 0``; the
    test split shares W but draws fresh features. ``weights`` injects a
    fixed (p, k) score matrix instead of sampling one.
    """
    if n < 1 or p < 1 or k < 2:
        raise ValueError("need n, p >= 1 and k >= 2")
    rng = RngStream(seed)
    if weights is None:
        W = rng.generator("weights").standard_normal((p, k))
    else:
        W = np.asarray(weights, dtype=np.float64)
        if W.shape != (p, k):
            raise ValueError(f"weights must be ({p}, {k}), got {W.shape}")

    def draw(m, stream):
        X = rng.generator(stream).standard_normal((m, p))
        y = np.argmax(X @ W, axis=1) + 1
        return Dataset(X, y, k)

    train = draw(n, "features")
    test = draw(n_test, "features-test") if n_test > 0 else None
    return train, test


def deep_generator_weights(input_dim, widths, k, sigma, seed):
    """Weight matrices of the random generator network, biases zero.

    Sigmoid hidden layers, softmax over k outputs; entries ~ N(0, sigma^2).
    """
    gen = RngStream(seed).generator("weights")
    dims = [input_dim] + list(widths) + [k]
    return [gen.standard_normal((dims[i + 1], dims[i])) * sigma for i in range(len(dims) - 1)]


def deep_generator_probs(Ws, X):
    """Softmax class probabilities of the generator network on rows of X."""
    A = X
    for W in Ws[:-1]:
        A = expit(A @ W.T)
    z = A @ Ws[-1].T
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gen_deepnet(n=5000, input_dim=30, gen_widths=(30, 30), k=4,
                sigma=np.sqrt(5.0), seed=0, n_test=None):
    """Deep-generator data: labels sampled from the softmax of a random net.

    Features are i.i.d. standard normal; a fresh test split of ``n_test``
    rows (default: same size as train) is drawn from independent
    substreams of the same seed. Returns (train, test).
    """
    if n < 1 or input_dim < 1 or k < 2 or sigma < 0:
        raise ValueError("invalid generator dimensions")
    n_test = n if n_test is None else n_test
    rng = RngStream(seed)
    Ws = deep_generator_weights(input_dim, gen_widths, k, sigma, seed)

    def draw(m, xs, ys):
        X = rng.generator(xs).standard_normal((m, input_dim))
        probs = deep_generator_probs(Ws, X)
        u = rng.generator(ys).random((m, 1))
        y = (probs.cumsum(axis=1) < u).sum(axis=1) + 1
        return Dataset(X, np.minimum(y, k), k)

    train = draw(n, "features", "labels")
    test = draw(n_test, "features-test", "labels-test") if n_test > 0 else None
    return train, test


def gen_xor(replicas=100, target_soft=0.9):
    """The four XOR patterns, each repeated ``replicas`` times.

    Class 1 means "XOR true": (1,0) and (0,1). Returns (dataset, P_soft)
    where P_soft is the (n, 1) soft observation column holding
    ``target_soft`` for class-1 rows and ``1 - target_soft`` otherwise;
    train on P_soft to keep the perfect classifier's weights finite, or on
    the hard labels via ``encode_observations``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if not 0.5 < target_soft <= 1.0:
        raise ValueError("target_soft must be in (0.5, 1]")
    patterns = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    labels = np.array([2, 1, 1, 2])
    X = np.tile(patterns, (replicas, 1))
    y = np.tile(labels, replicas)
    P_soft = np.where(y == 1, target_soft, 1.0 - target_soft)[:, None].astype(np.float64)
    return Dataset(X, y, 2), P_soft


def _read_be32(data, offset, path):
    if len(data) < offset + 4:
        raise DataFormatError(f"{path}: truncated header at byte offset {len(data)}")
    return struct.unpack_from(">i", data, offset)[0]


def load_mnist_idx(images_path, labels_path, limit=None):
    """Parse IDX image + label files into a Dataset.

    Image file: big-endian int32 magic 0x00000803, count, rows, cols, then
    count*rows*cols unsigned bytes. Label file: magic 0x00000801, count,
    then count bytes in 0..9. Features are scaled to [0, 1]; labels are
    shifted to 1..10.
    """
    with open(images_path, "rb") as f:
        img = f.read()
    magic = _read_be32(img, 0, images_path)
    if magic != MNIST_IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad image magic 0x{magic & 0xffffffff:08x} at byte offset 0")
    count = _read_be32(img, 4, images_path)
    rows = _read_be32(img, 8, images_path)
    cols = _read_be32(img, 12, images_path)
    expected = 16 + count * rows * cols
    if len(img) != expected:
        raise DataFormatError(
            f"{images_path}: {len(img)} bytes, expected {expected}"
            f" (payload ends at byte offset {len(img)})")

    with open(labels_path, "rb") as f:
        lab = f.read()
    magic = _read_be32(lab, 0, labels_path)
    if magic != MNIST_LABEL_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad label magic 0x{magic & 0xffffffff:08x} at byte offset 0")
    lab_count = _read_be32(lab, 4, labels_path)
    if len(lab) != 8 + lab_count:
        raise DataFormatError(
            f"{labels_path}: {len(lab)} bytes, expected {8 + lab_count}")
    if lab_count != count:
        raise DataFormatError(
            f"image count {count} != label count {lab_count}")

    m = count if limit is None else min(int(limit), count)
    pixels = np.frombuffer(img, dtype=np.uint8, offset=16, count=m * rows * cols)
    X = pixels.reshape(m, rows * cols).astype(np.float64) / 255.0
    y = np.frombuffer(lab, dtype=np.uint8, offset=8, count=m).astype(np.int64) + 1
    return Dataset(X, y, 10)


def load_cifar10(batch_paths, limit=None):
    """Parse CIFAR-10 binary batches: records of 1 label byte + 3072 pixels."""
    if isinstance(batch_paths, (str, bytes)):
        batch_paths = [batch_paths]
    xs, ys = [], []
    remaining = None if limit is None else int(limit)
    for path in batch_paths:
        if remaining is not None and remaining <= 0:
            break
        with open(path, "rb") as f:
            data = f.read()
        if len(data) % CIFAR_RECORD_BYTES != 0:
            raise DataFormatError(
                f"{path}: {len(data)} bytes is not a multiple of {CIFAR_RECORD_BYTES}"
                f" (offset of partial record: {len(data) - len(data) % CIFAR_RECORD_BYTES})")
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        if remaining is not None:
            records = records[:remaining]
            remaining -= records.shape[0]
        ys.append(records[:, 0].astype(np.int64) + 1)
        xs.append(records[:, 1:].astype(np.float64) / 255.0)
    X = np.concatenate(xs) if xs else np.empty((0, CIFAR_RECORD_BYTES - 1))
    y = np.concatenate(ys) if ys else np.empty(0, dtype=np.int64)
    return Dataset(X, y, 10)


def write_dataset_csv(ds, path):
    """Header row x1..xp,label then one row per sample; floats via repr."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join([f"x{j + 1}" for j in range(ds.p)] + ["label"]) + "\n")
        for i in range(ds.n):
            f.write(",".join(repr(float(v)) for v in ds.X[i]) + f",{int(ds.y[i])}\n")


def read_dataset_csv(path, k=None):
    """Inverse of ``write_dataset_csv``; k defaults to the largest label seen."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if not header or header[-1] != "label":
            raise DataFormatError(f"{path}: last header column must be 'label'")
        p = len(header) - 1
        X, y = [], []
        for lineno, line in enumerate(f, start=2):
            parts = line.strip().split(",")
            if len(parts) != p + 1:
                raise DataFormatError(f"{path}: line {lineno} has {len(parts)} fields, expected {p + 1}")
            X.append([float(v) for v in parts[:p]])
            y.append(int(parts[p]))
    X = np.asarray(X, dtype=np.float64).reshape(len(y), p)
    y = np.asarray(y, dtype=np.int64)
    if k is None:
        k = int(y.max()) if y.size else 2
    return Dataset(X, y, k)


def dataset_digest(ds):
    """SHA-256 of the raw sample bytes; identifies a generated dataset in manifests."""
    h = hashlib.sha256()
    h.update(ds.X.tobytes())
    h.update(ds.y.tobytes())
    return h.hexdigest()


def dataset_manifest(ds, kind, seed=None, **extra):
    info = {"kind": kind, "n": ds.n, "p": ds.p, "k": ds.k,
            "digest": dataset_digest(ds)}
    if seed is not None:
        info["seed"] = int(seed)
    info.update(extra)
    return info


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
