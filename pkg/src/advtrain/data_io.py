#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Dataset ingestion, normalization, synthetic datasets and dataset files

MNIST is read from the big-endian IDX files, optionally downloaded from a
configurable mirror. Datasets are persisted in the versioned
``ADVTRAIN-DATA v1`` format which round-trips bit-exactly.
"""

import gzip
import hashlib
import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union
from urllib.error import URLError
from urllib.request import urlopen

import numpy as np

from .core_math import seeded_rng
from .errors import AdvTrainError, ConfigError
from .logger import create_logger

DATA_HEADER = "ADVTRAIN-DATA v1"
DATA_DIR_ENV = "ADVTRAIN_DATA_DIR"

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
MNIST_CLASSES = 10
MNIST_SCALE = 256.0
MNIST_SHIFT = 0.0
MNIST_TRAIN_FRACTION = 50000 / 60000

# decompressed byte counts of the four archive members
MNIST_FILES = {
    "train-images-idx3-ubyte": 47040016,
    "train-labels-idx1-ubyte": 60008,
    "t10k-images-idx3-ubyte": 7840016,
    "t10k-labels-idx1-ubyte": 10008,
}

PathLike = Union[str, Path]


class DataIOError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class BadMagicError(DataIOError):
    """IDX header magic does not match the expected file kind."""
    pass


class TruncatedFileError(DataIOError):
    """A file ends before its header says it should."""
    pass


class CountMismatchError(DataIOError):
    """Image and label files hold a different number of items."""
    pass


class DatasetFormatError(DataIOError):
    """A dataset file or dataset content is malformed."""
    pass


class DatasetConfigError(DataIOError, ConfigError):
    """Invalid dataset or fetch parameters."""
    pass


class NetworkFetchError(DataIOError):
    """Download failed, ``url`` names the resource."""

    def __init__(self, url: str, reason: str) -> None:
        super().__init__("failed to fetch {}: {}".format(url, reason))
        self.url = url


class SizeMismatchError(DataIOError):
    """A fetched file does not have the expected size."""
    pass


class DecompressError(DataIOError):
    """A downloaded archive is not valid gzip."""
    pass


@dataclass
class LabeledDataset:
    """
    Samples (x_i, y_i) with normalization metadata

    Raw values are recovered as ``features * scale + shift``.
    """
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    scale: float = 1.0
    shift: float = 0.0
    source_tag: str = ""
    image_shape: Optional[Tuple[int, int]] = None
    attributes: Dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DatasetFormatError(
                "features must be a nonempty N x d matrix, got {}".format(
                    self.features.shape))
        if self.labels.shape != (self.features.shape[0], ):
            raise DatasetFormatError(
                "{} labels for {} samples".format(self.labels.shape[0],
                                                   self.features.shape[0]))
        if self.class_count < 1:
            raise DatasetFormatError("class_count must be >= 1")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise DatasetFormatError("labels must be in [0, {})".format(
                self.class_count))
        if not np.all(np.isfinite(self.features)):
            raise DatasetFormatError("features contain non finite entries")
        if self.scale == 0:
            raise DatasetFormatError("scale must not be 0")
        if self.image_shape is not None:
            self.image_shape = (int(self.image_shape[0]),
                                int(self.image_shape[1]))
            if self.image_shape[0] * self.image_shape[1] != self.dim:
                raise DatasetFormatError(
                    "image shape {} does not match d={}".format(
                        self.image_shape, self.dim))

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        """
        Dataset restricted to the given rows, in the given order

        :param      indices:  Row indices
        :type       indices:  Sequence[int]

        :returns:   The subset
        :rtype:     LabeledDataset
        """
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self,
                       features=self.features[idx],
                       labels=self.labels[idx],
                       attributes=dict(self.attributes))

    def with_features(self,
                      features: np.ndarray,
                      source_tag: Optional[str] = None) -> "LabeledDataset":
        """
        Same labels and metadata with new features

        :param      features:    The features
        :type       features:    np.ndarray
        :param      source_tag:  New tag, keeps the current one if None
        :type       source_tag:  Optional[str]

        :returns:   The dataset
        :rtype:     LabeledDataset
        """
        return replace(self,
                       features=features,
                       labels=self.labels.copy(),
                       source_tag=self.source_tag if source_tag is None
                       else source_tag,
                       attributes=dict(self.attributes))


def default_data_dir() -> Path:
    """
    Data directory from ``ADVTRAIN_DATA_DIR`` or ``./data``

    :returns:   The directory
    :rtype:     Path
    """
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    if not path.is_file():
        gz = path.with_name(path.name + ".gz")
        if gz.is_file():
            path = gz
    if path.suffix == ".gz":
        try:
            return gzip.decompress(path.read_bytes())
        except (OSError, EOFError, zlib.error) as e:
            raise DecompressError("{}: {}".format(path, e))
    return path.read_bytes()


def _parse_idx_images(content: bytes) -> Tuple[np.ndarray, Tuple[int, int]]:
    if len(content) < 16:
        raise TruncatedFileError("image file header needs 16 bytes")
    magic, count, rows, cols = struct.unpack(">IIII", content[:16])
    if magic != IMAGE_MAGIC:
        raise BadMagicError("image magic 0x{:08x}, expected 0x{:08x}".format(
            magic, IMAGE_MAGIC))
    expected = count * rows * cols
    if len(content) - 16 < expected:
        raise TruncatedFileError(
            "image file holds {} of {} pixel bytes".format(
                len(content) - 16, expected))
    pixels = np.frombuffer(content, dtype=np.uint8, count=expected,
                           offset=16)
    return pixels.reshape(count, rows * cols), (rows, cols)


def _parse_idx_labels(content: bytes) -> np.ndarray:
    if len(content) < 8:
        raise TruncatedFileError("label file header needs 8 bytes")
    magic, count = struct.unpack(">II", content[:8])
    if magic != LABEL_MAGIC:
        raise BadMagicError("label magic 0x{:08x}, expected 0x{:08x}".format(
            magic, LABEL_MAGIC))
    if len(content) - 8 < count:
        raise TruncatedFileError("label file holds {} of {} labels".format(
            len(content) - 8, count))
    return np.frombuffer(content, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path: PathLike, labels_path: PathLike) -> LabeledDataset:
    """
    Load an IDX image/label file pair

    Pixels stay raw (0..255) and are flattened row-major. Gzip files are
    detected by their ``.gz`` suffix, a missing plain file falls back to its
    ``.gz`` sibling.

    :param      images_path:  The images file
    :type       images_path:  PathLike
    :param      labels_path:  The labels file
    :type       labels_path:  PathLike

    :raises     BadMagicError:       Wrong magic number
    :raises     TruncatedFileError:  File shorter than its header claims
    :raises     CountMismatchError:  Image and label counts differ

    :returns:   The dataset with K = 10
    :rtype:     LabeledDataset
    """
    pixels, shape = _parse_idx_images(_read_bytes(images_path))
    labels = _parse_idx_labels(_read_bytes(labels_path))
    if pixels.shape[0] != labels.shape[0]:
        raise CountMismatchError("{} images but {} labels".format(
            pixels.shape[0], labels.shape[0]))
    if np.any(labels >= MNIST_CLASSES):
        raise DatasetFormatError("labels must be digits 0..9")
    return LabeledDataset(features=pixels.astype(np.float64),
                          labels=labels.astype(np.int64),
                          class_count=MNIST_CLASSES,
                          source_tag="idx:{}".format(Path(images_path).name),
                          image_shape=shape)


def normalize(dataset: LabeledDataset,
              scale: float = MNIST_SCALE,
              shift: float = MNIST_SHIFT) -> LabeledDataset:
    """
    Map x to (x - shift) / scale and record the transform

    :param      dataset:  The dataset
    :type       dataset:  LabeledDataset
    :param      scale:    Divisor, 256 for MNIST
    :type       scale:    float
    :param      shift:    Offset, 0 for MNIST
    :type       shift:    float

    :raises     DatasetConfigError:  scale is 0

    :returns:   The normalized dataset
    :rtype:     LabeledDataset
    """
    if scale == 0:
        raise DatasetConfigError("normalization scale must not be 0")
    out = dataset.with_features((dataset.features - shift) / scale)
    out.scale = dataset.scale * scale
    out.shift = dataset.shift + shift * dataset.scale
    return out


def denormalize(dataset: LabeledDataset) -> LabeledDataset:
    """
    Undo every recorded normalization

    :param      dataset:  The dataset
    :type       dataset:  LabeledDataset

    :returns:   Dataset in raw units with scale 1 and shift 0
    :rtype:     LabeledDataset
    """
    out = dataset.with_features(dataset.features * dataset.scale +
                                dataset.shift)
    out.scale = 1.0
    out.shift = 0.0
    return out


@dataclass
class FetchConfig:
    """Where to download MNIST from and where to keep it"""
    base_url: str
    target_dir: Path = field(default_factory=default_data_dir)
    expected_sizes: Dict[str, int] = field(
        default_factory=lambda: dict(MNIST_FILES))
    timeout: float = 30.0

    def __post_init__(self) -> None:
        self.target_dir = Path(self.target_dir)
        if not self.base_url:
            raise DatasetConfigError("base_url must be given")
        if any(size <= 0 for size in self.expected_sizes.values()):
            raise DatasetConfigError("expected sizes must be positive")
        if self.timeout <= 0:
            raise DatasetConfigError("timeout must be positive")

    def url_for(self, name: str) -> str:
        return "{}/{}.gz".format(self.base_url.rstrip("/"), name)


class MnistFetcher(object):
    """Download and verify the MNIST archive files"""

    def __init__(self,
                 config: FetchConfig,
                 logger: Optional[logging.Logger] = None) -> None:
        """
        Init MnistFetcher class

        :param      config:  The fetch configuration
        :type       config:  FetchConfig
        :param      logger:  Logger object
        :type       logger:  Optional[logging.Logger]
        """
        if logger is None:
            logger = create_logger(__name__)
        self._logger = logger
        self._config = config

    def _download(self, name: str) -> bytes:
        url = self._config.url_for(name)
        self._logger.info("Downloading {}".format(url))
        try:
            with urlopen(url, timeout=self._config.timeout) as response:
                payload = response.read()
        except (URLError, OSError, ValueError) as e:
            raise NetworkFetchError(url, str(e))
        try:
            return gzip.decompress(payload)
        except (OSError, EOFError, zlib.error) as e:
            raise DecompressError("{}: {}".format(url, e))

    def _is_valid(self, path: Path, size: int) -> bool:
        return path.is_file() and path.stat().st_size == size

    def fetch_file(self, name: str) -> Path:
        """
        Make sure one decompressed file is present with the expected size

        :param      name:  The file name without ``.gz``
        :type       name:  str

        :raises     SizeMismatchError:  Size still wrong after a download

        :returns:   Path to the file
        :rtype:     Path
        """
        size = self._config.expected_sizes[name]
        path = self._config.target_dir / name
        if self._is_valid(path, size):
            self._logger.debug("{} already present".format(path))
            return path
        if path.is_file():
            self._logger.warning("{} has {} bytes, expected {}, fetching "
                                 "again".format(path, path.stat().st_size,
                                                size))

        content = self._download(name)
        if len(content) != size:
            raise SizeMismatchError("{} has {} bytes, expected {}".format(
                self._config.url_for(name), len(content), size))
        self._config.target_dir.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
        return path

    def fetch(self) -> Dict[str, Path]:
        """
        Fetch every configured file, skipping valid local copies

        :returns:   File name to local path
        :rtype:     Dict[str, Path]
        """
        return {name: self.fetch_file(name)
                for name in self._config.expected_sizes}


def fetch_mnist(config: FetchConfig,
                logger: Optional[logging.Logger] = None) -> Dict[str, Path]:
    """
    Download the four MNIST files if absent, idempotent

    :param      config:  The fetch configuration
    :type       config:  FetchConfig
    :param      logger:  Logger object
    :type       logger:  Optional[logging.Logger]

    :returns:   File name to local path
    :rtype:     Dict[str, Path]
    """
    return MnistFetcher(config=config, logger=logger).fetch()


def synthetic_separable(n: int,
                        d: int,
                        margin: float,
                        seed: int = 0) -> LabeledDataset:
    """
    Linearly separable binary dataset with an exact functional margin

    Labels alternate between class 0 (y = -1) and class 1 (y = +1). The
    coordinate along a random unit direction u is pushed away from the
    hyperplane so that min_i y_i <u, x_i> equals margin / 2, the orthogonal
    part is standard Gaussian noise.

    :param      n:       Number of samples, at least 2
    :type       n:       int
    :param      d:       Dimension
    :type       d:       int
    :param      margin:  Full gap between the classes along u
    :type       margin:  float
    :param      seed:    The seed
    :type       seed:    int

    :raises     DatasetConfigError:  Invalid parameters

    :returns:   The dataset, ``attributes["separator"]`` holds u
    :rtype:     LabeledDataset
    """
    if n < 2 or d < 1 or not margin > 0:
        raise DatasetConfigError(
            "need n >= 2, d >= 1 and margin > 0, got {}, {}, {}".format(
                n, d, margin))
    rng = seeded_rng(seed)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)

    labels = np.arange(n) % 2
    y = 2.0 * labels - 1.0
    t = np.abs(rng.standard_normal(n))
    along = np.empty(n)
    for cls in (0, 1):
        rows = labels == cls
        along[rows] = y[rows] * (margin / 2.0 + t[rows] - t[rows].min())

    if d == 1:
        features = along[:, np.newaxis] * u
    else:
        noise = rng.standard_normal((n, d))
        noise -= np.outer(noise @ u, u)
        features = along[:, np.newaxis] * u + noise

    return LabeledDataset(features=features,
                          labels=labels,
                          class_count=2,
                          source_tag="synthetic-separable",
                          attributes={"separator": u.tolist(),
                                      "margin": float(margin),
                                      "seed": int(seed)})


def synthetic_blobs(n: int,
                    d: int,
                    class_count: int,
                    separation: float = 4.0,
                    seed: int = 0) -> LabeledDataset:
    """
    K unit-variance Gaussian blobs with centers at distance ``separation``
    from the origin

    :param      n:            Number of samples
    :type       n:            int
    :param      d:            Dimension
    :type       d:            int
    :param      class_count:  Number of blobs K
    :type       class_count:  int
    :param      separation:   Norm of every center
    :type       separation:   float
    :param      seed:         The seed
    :type       seed:         int

    :returns:   The dataset
    :rtype:     LabeledDataset
    """
    if n < 1 or d < 1 or class_count < 2 or separation < 0:
        raise DatasetConfigError(
            "need n >= 1, d >= 1, K >= 2 and separation >= 0")
    rng = seeded_rng(seed)
    centers = rng.standard_normal((class_count, d))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.arange(n) % class_count
    features = centers[labels] + rng.standard_normal((n, d))
    return LabeledDataset(features=features,
                          labels=labels,
                          class_count=class_count,
                          source_tag="synthetic-blobs",
                          attributes={"separation": float(separation),
                                      "seed": int(seed)})


def split_indices(n: int,
                  train_fraction: float,
                  seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded shuffle of range(n) cut into train and test parts

    :param      n:               Number of samples
    :type       n:               int
    :param      train_fraction:  Fraction in (0, 1)
    :type       train_fraction:  float
    :param      seed:            The seed
    :type       seed:            int

    :raises     DatasetConfigError:  Fraction out of range or a part empty

    :returns:   Train and test indices
    :rtype:     Tuple[np.ndarray, np.ndarray]
    """
    if not 0.0 < train_fraction < 1.0:
        raise DatasetConfigError("train_fraction must be in (0, 1)")
    n_train = int(round(n * train_fraction))
    if not 0 < n_train < n:
        raise DatasetConfigError(
            "split of {} samples at {} leaves an empty part".format(
                n, train_fraction))
    perm = seeded_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def split(dataset: LabeledDataset,
          train_fraction: float,
          seed: int = 0) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Disjoint, exhaustive random split

    :param      dataset:         The dataset
    :type       dataset:         LabeledDataset
    :param      train_fraction:  Fraction of samples in the first part
    :type       train_fraction:  float
    :param      seed:            The seed
    :type       seed:            int

    :returns:   Train and test datasets
    :rtype:     Tuple[LabeledDataset, LabeledDataset]
    """
    train_idx, test_idx = split_indices(dataset.size, train_fraction, seed)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def dataset_to_bytes(dataset: LabeledDataset) -> bytes:
    """
    Serialize a dataset into the versioned dataset format

    :param      dataset:  The dataset
    :type       dataset:  LabeledDataset

    :returns:   File content
    :rtype:     bytes
    """
    if dataset.class_count > 2 ** 16:
        raise DatasetFormatError("labels must fit into 16 bits")
    meta = {
        "n": dataset.size,
        "d": dataset.dim,
        "k": dataset.class_count,
        "scale": dataset.scale,
        "shift": dataset.shift,
        "source_tag": dataset.source_tag,
        "image_shape": list(dataset.image_shape)
        if dataset.image_shape else None,
        "attributes": dataset.attributes,
    }
    return b"".join([
        DATA_HEADER.encode("ascii"), b"\n",
        json.dumps(meta, sort_keys=True).encode("utf-8"), b"\n",
        np.ascontiguousarray(dataset.features, dtype="<f8").tobytes(),
        np.ascontiguousarray(dataset.labels, dtype="<u2").tobytes(),
    ])


def dataset_from_bytes(content: bytes) -> LabeledDataset:
    """
    Parse the versioned dataset format

    :param      content:  File content
    :type       content:  bytes

    :raises     DatasetFormatError:  Malformed content

    :returns:   The dataset
    :rtype:     LabeledDataset
    """
    try:
        header, meta_line, payload = content.split(b"\n", 2)
        header = header.decode("ascii")
    except ValueError as e:
        raise DatasetFormatError("malformed dataset file: {}".format(e))
    if header != DATA_HEADER:
        raise DatasetFormatError("unknown dataset header {!r}".format(header))

    try:
        meta = json.loads(meta_line.decode("utf-8"))
        n, d = int(meta["n"]), int(meta["d"])
        class_count = int(meta["k"])
        scale, shift = float(meta["scale"]), float(meta["shift"])
        source_tag = str(meta.get("source_tag") or "")
        shape = meta.get("image_shape")
        image_shape = tuple(int(v) for v in shape) if shape else None
        attributes = dict(meta.get("attributes") or {})
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError("malformed dataset metadata: {!r}".format(
            e))
    if n < 0 or d < 0:
        raise DatasetFormatError("negative dataset shape ({}, {})".format(
            n, d))

    n_feature_bytes = n * d * 8
    if len(payload) != n_feature_bytes + n * 2:
        raise TruncatedFileError("dataset payload has {} bytes, expected "
                                 "{}".format(len(payload),
                                             n_feature_bytes + n * 2))
    features = np.frombuffer(payload, dtype="<f8", count=n * d)
    labels = np.frombuffer(payload, dtype="<u2", count=n,
                           offset=n_feature_bytes)
    try:
        return LabeledDataset(
            features=features.reshape(n, d).astype(np.float64),
            labels=labels.astype(np.int64),
            class_count=class_count,
            scale=scale,
            shift=shift,
            source_tag=source_tag,
            image_shape=image_shape,
            attributes=attributes)
    except (TypeError, ValueError) as e:
        raise DatasetFormatError("inconsistent dataset file: {}".format(e))


def save_dataset(dataset: LabeledDataset, path: PathLike) -> str:
    """
    Write a dataset file

    :param      dataset:  The dataset
    :type       dataset:  LabeledDataset
    :param      path:     The output path
    :type       path:     PathLike

    :returns:   SHA-256 hex digest of the written bytes
    :rtype:     str
    """
    content = dataset_to_bytes(dataset)
    Path(path).write_bytes(content)
    return hashlib.sha256(content).hexdigest()


def load_dataset(path: PathLike) -> LabeledDataset:
    """
    Read a dataset file

    :param      path:  The path
    :type       path:  PathLike

    :returns:   The dataset
    :rtype:     LabeledDataset
    """
    return dataset_from_bytes(Path(path).read_bytes())


def dataset_digest(dataset: LabeledDataset) -> str:
    """SHA-256 hex digest of the serialized dataset"""
    return hashlib.sha256(dataset_to_bytes(dataset)).hexdigest()


def load_mnist(data_dir: Optional[PathLike] = None,
               train_fraction: float = MNIST_TRAIN_FRACTION,
               seed: int = 0) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Normalized train/validation split drawn from the MNIST training archive

    The default fraction gives 50000 training and 10000 validation images.

    :param      data_dir:        Directory holding the IDX files
    :type       data_dir:        Optional[PathLike]
    :param      train_fraction:  Fraction used for training
    :type       train_fraction:  float
    :param      seed:            Split seed
    :type       seed:            int

    :returns:   Train and validation datasets
    :rtype:     Tuple[LabeledDataset, LabeledDataset]
    """
    directory = Path(data_dir) if data_dir else default_data_dir()
    raw = load_idx(directory / "train-images-idx3-ubyte",
                   directory / "train-labels-idx1-ubyte")
    raw.source_tag = "mnist"
    return split(normalize(raw), train_fraction, seed)


def mnist_available(data_dir: Optional[PathLike] = None) -> bool:
    """
    Whether the MNIST training files are present, plain or gzipped

    :param      data_dir:  Directory holding the IDX files
    :type       data_dir:  Optional[PathLike]

    :returns:   True if both training files exist
    :rtype:     bool
    """
    directory = Path(data_dir) if data_dir else default_data_dir()
    for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        path = directory / name
        if not (path.is_file() or path.with_name(name + ".gz").is_file()):
            return False
    return True
