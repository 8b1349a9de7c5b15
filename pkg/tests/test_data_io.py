#!/usr/bin/env python3
# -*- coding: UTF-8 -*-
"""Unittest for dataset ingestion, synthetic sets and dataset files"""

import gzip
import logging
import struct
import tempfile
import unittest
from pathlib import Path
from sys import stdout
from unittest.mock import MagicMock, patch
from urllib.error import URLError

import numpy as np
from nose2.tools import params

from advtrain.data_io import (BadMagicError, CountMismatchError,
                              DatasetConfigError, DatasetFormatError,
                              DecompressError, FetchConfig, LabeledDataset,
                              MnistFetcher, NetworkFetchError,
                              SizeMismatchError, TruncatedFileError,
                              dataset_digest, dataset_from_bytes,
                              dataset_to_bytes, default_data_dir, denormalize,
                              fetch_mnist, load_dataset, load_idx,
                              load_mnist, mnist_available, normalize,
                              save_dataset, split, split_indices,
                              synthetic_blobs, synthetic_separable)


def idx_images(pixels: np.ndarray, rows: int, cols: int) -> bytes:
    """IDX image file content"""
    header = struct.pack(">IIII", 0x803, pixels.shape[0], rows, cols)
    return header + pixels.astype(np.uint8).tobytes()


def idx_labels(labels) -> bytes:
    """IDX label file content"""
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 0x801, labels.shape[0]) + labels.tobytes()


def urlopen_returning(payload: bytes) -> MagicMock:
    """urlopen stand-in whose response yields the payload"""
    response = MagicMock()
    response.read.return_value = payload
    opener = MagicMock()
    opener.return_value.__enter__.return_value = response
    return opener


class TestDataIO(unittest.TestCase):

    def setUp(self) -> None:
        """Run before every test method"""
        # define a format
        custom_format = '[%(asctime)s] [%(levelname)-8s] [%(filename)-15s @'\
                        ' %(funcName)-15s:%(lineno)4s] %(message)s'

        # set basic config and level for all loggers
        logging.basicConfig(level=logging.INFO,
                            format=custom_format,
                            stream=stdout)

        # create a logger for this TestSuite
        self.test_logger = logging.getLogger(__name__)
        self.test_logger.setLevel(logging.DEBUG)

        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.pixels = np.arange(12 * 4).reshape(12, 4) * 5
        self.labels = np.arange(12) % 10

    def tearDown(self) -> None:
        """Run after every test method"""
        self._tmp.cleanup()

    def _write_idx(self, directory: Path, compress: bool = False) -> None:
        files = {
            "train-images-idx3-ubyte": idx_images(self.pixels, 2, 2),
            "train-labels-idx1-ubyte": idx_labels(self.labels),
        }
        for name, content in files.items():
            if compress:
                (directory / (name + ".gz")).write_bytes(
                    gzip.compress(content))
            else:
                (directory / name).write_bytes(content)

    def test_load_idx(self) -> None:
        """Test raw pixels, labels and image shape"""
        self._write_idx(self.tmp)
        ds = load_idx(self.tmp / "train-images-idx3-ubyte",
                      self.tmp / "train-labels-idx1-ubyte")
        self.assertEqual(ds.size, 12)
        self.assertEqual(ds.dim, 4)
        self.assertEqual(ds.class_count, 10)
        self.assertEqual(ds.image_shape, (2, 2))
        np.testing.assert_array_equal(ds.features, self.pixels)
        np.testing.assert_array_equal(ds.labels, self.labels)

    def test_load_idx_gzip_sibling(self) -> None:
        """Test a missing plain file falls back to its gzip sibling"""
        self._write_idx(self.tmp, compress=True)
        ds = load_idx(self.tmp / "train-images-idx3-ubyte",
                      self.tmp / "train-labels-idx1-ubyte")
        np.testing.assert_array_equal(ds.features, self.pixels)

    def test_load_idx_bad_magic(self) -> None:
        """Test swapped files are rejected by their magic"""
        self._write_idx(self.tmp)
        with self.assertRaises(BadMagicError):
            load_idx(self.tmp / "train-labels-idx1-ubyte",
                     self.tmp / "train-images-idx3-ubyte")

    def test_load_idx_truncated(self) -> None:
        """Test files shorter than their header are rejected"""
        images = self.tmp / "images"
        labels = self.tmp / "labels"
        images.write_bytes(idx_images(self.pixels, 2, 2)[:-1])
        labels.write_bytes(idx_labels(self.labels))
        with self.assertRaises(TruncatedFileError):
            load_idx(images, labels)
        images.write_bytes(b"\x00\x00")
        with self.assertRaises(TruncatedFileError):
            load_idx(images, labels)

    def test_load_idx_count_mismatch(self) -> None:
        """Test differing image and label counts are rejected"""
        images = self.tmp / "images"
        labels = self.tmp / "labels"
        images.write_bytes(idx_images(self.pixels, 2, 2))
        labels.write_bytes(idx_labels(self.labels[:5]))
        with self.assertRaises(CountMismatchError):
            load_idx(images, labels)

    def test_load_idx_corrupt_gzip(self) -> None:
        """Test a corrupt gzip file is reported"""
        (self.tmp / "images.gz").write_bytes(b"not gzip at all")
        (self.tmp / "labels").write_bytes(idx_labels(self.labels))
        with self.assertRaises(DecompressError):
            load_idx(self.tmp / "images.gz", self.tmp / "labels")

    def test_normalize(self) -> None:
        """Test normalization records an invertible transform"""
        ds = LabeledDataset(features=[[0.0, 128.0, 255.0]], labels=[0],
                            class_count=2)
        norm = normalize(ds)
        np.testing.assert_allclose(norm.features, [[0.0, 0.5, 255 / 256]])
        self.assertEqual(norm.scale, 256.0)
        twice = normalize(norm, scale=2.0, shift=0.25)
        self.assertEqual(twice.scale, 512.0)
        self.assertEqual(twice.shift, 64.0)
        np.testing.assert_allclose(denormalize(twice).features, ds.features)
        with self.assertRaises(DatasetConfigError):
            normalize(ds, scale=0.0)

    @params(
        ({"features": [[1.0]], "labels": [2], "class_count": 2}, ),
        ({"features": [[1.0]], "labels": [0, 1], "class_count": 2}, ),
        ({"features": [[np.nan]], "labels": [0], "class_count": 2}, ),
        ({"features": [1.0, 2.0], "labels": [0, 1], "class_count": 2}, ),
        ({"features": [[1.0, 2.0]], "labels": [0], "class_count": 2,
          "image_shape": (3, 1)}, ),
    )
    def test_invalid_dataset(self, kwargs) -> None:
        """Test inconsistent datasets are rejected"""
        with self.assertRaises(DatasetFormatError):
            LabeledDataset(**kwargs)

    def test_dataset_file(self) -> None:
        """Test dataset files keep features bit-exactly"""
        ds = synthetic_blobs(n=20, d=3, class_count=4, seed=1)
        ds.image_shape = None
        path = self.tmp / "blobs.data"
        digest = save_dataset(ds, path)
        loaded = load_dataset(path)
        self.assertEqual(digest, dataset_digest(ds))
        self.assertEqual(dataset_digest(loaded), digest)
        np.testing.assert_array_equal(loaded.features, ds.features)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        self.assertEqual(loaded.attributes, ds.attributes)
        self.assertEqual(loaded.source_tag, "synthetic-blobs")

    def test_dataset_file_malformed(self) -> None:
        """Test bad headers and truncated payloads are rejected"""
        content = dataset_to_bytes(synthetic_blobs(4, 2, 2))
        with self.assertRaises(TruncatedFileError):
            dataset_from_bytes(content[:-1])
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(b"OTHER v1\n{}\n")

    @params(
        (b'ADVTRAIN-DATA v1\n{}\n', ),
        (b'ADVTRAIN-DATA v1\n"text"\n', ),
        (b'ADVTRAIN-DATA v1\n{"n": 1, "d": 1}\n' + bytes(10), ),
        (b'ADVTRAIN-DATA v1\n{"n": 1, "d": 1, "k": 2, "scale": 1.0}\n' +
         bytes(10), ),
        (b'ADVTRAIN-DATA v1\n{"n": 1, "d": 1, "k": 2, "scale": 1.0, '
         b'"shift": 0.0, "image_shape": 3}\n' + bytes(10), ),
        (b'ADVTRAIN-DATA v1\n{"n": 1, "d": 1, "k": 2, "scale": 0.0, '
         b'"shift": 0.0}\n' + bytes(10), ),
    )
    def test_dataset_file_incomplete_metadata(self, content) -> None:
        """Test JSON metadata lacking or breaking fields is rejected"""
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(content)

    def test_synthetic_separable(self) -> None:
        """Test the functional margin along the separator"""
        ds = synthetic_separable(n=50, d=4, margin=1.0, seed=2)
        u = np.array(ds.attributes["separator"])
        y = 2.0 * ds.labels - 1.0
        self.assertAlmostEqual(float(np.min(y * (ds.features @ u))), 0.5,
                               places=12)
        self.assertEqual(ds.class_count, 2)
        with self.assertRaises(DatasetConfigError):
            synthetic_separable(n=1, d=2, margin=1.0)
        with self.assertRaises(DatasetConfigError):
            synthetic_separable(n=4, d=2, margin=0.0)

    def test_synthetic_separable_one_dim(self) -> None:
        """Test the one dimensional set has no noise"""
        ds = synthetic_separable(n=6, d=1, margin=2.0, seed=0)
        y = 2.0 * ds.labels - 1.0
        u = ds.attributes["separator"][0]
        self.assertAlmostEqual(float(np.min(y * ds.features[:, 0] * u)), 1.0,
                               places=12)

    def test_synthetic_is_seeded(self) -> None:
        """Test synthetic sets depend only on their seed"""
        a = synthetic_blobs(n=10, d=3, class_count=2, seed=5)
        b = synthetic_blobs(n=10, d=3, class_count=2, seed=5)
        np.testing.assert_array_equal(a.features, b.features)
        self.assertEqual(a.labels.tolist(), [0, 1] * 5)

    def test_split(self) -> None:
        """Test splits are disjoint and exhaustive"""
        train_idx, test_idx = split_indices(10, 0.7, seed=3)
        self.assertEqual(len(train_idx), 7)
        self.assertEqual(sorted(np.concatenate([train_idx, test_idx])),
                         list(range(10)))
        ds = synthetic_blobs(n=10, d=2, class_count=2)
        train, test = split(ds, 0.7, seed=3)
        np.testing.assert_array_equal(train.features, ds.features[train_idx])
        self.assertEqual(test.size, 3)
        with self.assertRaises(DatasetConfigError):
            split_indices(10, 1.0)
        with self.assertRaises(DatasetConfigError):
            split_indices(2, 0.1)

    def test_load_mnist(self) -> None:
        """Test the normalized train/validation split of the archive"""
        self.assertFalse(mnist_available(self.tmp))
        self._write_idx(self.tmp)
        self.assertTrue(mnist_available(self.tmp))
        train, validation = load_mnist(self.tmp, train_fraction=0.75, seed=0)
        self.assertEqual((train.size, validation.size), (9, 3))
        self.assertEqual(train.scale, 256.0)
        self.assertLess(float(train.features.max()), 1.0)
        self.assertEqual(train.image_shape, (2, 2))

    def test_default_data_dir(self) -> None:
        """Test the environment overrides the data directory"""
        with patch.dict("os.environ", {"ADVTRAIN_DATA_DIR": str(self.tmp)}):
            self.assertEqual(default_data_dir(), self.tmp)

    def test_fetch_downloads_once(self) -> None:
        """Test a missing file is downloaded and a valid one skipped"""
        content = idx_labels(self.labels)
        config = FetchConfig(base_url="http://mirror.invalid/mnist/",
                             target_dir=self.tmp,
                             expected_sizes={"labels": len(content)})
        self.assertEqual(config.url_for("labels"),
                         "http://mirror.invalid/mnist/labels.gz")
        opener = urlopen_returning(gzip.compress(content))
        with patch("advtrain.data_io.urlopen", opener):
            fetcher = MnistFetcher(config, logger=self.test_logger)
            paths = fetcher.fetch()
            fetcher.fetch()
        self.assertEqual(opener.call_count, 1)
        self.assertEqual(paths["labels"].read_bytes(), content)

    def test_fetch_mnist_skips_valid_files(self) -> None:
        """Test files of the expected size are not downloaded again"""
        (self.tmp / "images").write_bytes(b"x" * 16)
        (self.tmp / "labels").write_bytes(b"y" * 8)
        config = FetchConfig(base_url="http://mirror.invalid",
                             target_dir=self.tmp,
                             expected_sizes={"images": 16, "labels": 8})
        opener = MagicMock()
        with patch("advtrain.data_io.urlopen", opener):
            paths = fetch_mnist(config, logger=self.test_logger)
        opener.assert_not_called()
        self.assertEqual(paths, {"images": self.tmp / "images",
                                 "labels": self.tmp / "labels"})

    def test_fetch_size_mismatch(self) -> None:
        """Test a download of the wrong size is rejected"""
        config = FetchConfig(base_url="http://mirror.invalid",
                             target_dir=self.tmp,
                             expected_sizes={"labels": 999})
        opener = urlopen_returning(gzip.compress(b"short"))
        with patch("advtrain.data_io.urlopen", opener):
            with self.assertRaises(SizeMismatchError):
                MnistFetcher(config).fetch_file("labels")
        self.assertFalse((self.tmp / "labels").exists())

    def test_fetch_network_error(self) -> None:
        """Test network failures carry the URL"""
        config = FetchConfig(base_url="http://mirror.invalid",
                             target_dir=self.tmp,
                             expected_sizes={"labels": 10})
        opener = MagicMock(side_effect=URLError("unreachable"))
        with patch("advtrain.data_io.urlopen", opener):
            with self.assertRaises(NetworkFetchError) as context:
                MnistFetcher(config).fetch_file("labels")
        self.assertEqual(context.exception.url,
                         "http://mirror.invalid/labels.gz")

    def test_fetch_bad_gzip(self) -> None:
        """Test an undecodable download is reported"""
        config = FetchConfig(base_url="http://mirror.invalid",
                             target_dir=self.tmp,
                             expected_sizes={"labels": 10})
        with patch("advtrain.data_io.urlopen",
                   urlopen_returning(b"plain bytes")):
            with self.assertRaises(DecompressError):
                MnistFetcher(config).fetch_file("labels")

    def test_fetch_config_invalid(self) -> None:
        """Test invalid fetch settings are rejected"""
        with self.assertRaises(DatasetConfigError):
            FetchConfig(base_url="")
        with self.assertRaises(DatasetConfigError):
            FetchConfig(base_url="http://x", timeout=0)


if __name__ == '__main__':
    unittest.main()
