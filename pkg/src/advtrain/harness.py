#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Experiment driver

Trains every configured method, evaluates the accuracy matrix on the clean
validation set, the fixed transfer set and one adversarial set per attack
family, produces robustness curves and dumps perturbed images.
"""

import csv
import io
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy
from deepdiff import DeepDiff

from .adversary import (AttackFamily, PerturbationSpec, adversarial_info,
                        generate_adversarial_set, perturb_batch,
                        save_adversarial_set)
from .core_math import DimensionMismatchError, NormKind
from .data_io import (MNIST_TRAIN_FRACTION, LabeledDataset, dataset_digest,
                      load_dataset, load_mnist, split, synthetic_blobs,
                      synthetic_separable)
from .errors import AdvTrainError, ConfigError
from .logger import create_logger
from .net import Network, SplitUndefinedError, predict, rep_forward, save_model
from .robust_train import TrainConfig, train
from .version import __version__

VALIDATION_COLUMN = "Validation"
FIXED_COLUMN = "Fixed"
DEFAULT_EPSILON = 1.5
DEFAULT_EPS_GRID = tuple(0.25 * i for i in range(17))

PathLike = Union[str, Path]


class HarnessError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class ExperimentConfigError(HarnessError, ConfigError):
    """Invalid experiment configuration."""
    pass


class NotImageShapedError(HarnessError):
    """The dataset carries no image shape."""
    pass


def _check_keys(data: dict, allowed: Sequence[str], what: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ExperimentConfigError("Unknown {} keys: {}".format(
            what, sorted(unknown)))


def validate_eps_grid(grid: Sequence[float]) -> Tuple[float, ...]:
    """
    Check that an epsilon grid is nonempty, nonnegative and ascending

    :param      grid:  The grid
    :type       grid:  Sequence[float]

    :raises     ExperimentConfigError:  Invalid grid

    :returns:   The grid as a tuple of floats
    :rtype:     Tuple[float, ...]
    """
    values = tuple(float(v) for v in grid)
    if not values:
        raise ExperimentConfigError("epsilon grid must not be empty")
    if any(not np.isfinite(v) or v < 0 for v in values):
        raise ExperimentConfigError("epsilon values must be finite and >= 0")
    if any(b <= a for a, b in zip(values[:-1], values[1:])):
        raise ExperimentConfigError("epsilon grid must be ascending")
    return values


def parse_eps_grid(text: str) -> Tuple[float, ...]:
    """
    Parse "A:B:STEP" into A, A + STEP, ..., B

    :param      text:  The grid description
    :type       text:  str

    :raises     ExperimentConfigError:  Malformed text

    :returns:   The grid
    :rtype:     Tuple[float, ...]
    """
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ExperimentConfigError(
            "epsilon grid must look like A:B:STEP, got '{}'".format(text))
    if not step > 0 or stop < start:
        raise ExperimentConfigError("need STEP > 0 and B >= A")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return validate_eps_grid(round(start + i * step, 12)
                             for i in range(count))


@dataclass
class DatasetConfig:
    """Where the training and validation data come from"""
    kind: str = "synthetic-blobs"
    path: Optional[str] = None
    validation_path: Optional[str] = None
    data_dir: Optional[str] = None
    train_fraction: float = MNIST_TRAIN_FRACTION
    seed: int = 0
    n: int = 600
    d: int = 20
    class_count: int = 3
    separation: float = 4.0
    margin: float = 1.0
    limit_train: Optional[int] = None
    limit_validation: Optional[int] = None

    KINDS = ("mnist", "file", "synthetic-blobs", "synthetic-separable")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ExperimentConfigError("dataset kind must be one of {}".
                                        format(", ".join(self.KINDS)))
        if self.kind == "file" and not self.path:
            raise ExperimentConfigError("file datasets need a path")
        if not 0.0 < self.train_fraction < 1.0:
            raise ExperimentConfigError("train_fraction must be in (0, 1)")
        for limit in (self.limit_train, self.limit_validation):
            if limit is not None and limit < 1:
                raise ExperimentConfigError("limits must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetConfig":
        _check_keys(data, [f for f in cls.__dataclass_fields__], "dataset")
        return cls(**data)

    def to_dict(self) -> dict:
        return {name: getattr(self, name)
                for name in self.__dataclass_fields__}

    def load(self) -> Tuple[LabeledDataset, LabeledDataset]:
        """
        Load or generate the train and validation sets

        :returns:   Train and validation datasets
        :rtype:     Tuple[LabeledDataset, LabeledDataset]
        """
        if self.kind == "mnist":
            train_set, validation = load_mnist(self.data_dir,
                                               self.train_fraction,
                                               self.seed)
        elif self.kind == "file" and self.validation_path:
            train_set = load_dataset(self.path)
            validation = load_dataset(self.validation_path)
        else:
            if self.kind == "file":
                full = load_dataset(self.path)
            elif self.kind == "synthetic-blobs":
                full = synthetic_blobs(self.n, self.d, self.class_count,
                                       self.separation, self.seed)
            else:
                full = synthetic_separable(self.n, self.d, self.margin,
                                           self.seed)
            train_set, validation = split(full, self.train_fraction,
                                          self.seed)
        if self.limit_train is not None:
            train_set = train_set.subset(range(min(self.limit_train,
                                                   train_set.size)))
        if self.limit_validation is not None:
            validation = validation.subset(range(min(self.limit_validation,
                                                     validation.size)))
        return train_set, validation


@dataclass
class EvaluationConfig:
    """Adversarial columns and robustness curve settings"""
    families: Tuple[AttackFamily, ...] = (AttackFamily.ADV_ALPHA,
                                          AttackFamily.ADV_LOSS,
                                          AttackFamily.ADV_LOSS_SIGN)
    norm: NormKind = NormKind.L2
    epsilon: float = DEFAULT_EPSILON
    eps_grid: Tuple[float, ...] = DEFAULT_EPS_GRID
    curve_methods: Tuple[str, ...] = ()
    learning_curves: bool = False

    def __post_init__(self) -> None:
        try:
            self.families = tuple(AttackFamily.from_name(f)
                                  for f in self.families)
            self.norm = NormKind.from_name(self.norm)
        except (ConfigError, ValueError) as e:
            raise ExperimentConfigError(str(e))
        if not self.families:
            raise ExperimentConfigError("at least one family is needed")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ExperimentConfigError("epsilon must be finite and >= 0")
        self.eps_grid = validate_eps_grid(self.eps_grid)
        self.curve_methods = tuple(self.curve_methods)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationConfig":
        _check_keys(data, [f for f in cls.__dataclass_fields__],
                    "evaluation")
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "families": [f.value for f in self.families],
            "norm": self.norm.value,
            "epsilon": self.epsilon,
            "eps_grid": list(self.eps_grid),
            "curve_methods": list(self.curve_methods),
            "learning_curves": self.learning_curves,
        }

    def spec(self, family: AttackFamily) -> PerturbationSpec:
        return PerturbationSpec(family=family, norm=self.norm,
                                budget=self.epsilon)


@dataclass
class FixedSetConfig:
    """Transfer set generated once from one trained model"""
    source_method: str = "Normal"
    family: AttackFamily = AttackFamily.ADV_LOSS
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        try:
            self.family = AttackFamily.from_name(self.family)
        except ConfigError as e:
            raise ExperimentConfigError(str(e))
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ExperimentConfigError("epsilon must be finite and >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "FixedSetConfig":
        _check_keys(data, ["source_method", "family", "epsilon"], "fixed_set")
        return cls(**data)

    def to_dict(self) -> dict:
        return {"source_method": self.source_method,
                "family": self.family.value,
                "epsilon": self.epsilon}


@dataclass
class ExperimentConfig:
    """A full experiment, JSON files mirror the field names"""
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    methods: List[TrainConfig] = field(default_factory=list)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    fixed_set: FixedSetConfig = field(default_factory=FixedSetConfig)
    output_dir: str = "experiment"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.methods:
            raise ExperimentConfigError("at least one method is needed")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ExperimentConfigError("method names must be unique")
        if self.fixed_set.source_method not in names:
            raise ExperimentConfigError(
                "fixed set source '{}' is not a trained method".format(
                    self.fixed_set.source_method))
        for name in self.evaluation.curve_methods:
            if name not in names:
                raise ExperimentConfigError(
                    "curve method '{}' is not a trained method".format(name))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """
        Build the config from parsed JSON

        Method entries without a seed inherit the experiment seed.

        :param      data:  The parsed JSON
        :type       data:  dict

        :raises     ConfigError:  Unknown keys or invalid values

        :returns:   The config
        :rtype:     ExperimentConfig
        """
        _check_keys(data, ["dataset", "methods", "evaluation", "fixed_set",
                           "output_dir", "seed"], "experiment")
        seed = int(data.get("seed", 0))
        methods = []
        for entry in data.get("methods", []):
            entry = dict(entry)
            entry.setdefault("seed", seed)
            methods.append(TrainConfig.from_dict(entry))
        return cls(dataset=DatasetConfig.from_dict(data.get("dataset", {})),
                   methods=methods,
                   evaluation=EvaluationConfig.from_dict(
                       data.get("evaluation", {})),
                   fixed_set=FixedSetConfig.from_dict(
                       data.get("fixed_set", {})),
                   output_dir=data.get("output_dir", "experiment"),
                   seed=seed)

    @classmethod
    def from_file(cls, path: PathLike) -> "ExperimentConfig":
        """
        Load a JSON config file

        :param      path:  The file
        :type       path:  PathLike

        :raises     ExperimentConfigError:  File missing or not JSON

        :returns:   The config
        :rtype:     ExperimentConfig
        """
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as e:
            raise ExperimentConfigError("cannot read config {}: {}".format(
                path, e))
        if not isinstance(data, dict):
            raise ExperimentConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "evaluation": self.evaluation.to_dict(),
            "fixed_set": self.fixed_set.to_dict(),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def method(self, name: str) -> TrainConfig:
        for config in self.methods:
            if config.name == name:
                return config
        raise ExperimentConfigError("no method named '{}'".format(name))


class AccuracyMatrix(object):
    """Accuracy per (method row, evaluation column)"""

    def __init__(self) -> None:
        self._cells: Dict[Tuple[str, str], float] = {}
        self.rows: List[str] = []
        self.columns: List[str] = []

    def set(self, row: str, column: str, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise HarnessError("accuracy {} outside [0, 1]".format(value))
        if row not in self.rows:
            self.rows.append(row)
        if column not in self.columns:
            self.columns.append(column)
        self._cells[(row, column)] = float(value)

    def get(self, row: str, column: str) -> float:
        return self._cells[(row, column)]

    def __contains__(self, key: Tuple[str, str]) -> bool:
        return key in self._cells

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), len(self.columns)

    def to_dict(self) -> Dict[str, Dict[str, str]]:
        """Cells as 6 decimal strings, the precision of the CSV"""
        return {row: {column: "{:.6f}".format(self._cells[(row, column)])
                      for column in self.columns
                      if (row, column) in self._cells}
                for row in self.rows}

    def to_csv(self, path: Optional[PathLike] = None) -> str:
        """
        CSV with columns method, column, accuracy

        :param      path:  Optional output file
        :type       path:  Optional[PathLike]

        :returns:   The CSV text
        :rtype:     str
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["method", "column", "accuracy"])
        for row, cells in self.to_dict().items():
            for column, value in cells.items():
                writer.writerow([row, column, value])
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: PathLike) -> "AccuracyMatrix":
        """
        Read a matrix CSV

        :param      path:  The file
        :type       path:  PathLike

        :returns:   The matrix
        :rtype:     AccuracyMatrix
        """
        matrix = cls()
        with open(path, newline="") as handle:
            for record in csv.DictReader(handle):
                matrix.set(record["method"], record["column"],
                           float(record["accuracy"]))
        return matrix

    def diff(self, other: "AccuracyMatrix") -> DeepDiff:
        """
        Structural difference at CSV precision

        :param      other:  The matrix to compare with
        :type       other:  AccuracyMatrix

        :returns:   Empty if both matrices print identically
        :rtype:     DeepDiff
        """
        return DeepDiff(self.to_dict(), other.to_dict())


@dataclass
class CurveRow:
    """One point of a robustness curve"""
    epsilon: float
    accuracy: float
    n: int
    fallback_count: int
    family: Optional[str] = None


def accuracy(net: Network, dataset: LabeledDataset) -> float:
    """
    Fraction of samples with argmax alpha equal to the label

    :param      net:      The network
    :type       net:      Network
    :param      dataset:  The dataset
    :type       dataset:  LabeledDataset

    :raises     DimensionMismatchError:  Dataset and network dims differ

    :returns:   The accuracy
    :rtype:     float
    """
    if dataset.dim != net.input_dim:
        raise DimensionMismatchError(
            "dataset has d={}, network expects {}".format(dataset.dim,
                                                          net.input_dim))
    return float(np.mean(predict(net, dataset.features) == dataset.labels))


def robustness_curve(net: Network,
                     family: AttackFamily,
                     norm: NormKind,
                     eps_grid: Sequence[float],
                     dataset: LabeledDataset) -> List[CurveRow]:
    """
    Accuracy on adversarial sets generated against net per epsilon

    :param      net:       The network
    :type       net:       Network
    :param      family:    The attack family
    :type       family:    AttackFamily
    :param      norm:      Norm measuring epsilon
    :type       norm:      NormKind
    :param      eps_grid:  Ascending nonnegative grid
    :type       eps_grid:  Sequence[float]
    :param      dataset:   The clean dataset
    :type       dataset:   LabeledDataset

    :returns:   One row per epsilon
    :rtype:     List[CurveRow]
    """
    rows = []
    for eps in validate_eps_grid(eps_grid):
        if eps == 0:
            rows.append(CurveRow(epsilon=eps,
                                 accuracy=accuracy(net, dataset),
                                 n=dataset.size,
                                 fallback_count=0,
                                 family=family.value))
            continue
        spec = PerturbationSpec(family=family, norm=norm, budget=eps)
        adversarial = generate_adversarial_set(net, dataset, spec)
        rows.append(CurveRow(
            epsilon=eps,
            accuracy=accuracy(net, adversarial),
            n=dataset.size,
            fallback_count=adversarial_info(adversarial).fallback_count,
            family=family.value))
    return rows


def compare_attacks(net: Network,
                    families: Sequence[AttackFamily],
                    norm: NormKind,
                    eps_grid: Sequence[float],
                    dataset: LabeledDataset) -> List[CurveRow]:
    """Robustness curves of several families for one network"""
    rows = []
    for family in families:
        rows.extend(robustness_curve(net, AttackFamily.from_name(family),
                                     norm, eps_grid, dataset))
    return rows


def curve_to_csv(rows: Sequence[CurveRow],
                 path: Optional[PathLike] = None,
                 with_family: bool = False) -> str:
    """
    CSV (epsilon, accuracy, n, fallback_count), optionally led by family

    :param      rows:         Curve rows
    :type       rows:         Sequence[CurveRow]
    :param      path:         Optional output file
    :type       path:         Optional[PathLike]
    :param      with_family:  Add the family column
    :type       with_family:  bool

    :returns:   The CSV text
    :rtype:     str
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["epsilon", "accuracy", "n", "fallback_count"]
    writer.writerow(["family"] + header if with_family else header)
    for row in rows:
        values = ["{:.6f}".format(row.epsilon), "{:.6f}".format(row.accuracy),
                  row.n, row.fallback_count]
        writer.writerow([row.family] + values if with_family else values)
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def representation_amplification(net: Network,
                                 dataset: LabeledDataset,
                                 spec: PerturbationSpec) -> float:
    """
    Mean ||N_rep(x + r) - N_rep(x)||_2 / ||r||_2 over the dataset

    :param      net:      Network with representation layers
    :type       net:      Network
    :param      dataset:  The samples
    :type       dataset:  LabeledDataset
    :param      spec:     Input space perturbation
    :type       spec:     PerturbationSpec

    :raises     SplitUndefinedError:  split_index is 0

    :returns:   The mean amplification, 0.0 if every r is zero
    :rtype:     float
    """
    if net.split_index < 1:
        raise SplitUndefinedError("network has no representation layers")
    X = dataset.features
    R, _ = perturb_batch(net, X, dataset.labels, spec)
    r_norms = np.linalg.norm(R, axis=1)
    live = r_norms > 0
    if not np.any(live):
        return 0.0
    delta = rep_forward(net, X[live] + R[live]) - rep_forward(net, X[live])
    return float(np.mean(np.linalg.norm(delta, axis=1) / r_norms[live]))


class ExperimentRunner(object):
    """Run an experiment and write every artifact"""

    def __init__(self,
                 config: ExperimentConfig,
                 logger: Optional[logging.Logger] = None,
                 show_progress: bool = False) -> None:
        """
        Init ExperimentRunner class

        :param      config:         The experiment
        :type       config:         ExperimentConfig
        :param      logger:         Logger object
        :type       logger:         Optional[logging.Logger]
        :param      show_progress:  Show progress bars
        :type       show_progress:  bool
        """
        if logger is None:
            logger = create_logger(__name__)
        self._logger = logger
        self._config = config
        self._show_progress = show_progress
        self._out = Path(config.output_dir)
        self.manifest = {}

    def _path(self, *parts: str) -> Path:
        path = self._out.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _train_rows(self,
                    train_set: LabeledDataset,
                    validation: LabeledDataset) -> Dict[str, Network]:
        trained = {}
        curves = self._config.evaluation.learning_curves
        for cfg in self._config.methods:
            self._logger.info("Training {}".format(cfg.name))
            try:
                net, report = train(train_set, cfg,
                                    logger=self._logger,
                                    validation=validation if curves else None,
                                    show_progress=self._show_progress)
            except Exception as e:
                self._logger.error("Training {} failed: {}".format(cfg.name,
                                                                   e))
                self.manifest["failures"][cfg.name] = "{}: {}".format(
                    type(e).__name__, e)
                continue
            save_model(net, self._path("models", cfg.name + ".model"))
            report.to_csv(self._path("reports", cfg.name + "_train.csv"))
            self.manifest["models"][cfg.name] = report.model_id
            trained[cfg.name] = net
        return trained

    def _fixed_set(self,
                   trained: Dict[str, Network],
                   validation: LabeledDataset) -> Optional[LabeledDataset]:
        fixed = self._config.fixed_set
        source = trained.get(fixed.source_method)
        if source is None:
            self._logger.warning("No fixed set, source {} did not train".
                                 format(fixed.source_method))
            return None
        spec = PerturbationSpec(family=fixed.family,
                                norm=self._config.evaluation.norm,
                                budget=fixed.epsilon)
        fixed_set = generate_adversarial_set(source, validation, spec,
                                             self._show_progress)
        digest = save_adversarial_set(fixed_set,
                                      self._path("sets", "fixed.data"))
        self.manifest["fixed_set"] = dict(fixed.to_dict(), sha256=digest)
        return fixed_set

    def run(self) -> AccuracyMatrix:
        """
        Train every row, evaluate every cell and write the artifacts

        :returns:   The accuracy matrix
        :rtype:     AccuracyMatrix
        """
        config = self._config
        evaluation = config.evaluation
        self.manifest = {
            "versions": {"advtrain": __version__,
                         "numpy": np.__version__,
                         "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "config": config.to_dict(),
            "seeds": {m.name: m.seed for m in config.methods},
            "models": {},
            "sets": {},
            "fixed_set": None,
            "failures": {},
            "amplification": {},
        }

        train_set, validation = config.dataset.load()
        self.manifest["validation_sha256"] = dataset_digest(validation)
        trained = self._train_rows(train_set, validation)
        fixed_set = self._fixed_set(trained, validation)

        matrix = AccuracyMatrix()
        for name, net in trained.items():
            matrix.set(name, VALIDATION_COLUMN, accuracy(net, validation))
            if fixed_set is not None:
                matrix.set(name, FIXED_COLUMN, accuracy(net, fixed_set))
            for family in evaluation.families:
                adversarial = generate_adversarial_set(
                    net, validation, evaluation.spec(family),
                    self._show_progress)
                set_name = "{}_{}.data".format(name, family.value)
                self.manifest["sets"][set_name] = save_adversarial_set(
                    adversarial, self._path("sets", set_name))
                matrix.set(name, family.column_name,
                           accuracy(net, adversarial))

            if name in evaluation.curve_methods:
                rows = compare_attacks(net, evaluation.families,
                                       evaluation.norm, evaluation.eps_grid,
                                       validation)
                curve_to_csv(rows, self._path("reports",
                                              name + "_curves.csv"),
                             with_family=True)
            if 1 <= net.split_index < net.layer_count:
                self.manifest["amplification"][name] = \
                    representation_amplification(
                        net, validation,
                        evaluation.spec(AttackFamily.ADV_LOSS))

        matrix.to_csv(self._path("matrix.csv"))
        self._path("manifest.json").write_text(
            json.dumps(self.manifest, indent=4, sort_keys=True))
        self._logger.info("Experiment written to {}".format(self._out))
        return matrix


def run_experiment(config: ExperimentConfig,
                   logger: Optional[logging.Logger] = None,
                   show_progress: bool = False) -> AccuracyMatrix:
    """
    Run an experiment, see ExperimentRunner

    :param      config:         The experiment
    :type       config:         ExperimentConfig
    :param      logger:         Logger object
    :type       logger:         Optional[logging.Logger]
    :param      show_progress:  Show progress bars
    :type       show_progress:  bool

    :returns:   The accuracy matrix
    :rtype:     AccuracyMatrix
    """
    return ExperimentRunner(config, logger, show_progress).run()


def _to_gray(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def write_pgm(path: PathLike, pixels: np.ndarray) -> None:
    """
    Write an 8 bit binary PGM (P5)

    :param      path:    The file
    :type       path:    PathLike
    :param      pixels:  uint8 image rows x cols
    :type       pixels:  np.ndarray
    """
    rows, cols = pixels.shape
    header = "P5\n{} {}\n255\n".format(cols, rows).encode("ascii")
    Path(path).write_bytes(header + pixels.astype(np.uint8).tobytes())


def read_pgm(path: PathLike) -> np.ndarray:
    """
    Read a PGM written by write_pgm

    :param      path:  The file
    :type       path:  PathLike

    :returns:   uint8 image rows x cols
    :rtype:     np.ndarray
    """
    content = Path(path).read_bytes()
    magic, size, maxval, payload = content.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise HarnessError("{} is not an 8 bit P5 image".format(path))
    cols, rows = (int(v) for v in size.split())
    return np.frombuffer(payload, dtype=np.uint8).reshape(rows, cols)


def dump_examples(net: Network,
                  dataset: LabeledDataset,
                  spec: PerturbationSpec,
                  count: int,
                  out_dir: PathLike) -> List[Path]:
    """
    Write original, perturbed and noise images of the first samples

    Images are shown in raw units (features * scale + shift) clipped to
    [0, 255] for display only. The noise image is 255 * |r| / max |r|.

    :param      net:      The targeted network
    :type       net:      Network
    :param      dataset:  Image shaped dataset
    :type       dataset:  LabeledDataset
    :param      spec:     The perturbation
    :type       spec:     PerturbationSpec
    :param      count:    Number of samples
    :type       count:    int
    :param      out_dir:  Output directory
    :type       out_dir:  PathLike

    :raises     NotImageShapedError:  No image shape in the dataset

    :returns:   Written image paths
    :rtype:     List[Path]
    """
    if dataset.image_shape is None:
        raise NotImageShapedError("{} has no image shape".format(
            dataset.source_tag or "dataset"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = min(int(count), dataset.size)
    X = dataset.features[:count]
    Y = dataset.labels[:count]
    R, _ = perturb_batch(net, X, Y, spec)
    perturbed = X + R
    before = predict(net, X)
    after = predict(net, perturbed)

    paths = []
    index = [["sample", "label", "predicted_original",
              "predicted_perturbed"]]
    for i in range(count):
        noise_scale = np.max(np.abs(R[i]))
        noise = 255.0 * np.abs(R[i]) / noise_scale if noise_scale > 0 \
            else np.zeros_like(R[i])
        images = {
            "original": X[i] * dataset.scale + dataset.shift,
            "perturbed": perturbed[i] * dataset.scale + dataset.shift,
            "noise": noise,
        }
        for kind, values in images.items():
            path = out / "sample_{:04d}_{}.pgm".format(i, kind)
            write_pgm(path, _to_gray(values).reshape(dataset.image_shape))
            paths.append(path)
        index.append([i, int(Y[i]), int(before[i]), int(after[i])])

    with open(out / "index.csv", "w", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerows(index)
    return paths
