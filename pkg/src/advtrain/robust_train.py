#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Training regimes and the gradient exchange check for the inner maximum

Normal and Dropout train on clean samples. LWA trains on pseudo-samples
x + r only, Goodfellow mixes clean and pseudo-sample gradients and LWA_Rep
perturbs the output of the representation stack instead of the input.
"""

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from .adversary import (AttackFamily, PerturbationSpec,
                        generate_adversarial_set,
                        misclassification_based_perturbation,
                        per_class_min_perturbation, perturb_batch,
                        sign_perturbation)
from .core_math import NormKind, dual_norm_maximizer_rows, seeded_rng
from .data_io import LabeledDataset
from .errors import AdvTrainError, ConfigError
from .logger import create_logger
from .net import (Network, ParamGradients, SplitUndefinedError, backward,
                  cla_forward, forward, input_gradient, input_jacobian, loss,
                  model_id, predict, rep_forward, sample_dropout_mask,
                  sgd_step, split_backward)

# relative gap under which two alpha candidates count as tied
TIE_TOLERANCE = 1e-6
KINK_TOLERANCE = 1e-3


class TrainError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class TrainConfigError(TrainError, ConfigError):
    """Invalid training configuration."""
    pass


class TrainMethod(Enum):
    """Training regimes, values are the config and CLI names"""
    NORMAL = "normal"
    DROPOUT = "dropout"
    GOODFELLOW = "goodfellow"
    LWA = "lwa"
    LWA_REP = "lwa_rep"

    @property
    def display_name(self) -> str:
        return {
            TrainMethod.NORMAL: "Normal",
            TrainMethod.DROPOUT: "Dropout",
            TrainMethod.GOODFELLOW: "Goodfellow",
            TrainMethod.LWA: "LWA",
            TrainMethod.LWA_REP: "LWA_Rep",
        }[self]

    @property
    def is_adversarial(self) -> bool:
        return self in (TrainMethod.GOODFELLOW,
                        TrainMethod.LWA,
                        TrainMethod.LWA_REP)

    @classmethod
    def from_name(cls, name: Union[str, "TrainMethod"]) -> "TrainMethod":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        for method in cls:
            if method.value == key:
                return method
        raise TrainConfigError("Unknown training method '{}'".format(name))


# default train-time attack of every adversarial method
DEFAULT_PERTURBATION = PerturbationSpec(family=AttackFamily.ADV_LOSS,
                                        norm=NormKind.L2,
                                        budget=1.5)

_CONFIG_KEYS = ("method", "name", "hidden_dims", "epochs", "batch_size",
                "learning_rate", "momentum", "seed", "dropout_rate",
                "split_index", "perturbation", "mix_alpha")


@dataclass
class TrainConfig:
    """
    Hyperparameters of one training run

    Adversarial methods built with for_method share DEFAULT_PERTURBATION,
    so Goodfellow with mix_alpha = 0 follows the LWA trajectory.
    """
    method: TrainMethod = TrainMethod.NORMAL
    name: Optional[str] = None
    hidden_dims: Tuple[int, ...] = (100, 100)
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    dropout_rate: float = 0.0
    split_index: int = 0
    perturbation: Optional[PerturbationSpec] = None
    mix_alpha: float = 0.5

    def __post_init__(self) -> None:
        self.method = TrainMethod.from_name(self.method)
        if self.name is None:
            self.name = self.method.display_name
        try:
            self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        except (TypeError, ValueError):
            raise TrainConfigError("hidden_dims must be a list of sizes")
        if isinstance(self.perturbation, dict):
            self.perturbation = PerturbationSpec.from_dict(self.perturbation)

        problems = []
        if any(h < 1 for h in self.hidden_dims):
            problems.append("hidden sizes must be >= 1")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.learning_rate < 0:
            problems.append("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            problems.append("momentum must be in [0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be a 64 bit unsigned integer")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append("dropout_rate must be in [0, 1)")
        if self.method is TrainMethod.NORMAL and self.dropout_rate != 0:
            problems.append("Normal training uses no dropout")
        if self.method is TrainMethod.DROPOUT and self.dropout_rate == 0:
            problems.append("Dropout training needs dropout_rate > 0")
        if not 0 <= self.split_index <= len(self.hidden_dims) + 1:
            problems.append("split_index outside the layer range")
        if self.method.is_adversarial and self.perturbation is None:
            problems.append("{} needs a perturbation".format(self.name))
        if not self.method.is_adversarial and self.perturbation is not None:
            problems.append("{} takes no perturbation".format(self.name))
        if not 0.0 <= self.mix_alpha <= 1.0:
            problems.append("mix_alpha must be in [0, 1]")
        if problems:
            raise TrainConfigError("; ".join(problems))

    @classmethod
    def for_method(cls, method: Union[str, TrainMethod],
                   **kwargs) -> "TrainConfig":
        """
        Config with the default perturbation of an adversarial method

        :param      method:  The method
        :type       method:  Union[str, TrainMethod]
        :param      kwargs:  Other TrainConfig fields
        :type       kwargs:  dict

        :returns:   The config
        :rtype:     TrainConfig
        """
        method = TrainMethod.from_name(method)
        if method.is_adversarial and kwargs.get("perturbation") is None:
            kwargs["perturbation"] = DEFAULT_PERTURBATION
        if method is TrainMethod.DROPOUT and not kwargs.get("dropout_rate"):
            kwargs["dropout_rate"] = 0.5
        return cls(method=method, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(_CONFIG_KEYS)
        if unknown:
            raise TrainConfigError("Unknown training keys: {}".format(
                sorted(unknown)))
        if "method" not in data:
            raise TrainConfigError("training entry without a method")
        kwargs = {key: data[key] for key in _CONFIG_KEYS[1:] if key in data}
        return cls.for_method(data["method"], **kwargs)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "name": self.name,
            "hidden_dims": list(self.hidden_dims),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "seed": self.seed,
            "dropout_rate": self.dropout_rate,
            "split_index": self.split_index,
            "perturbation": self.perturbation.to_dict()
            if self.perturbation else None,
            "mix_alpha": self.mix_alpha,
        }


@dataclass
class EpochRecord:
    """Statistics of one epoch"""
    epoch: int
    pseudo_loss_mean: float
    clean_train_acc: float
    fallback_count: int
    seconds: float
    validation_acc: Optional[float] = None
    adversarial_validation_acc: Optional[float] = None


@dataclass
class TrainReport:
    """Per-epoch records of a training run"""
    method: str
    records: List[EpochRecord] = field(default_factory=list)
    model_id: str = ""

    @property
    def fallback_count(self) -> int:
        return sum(record.fallback_count for record in self.records)

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        """
        CSV with one row per epoch, floats with 6 decimals

        Validation columns are appended when a validation set was used.

        :param      path:  Optional output file
        :type       path:  Optional[Union[str, Path]]

        :returns:   The CSV text
        :rtype:     str
        """
        columns = ["epoch", "pseudo_loss_mean", "clean_train_acc",
                   "fallback_count", "seconds"]
        with_validation = any(r.validation_acc is not None
                              for r in self.records)
        if with_validation:
            columns += ["validation_acc", "adversarial_validation_acc"]

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for record in self.records:
            row = [record.epoch,
                   "{:.6f}".format(record.pseudo_loss_mean),
                   "{:.6f}".format(record.clean_train_acc),
                   record.fallback_count,
                   "{:.6f}".format(record.seconds)]
            if with_validation:
                row += [_fmt_optional(record.validation_acc),
                        _fmt_optional(record.adversarial_validation_acc)]
            writer.writerow(row)

        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt_optional(value: Optional[float]) -> str:
    return "" if value is None else "{:.6f}".format(value)


def _accuracy(net: Network, dataset: LabeledDataset) -> float:
    return float(np.mean(predict(net, dataset.features) == dataset.labels))


class RobustTrainer(object):
    """Mini-batch momentum SGD for every training regime"""

    def __init__(self,
                 config: TrainConfig,
                 logger: Optional[logging.Logger] = None,
                 validation: Optional[LabeledDataset] = None,
                 validation_spec: Optional[PerturbationSpec] = None,
                 show_progress: bool = False) -> None:
        """
        Init RobustTrainer class

        :param      config:           The training configuration
        :type       config:           TrainConfig
        :param      logger:           Logger object
        :type       logger:           Optional[logging.Logger]
        :param      validation:       Set evaluated after every epoch
        :type       validation:       Optional[LabeledDataset]
        :param      validation_spec:  Attack for the adversarial validation
                                      accuracy, defaults to the training one
        :type       validation_spec:  Optional[PerturbationSpec]
        :param      show_progress:    Show a progress bar over epochs
        :type       show_progress:    bool
        """
        if logger is None:
            logger = create_logger(__name__)
        self._logger = logger
        self._config = config
        self._validation = validation
        self._validation_spec = validation_spec or config.perturbation
        self._show_progress = show_progress

    @property
    def config(self) -> TrainConfig:
        return self._config

    def initial_network(self, dataset: LabeledDataset) -> Network:
        """
        Freshly initialised network for the dataset

        :param      dataset:  The training set
        :type       dataset:  LabeledDataset

        :returns:   The network
        :rtype:     Network
        """
        cfg = self._config
        return Network.create(input_dim=dataset.dim,
                              hidden_dims=cfg.hidden_dims,
                              class_count=dataset.class_count,
                              split_index=cfg.split_index,
                              dropout_rate=cfg.dropout_rate,
                              seed=cfg.seed)

    def _pseudo_inputs(self,
                       net: Network,
                       X: np.ndarray,
                       Y: np.ndarray) -> Tuple[np.ndarray, int]:
        spec = self._config.perturbation
        if spec is None or spec.budget == 0:
            return X, 0
        R, fallback = perturb_batch(net, X, Y, spec)
        X_hat = X + R
        if spec.clip is not None:
            X_hat = np.clip(X_hat, spec.clip[0], spec.clip[1])
        return X_hat, int(fallback.sum())

    def _batch_gradients(self,
                         net: Network,
                         X: np.ndarray,
                         Y: np.ndarray,
                         mask) -> Tuple[ParamGradients, float, int]:
        """Gradients, loss and fallback count of one batch"""
        method = self._config.method

        if method in (TrainMethod.NORMAL, TrainMethod.DROPOUT):
            trace = forward(net, X, mask)
            return backward(net, trace, Y), loss(trace, Y), 0

        if method is TrainMethod.LWA:
            X_hat, fallbacks = self._pseudo_inputs(net, X, Y)
            trace = forward(net, X_hat, mask)
            return backward(net, trace, Y), loss(trace, Y), fallbacks

        if method is TrainMethod.GOODFELLOW:
            mix = self._config.mix_alpha
            spec = self._config.perturbation
            if mix == 1.0 or spec.budget == 0:
                trace = forward(net, X, mask)
                return backward(net, trace, Y), loss(trace, Y), 0
            X_hat, fallbacks = self._pseudo_inputs(net, X, Y)
            adv_trace = forward(net, X_hat, mask)
            adv_grads = backward(net, adv_trace, Y)
            if mix == 0.0:
                return adv_grads, loss(adv_trace, Y), fallbacks
            trace = forward(net, X, mask)
            grads = backward(net, trace, Y).scaled(mix) + \
                adv_grads.scaled(1.0 - mix)
            mixed = mix * loss(trace, Y) + (1.0 - mix) * loss(adv_trace, Y)
            return grads, mixed, fallbacks

        rep = rep_forward(net, X, mask)
        rep_hat, fallbacks = self._pseudo_inputs(net.classifier_view(),
                                                 rep, Y)
        cla_trace = cla_forward(net, rep_hat, mask)
        grads = split_backward(net, X, cla_trace, Y, mask)
        return grads, loss(cla_trace, Y), fallbacks

    def fit(self,
            dataset: LabeledDataset,
            net: Optional[Network] = None) -> Tuple[Network, TrainReport]:
        """
        Train a network on the dataset

        :param      dataset:  The training set
        :type       dataset:  LabeledDataset
        :param      net:      Network to continue from, a new one if None
        :type       net:      Optional[Network]

        :raises     SplitUndefinedError:  LWA_Rep without representation layers

        :returns:   The trained network and the report
        :rtype:     Tuple[Network, TrainReport]
        """
        cfg = self._config
        if net is None:
            net = self.initial_network(dataset)
        if dataset.dim != net.input_dim or \
                dataset.class_count != net.class_count:
            raise TrainError("dataset does not match the network shape")
        if cfg.method is TrainMethod.LWA_REP and \
                not 1 <= net.split_index < net.layer_count:
            raise SplitUndefinedError(
                "LWA_Rep needs 1 <= split_index < {}, got {}".format(
                    net.layer_count, net.split_index))

        rng = seeded_rng((cfg.seed + 1) % 2 ** 64)
        report = TrainReport(method=cfg.name)
        velocity = None
        n = dataset.size

        epochs = tqdm(range(1, cfg.epochs + 1),
                      desc=cfg.name,
                      disable=not self._show_progress)
        for epoch in epochs:
            started = time.perf_counter()
            order = rng.permutation(n)
            loss_sum = 0.0
            fallbacks = 0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                X = dataset.features[idx]
                Y = dataset.labels[idx]
                mask = sample_dropout_mask(net, rng, idx.shape[0])
                grads, batch_loss, batch_fallbacks = \
                    self._batch_gradients(net, X, Y, mask)
                velocity = sgd_step(net, grads, cfg.learning_rate,
                                    cfg.momentum, velocity)
                loss_sum += batch_loss * idx.shape[0]
                fallbacks += batch_fallbacks

            record = EpochRecord(epoch=epoch,
                                 pseudo_loss_mean=loss_sum / n,
                                 clean_train_acc=_accuracy(net, dataset),
                                 fallback_count=fallbacks,
                                 seconds=time.perf_counter() - started)
            if not np.isfinite(record.pseudo_loss_mean):
                raise TrainError("loss diverged in epoch {}".format(epoch))
            self._evaluate_validation(net, record)
            report.records.append(record)
            self._logger.info(
                "{} epoch {}/{}: loss {:.4f}, train acc {:.4f}, "
                "fallbacks {}".format(cfg.name, epoch, cfg.epochs,
                                      record.pseudo_loss_mean,
                                      record.clean_train_acc, fallbacks))

        report.model_id = model_id(net)
        return net, report

    def _evaluate_validation(self, net: Network, record: EpochRecord) -> None:
        if self._validation is None:
            return
        record.validation_acc = _accuracy(net, self._validation)
        spec = self._validation_spec
        if spec is None:
            return
        adversarial = generate_adversarial_set(net, self._validation, spec)
        record.adversarial_validation_acc = _accuracy(net, adversarial)


def _run(dataset: LabeledDataset,
         config: TrainConfig,
         allowed: Iterable[TrainMethod],
         logger: Optional[logging.Logger],
         validation: Optional[LabeledDataset],
         show_progress: bool) -> Tuple[Network, TrainReport]:
    if config.method not in allowed:
        raise TrainConfigError("{} is not one of {}".format(
            config.method.display_name,
            ", ".join(m.display_name for m in allowed)))
    trainer = RobustTrainer(config=config,
                            logger=logger,
                            validation=validation,
                            show_progress=show_progress)
    return trainer.fit(dataset)


def train_normal(dataset: LabeledDataset,
                 config: TrainConfig,
                 logger: Optional[logging.Logger] = None,
                 validation: Optional[LabeledDataset] = None,
                 show_progress: bool = False) -> Tuple[Network, TrainReport]:
    """
    Clean cross entropy training, with dropout if the rate is positive

    :param      dataset:        The training set
    :type       dataset:        LabeledDataset
    :param      config:         Normal or Dropout config
    :type       config:         TrainConfig
    :param      logger:         Logger object
    :type       logger:         Optional[logging.Logger]
    :param      validation:     Optional validation set
    :type       validation:     Optional[LabeledDataset]
    :param      show_progress:  Show a progress bar
    :type       show_progress:  bool

    :raises     TrainConfigError:  Wrong method

    :returns:   The network and the report
    :rtype:     Tuple[Network, TrainReport]
    """
    return _run(dataset, config, (TrainMethod.NORMAL, TrainMethod.DROPOUT),
                logger, validation, show_progress)


def train_lwa(dataset: LabeledDataset,
              config: TrainConfig,
              logger: Optional[logging.Logger] = None,
              validation: Optional[LabeledDataset] = None,
              show_progress: bool = False) -> Tuple[Network, TrainReport]:
    """
    Training on pseudo-samples x + r of norm c only

    :returns:   The network and the report
    :rtype:     Tuple[Network, TrainReport]
    """
    return _run(dataset, config, (TrainMethod.LWA, ), logger, validation,
                show_progress)


def train_goodfellow(dataset: LabeledDataset,
                     config: TrainConfig,
                     logger: Optional[logging.Logger] = None,
                     validation: Optional[LabeledDataset] = None,
                     show_progress: bool = False
                     ) -> Tuple[Network, TrainReport]:
    """
    Gradient mix_alpha * clean + (1 - mix_alpha) * pseudo-sample

    :returns:   The network and the report
    :rtype:     Tuple[Network, TrainReport]
    """
    return _run(dataset, config, (TrainMethod.GOODFELLOW, ), logger,
                validation, show_progress)


def train_lwa_rep(dataset: LabeledDataset,
                  config: TrainConfig,
                  logger: Optional[logging.Logger] = None,
                  validation: Optional[LabeledDataset] = None,
                  show_progress: bool = False) -> Tuple[Network, TrainReport]:
    """
    Training with perturbed representations x~ + r

    N_cla is updated at the perturbed representation, N_rep with the
    gradient w.r.t. x~ at the perturbed point chained through N_rep at the
    original input.

    :raises     SplitUndefinedError:  split_index is 0

    :returns:   The network and the report
    :rtype:     Tuple[Network, TrainReport]
    """
    return _run(dataset, config, (TrainMethod.LWA_REP, ), logger,
                validation, show_progress)


def train(dataset: LabeledDataset,
          config: TrainConfig,
          logger: Optional[logging.Logger] = None,
          validation: Optional[LabeledDataset] = None,
          show_progress: bool = False) -> Tuple[Network, TrainReport]:
    """Train with the regime named by ``config.method``"""
    return _run(dataset, config, tuple(TrainMethod), logger, validation,
                show_progress)


@dataclass(frozen=True)
class ParameterProbe:
    """A single scalar parameter of a network"""
    layer: int
    kind: str
    index: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("weight", "bias"):
            raise TrainError("probe kind must be weight or bias")

    def _array(self, net: Network) -> np.ndarray:
        layer = net.layers[self.layer]
        return layer.weight if self.kind == "weight" else layer.bias

    def get(self, net: Network) -> float:
        return float(self._array(net)[self.index])

    def set(self, net: Network, value: float) -> None:
        self._array(net)[self.index] = value

    def select(self, grads: ParamGradients) -> float:
        arrays = grads.weights if self.kind == "weight" else grads.biases
        return float(arrays[self.layer][self.index])

    @classmethod
    def random(cls, net: Network,
               rng: np.random.Generator) -> "ParameterProbe":
        """
        Uniformly drawn scalar parameter

        :param      net:  The network
        :type       net:  Network
        :param      rng:  The generator
        :type       rng:  np.random.Generator

        :returns:   The probe
        :rtype:     ParameterProbe
        """
        pick = int(rng.integers(net.parameter_count))
        for i, layer in enumerate(net.layers):
            if pick < layer.weight.size:
                return cls(layer=i, kind="weight", index=tuple(
                    int(v) for v in np.unravel_index(pick,
                                                     layer.weight.shape)))
            pick -= layer.weight.size
            if pick < layer.bias.size:
                return cls(layer=i, kind="bias", index=(pick, ))
            pick -= layer.bias.size
        raise TrainError("parameter index out of range")


@dataclass
class DanskinReport:
    """Analytic vs. finite difference derivative of the inner maximum"""
    analytic: float
    numeric: float
    abs_err: float
    smooth: bool = True

    def passed(self, tolerance: float = 1e-3) -> bool:
        return self.smooth and self.abs_err <= tolerance


def inner_maximizer(net: Network,
                    x: np.ndarray,
                    y: int,
                    spec: PerturbationSpec,
                    max_iter: int = 200,
                    tolerance: float = 1e-12) -> Tuple[np.ndarray, bool]:
    """
    Perturbation realising the inner maximum of the loss

    For ``adv-loss`` the one step maximizer is refined by the fixed point
    iteration r <- argmax_{||u|| <= c} <grad loss(x + r), u> until it stops
    moving. Other families return their one step perturbation.

    :param      net:        The network
    :type       net:        Network
    :param      x:          The sample
    :type       x:          np.ndarray
    :param      y:          The label
    :type       y:          int
    :param      spec:       The perturbation spec
    :type       spec:       PerturbationSpec
    :param      max_iter:   Iteration limit
    :type       max_iter:   int
    :param      tolerance:  Max-norm change counted as converged
    :type       tolerance:  float

    :returns:   The perturbation and whether the iteration converged
    :rtype:     Tuple[np.ndarray, bool]
    """
    x = np.asarray(x, dtype=np.float64)
    c = spec.budget
    if c == 0:
        return np.zeros_like(x), True
    if spec.family is AttackFamily.ADV_ALPHA:
        return misclassification_based_perturbation(net, x, y, spec.norm,
                                                    c), True
    if spec.family is AttackFamily.ADV_LOSS_SIGN:
        return sign_perturbation(net, x, y, spec.norm, c), True

    r = np.zeros_like(x)
    for _ in range(max_iter):
        grad = input_gradient(net, x + r, y)
        update, zero = dual_norm_maximizer_rows(grad[np.newaxis, :],
                                                spec.norm, c)
        if zero[0]:
            return r, False
        step = np.max(np.abs(update[0] - r))
        r = update[0]
        if step <= tolerance * max(1.0, c):
            return r, True
    return r, False


def _has_kink(net: Network, x: np.ndarray) -> bool:
    trace = forward(net, x)
    for pre in trace.pre_activations[:-1]:
        if np.any(np.abs(pre) < KINK_TOLERANCE):
            return True
    return False


def _alpha_tied(net: Network, x: np.ndarray, y: int,
                norm: NormKind) -> bool:
    alpha = forward(net, x).alpha[0]
    H = input_jacobian(net, x)
    norms = sorted(per_class_min_perturbation(alpha, H, y, j, norm).r_norm
                   for j in range(alpha.shape[0]) if j != y)
    if len(norms) < 2 or not np.isfinite(norms[1]):
        return False
    return norms[1] - norms[0] <= TIE_TOLERANCE * max(norms[1], 1e-300)


def danskin_gradient_check(net: Network,
                           x: np.ndarray,
                           y: int,
                           spec: PerturbationSpec,
                           probe: ParameterProbe,
                           step: float = 1e-5) -> DanskinReport:
    """
    Compare d loss / d theta at the fixed maximizer with a central finite
    difference of theta -> loss(x + r*(theta))

    Points are flagged nonsmooth when the inner maximizer did not converge,
    a ReLU pre-activation is within 1e-3 of its kink or the two smallest
    alpha candidates are tied.

    :param      net:    The network, restored after the check
    :type       net:    Network
    :param      x:      The sample
    :type       x:      np.ndarray
    :param      y:      The label
    :type       y:      int
    :param      spec:   The inner maximization spec
    :type       spec:   PerturbationSpec
    :param      probe:  The scalar parameter theta
    :type       probe:  ParameterProbe
    :param      step:   Finite difference step
    :type       step:   float

    :returns:   The report
    :rtype:     DanskinReport
    """
    x = np.asarray(x, dtype=np.float64)
    r_star, converged = inner_maximizer(net, x, y, spec)
    point = x + r_star
    grads = backward(net, forward(net, point), np.array([y]))
    analytic = probe.select(grads)

    smooth = converged and not _has_kink(net, point)
    if spec.family is AttackFamily.ADV_ALPHA and spec.budget > 0:
        smooth = smooth and not _alpha_tied(net, x, y, spec.norm)

    theta = probe.get(net)
    values = []
    try:
        for shifted in (theta + step, theta - step):
            probe.set(net, shifted)
            r, ok = inner_maximizer(net, x, y, spec)
            smooth = smooth and ok
            values.append(loss(forward(net, x + r), np.array([y])))
    finally:
        probe.set(net, theta)
    numeric = (values[0] - values[1]) / (2.0 * step)

    return DanskinReport(analytic=analytic,
                         numeric=numeric,
                         abs_err=abs(analytic - numeric),
                         smooth=smooth)


def danskin_pass_rate(reports: Iterable[DanskinReport],
                      tolerance: float = 1e-3) -> float:
    """
    Fraction of smooth reports within tolerance

    :param      reports:    The reports
    :type       reports:    Iterable[DanskinReport]
    :param      tolerance:  Absolute error tolerance
    :type       tolerance:  float

    :returns:   Pass rate over smooth reports, 1.0 if none is smooth
    :rtype:     float
    """
    smooth = [r for r in reports if r.smooth]
    if not smooth:
        return 1.0
    return sum(r.abs_err <= tolerance for r in smooth) / len(smooth)
