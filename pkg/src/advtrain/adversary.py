#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Adversarial perturbations against a frozen network

Three attack families are available:

- ``adv-alpha``: minimal perturbation flipping the linearized softmax output,
  rescaled to the budget along the most damaging class direction
- ``adv-loss``: budget-constrained maximizer of the linearized loss
- ``adv-loss-sign``: sign of the loss gradient rescaled to the budget

All attacks run the network in inference mode, no dropout mask is applied.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from .core_math import (DenseMatrix, DenseVector, NormKind,
                        dual_norm_maximizer_rows, row_norms)
from .data_io import LabeledDataset, save_dataset
from .errors import AdvTrainError, ConfigError
from .net import (Network, forward, input_gradient, input_gradients,
                  input_jacobian, input_jacobians, model_id)

ATTACK_CHUNK = 256

logger = logging.getLogger(__name__)


class AdversaryError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class InvalidClassError(AdversaryError, ValueError):
    """Class index out of range or target equal to the true class."""
    pass


class AllDegenerateError(AdversaryError):
    """Every candidate class has the same Jacobian row as the true class."""
    pass


class ZeroGradientError(AdversaryError):
    """The loss gradient w.r.t. the input vanishes."""
    pass


class PerturbationConfigError(AdversaryError, ConfigError):
    """Invalid perturbation parameters."""
    pass


class AttackFamily(Enum):
    """Attack families, values are the CLI names"""
    ADV_ALPHA = "adv-alpha"
    ADV_LOSS = "adv-loss"
    ADV_LOSS_SIGN = "adv-loss-sign"

    @property
    def column_name(self) -> str:
        """
        Column label used in accuracy matrices

        :returns:   Adv_Alpha, Adv_Loss or Adv_Loss_Sign
        :rtype:     str
        """
        return {
            AttackFamily.ADV_ALPHA: "Adv_Alpha",
            AttackFamily.ADV_LOSS: "Adv_Loss",
            AttackFamily.ADV_LOSS_SIGN: "Adv_Loss_Sign",
        }[self]

    @classmethod
    def from_name(cls, name: Union[str, "AttackFamily"]) -> "AttackFamily":
        """
        Parse "adv-loss", "adv_loss" or "Adv_Loss" style names

        :param      name:  The name
        :type       name:  Union[str, AttackFamily]

        :raises     PerturbationConfigError:  Unknown family

        :returns:   The family
        :rtype:     AttackFamily
        """
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for family in cls:
            if family.value == key:
                return family
        raise PerturbationConfigError("Unknown attack family '{}'".format(
            name))


@dataclass(frozen=True)
class PerturbationSpec:
    """Attack family, constraint norm, budget and optional clip range"""
    family: AttackFamily = AttackFamily.ADV_LOSS
    norm: NormKind = NormKind.L2
    budget: float = 0.0
    clip: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "family",
                               AttackFamily.from_name(self.family))
            object.__setattr__(self, "norm", NormKind.from_name(self.norm))
            object.__setattr__(self, "budget", float(self.budget))
        except (ValueError, TypeError) as e:
            raise PerturbationConfigError(str(e))
        if not np.isfinite(self.budget) or self.budget < 0:
            raise PerturbationConfigError(
                "budget must be finite and >= 0, got {}".format(self.budget))
        if self.clip is not None:
            lo, hi = (float(v) for v in self.clip)
            if not lo < hi:
                raise PerturbationConfigError("clip range must be ascending")
            object.__setattr__(self, "clip", (lo, hi))

    def with_budget(self, budget: float) -> "PerturbationSpec":
        return PerturbationSpec(family=self.family,
                                norm=self.norm,
                                budget=budget,
                                clip=self.clip)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "norm": self.norm.value,
            "budget": self.budget,
            "clip": list(self.clip) if self.clip else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PerturbationSpec":
        unknown = set(data) - {"family", "norm", "budget", "clip"}
        if unknown:
            raise PerturbationConfigError(
                "Unknown perturbation keys: {}".format(sorted(unknown)))
        clip = data.get("clip")
        return cls(family=data.get("family", AttackFamily.ADV_LOSS.value),
                   norm=data.get("norm", NormKind.L2.value),
                   budget=data.get("budget", 0.0),
                   clip=tuple(clip) if clip else None)


@dataclass
class CandidatePerturbation:
    """
    Minimal perturbation reaching the linearized tie with one class

    ``direction`` is the unit-norm maximizer along H_j - H_y, None when
    H_j equals H_y.
    """
    target_class: int
    r: DenseVector
    r_norm: float
    direction: Optional[DenseVector] = None


@dataclass
class AdversarialResult:
    """Outcome of the minimal perturbation search for one sample"""
    r: DenseVector
    chosen_target: int
    candidates: List[CandidatePerturbation] = field(default_factory=list)
    already_misclassified: bool = False

    @property
    def chosen(self) -> CandidatePerturbation:
        for candidate in self.candidates:
            if candidate.target_class == self.chosen_target:
                return candidate
        raise AdversaryError("chosen target has no candidate")


@dataclass
class AdversarialSetInfo:
    """Sidecar metadata of a generated adversarial set"""
    family: str
    norm: str
    budget: float
    source_model_id: str
    fallback_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def _check_budget(c: float) -> None:
    if not np.isfinite(c) or c < 0:
        raise PerturbationConfigError(
            "budget must be finite and >= 0, got {}".format(c))


def per_class_min_perturbation(alpha: DenseVector,
                               H: DenseMatrix,
                               y: int,
                               j: int,
                               norm: NormKind) -> CandidatePerturbation:
    """
    Smallest r with alpha_j + H_j r = alpha_y + H_y r

    The norm of the result is (alpha_y - alpha_j) / ||H_j - H_y||_*.

    :param      alpha:  Softmax output (K,)
    :type       alpha:  DenseVector
    :param      H:      Jacobian of alpha w.r.t. the input (K, d)
    :type       H:      DenseMatrix
    :param      y:      The true class
    :type       y:      int
    :param      j:      The target class
    :type       j:      int
    :param      norm:   Norm measuring r
    :type       norm:   NormKind

    :raises     InvalidClassError:  y or j out of range, or j equal to y

    :returns:   The candidate, zero when alpha_j >= alpha_y, infinite norm
                when H_j = H_y
    :rtype:     CandidatePerturbation
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    k = alpha.shape[0]
    if H.ndim != 2 or H.shape[0] != k:
        raise InvalidClassError("H must have one row per class")
    if not (0 <= y < k and 0 <= j < k) or j == y:
        raise InvalidClassError(
            "need distinct classes in [0, {}), got y={} j={}".format(k, y, j))

    diff = H[j] - H[y]
    gap = alpha[y] - alpha[j]
    degenerate = not np.any(diff)
    direction = None
    if not degenerate:
        direction = dual_norm_maximizer_rows(diff[np.newaxis, :], norm,
                                             1.0)[0][0]

    if gap <= 0:
        return CandidatePerturbation(target_class=j,
                                     r=np.zeros_like(diff),
                                     r_norm=0.0,
                                     direction=direction)
    if degenerate:
        return CandidatePerturbation(target_class=j,
                                     r=np.zeros_like(diff),
                                     r_norm=float("inf"),
                                     direction=None)

    r_norm = gap / row_norms(diff[np.newaxis, :], norm.dual)[0]
    r = dual_norm_maximizer_rows(diff[np.newaxis, :], norm, r_norm)[0][0]
    return CandidatePerturbation(target_class=j,
                                 r=r,
                                 r_norm=float(r_norm),
                                 direction=direction)


def min_adversarial_perturbation(net: Network,
                                 x: DenseVector,
                                 y: int,
                                 norm: NormKind) -> AdversarialResult:
    """
    Minimal perturbation flipping the linearized prediction

    Builds every candidate j != y and picks the one with the smallest norm,
    the lowest class index wins ties.

    :param      net:   The network
    :type       net:   Network
    :param      x:     The sample (d,)
    :type       x:     DenseVector
    :param      y:     The true class
    :type       y:     int
    :param      norm:  Norm measuring r
    :type       norm:  NormKind

    :raises     AllDegenerateError:  Every candidate has an infinite norm
    :raises     InvalidClassError:   Fewer than two classes or y out of range

    :returns:   The result, zero r if x is already misclassified
    :rtype:     AdversarialResult
    """
    if net.class_count < 2:
        raise InvalidClassError("a minimal perturbation needs at least two "
                                "classes, got {}".format(net.class_count))
    alpha = forward(net, x).alpha[0]
    if not 0 <= y < alpha.shape[0]:
        raise InvalidClassError("class {} out of range".format(y))
    H = input_jacobian(net, x)
    candidates = [per_class_min_perturbation(alpha, H, y, j, norm)
                  for j in range(alpha.shape[0]) if j != y]

    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate.r_norm < best.r_norm:
            best = candidate
    if np.isinf(best.r_norm):
        raise AllDegenerateError("every class shares the Jacobian row of "
                                 "class {}".format(y))

    misclassified = int(np.argmax(alpha)) != y
    r = np.zeros_like(best.r) if misclassified else best.r
    return AdversarialResult(r=r,
                             chosen_target=best.target_class,
                             candidates=candidates,
                             already_misclassified=misclassified)


def loss_based_perturbation(net: Network,
                            x: DenseVector,
                            y: int,
                            norm: NormKind,
                            c: float,
                            strict: bool = False) -> DenseVector:
    """
    Budget-c maximizer of the linearized loss

    Linf gives the fast gradient sign step c * sign(grad).

    :param      net:     The network
    :type       net:     Network
    :param      x:       The sample
    :type       x:       DenseVector
    :param      y:       The true class
    :type       y:       int
    :param      norm:    Constraint norm
    :type       norm:    NormKind
    :param      c:       The budget
    :type       c:       float
    :param      strict:  Raise instead of returning zero on a zero gradient
    :type       strict:  bool

    :raises     ZeroGradientError:  Zero gradient and strict is set

    :returns:   The perturbation
    :rtype:     DenseVector
    """
    _check_budget(c)
    x = np.asarray(x, dtype=np.float64)
    if c == 0:
        return np.zeros_like(x)
    grad = input_gradient(net, x, y)
    if not np.any(grad):
        if strict:
            raise ZeroGradientError("loss gradient vanishes at this input")
        logger.warning("Zero loss gradient, returning zero perturbation")
        return np.zeros_like(x)
    return dual_norm_maximizer_rows(grad[np.newaxis, :], norm, c)[0][0]


def sign_perturbation(net: Network,
                      x: DenseVector,
                      y: int,
                      norm: NormKind,
                      c: float) -> DenseVector:
    """
    sign(grad) rescaled to norm c

    :param      net:   The network
    :type       net:   Network
    :param      x:     The sample
    :type       x:     DenseVector
    :param      y:     The true class
    :type       y:     int
    :param      norm:  Norm in which the magnitude is measured
    :type       norm:  NormKind
    :param      c:     The budget
    :type       c:     float

    :returns:   The perturbation, zero on a zero gradient
    :rtype:     DenseVector
    """
    _check_budget(c)
    x = np.asarray(x, dtype=np.float64)
    if c == 0:
        return np.zeros_like(x)
    s = np.sign(input_gradient(net, x, y))
    if not np.any(s):
        logger.warning("Zero loss gradient, returning zero perturbation")
        return np.zeros_like(x)
    return c * s / row_norms(s[np.newaxis, :], norm)[0]


def misclassification_based_perturbation(net: Network,
                                         x: DenseVector,
                                         y: int,
                                         norm: NormKind,
                                         c: float) -> DenseVector:
    """
    Minimal perturbation direction rescaled to exactly norm c

    Falls back to the loss based perturbation if the chosen candidate has
    no direction.

    :param      net:   The network
    :type       net:   Network
    :param      x:     The sample
    :type       x:     DenseVector
    :param      y:     The true class
    :type       y:     int
    :param      norm:  Constraint norm
    :type       norm:  NormKind
    :param      c:     The budget
    :type       c:     float

    :returns:   The perturbation
    :rtype:     DenseVector
    """
    _check_budget(c)
    x = np.asarray(x, dtype=np.float64)
    if c == 0:
        return np.zeros_like(x)
    result = min_adversarial_perturbation(net, x, y, norm)
    direction = result.chosen.direction
    if direction is None:
        logger.debug("No direction for target {}, using the loss".format(
            result.chosen_target))
        return loss_based_perturbation(net, x, y, norm, c)
    return c * direction


def _alpha_directions(net: Network,
                      X: np.ndarray,
                      Y: np.ndarray,
                      norm: NormKind) -> Tuple[np.ndarray, np.ndarray]:
    """H_I - H_y of the minimal candidate per row and a no-direction mask"""
    alpha = forward(net, X).alpha
    jac = input_jacobians(net, X)
    rows = np.arange(X.shape[0])

    diff = jac - jac[rows, Y][:, np.newaxis, :]
    gap = alpha[rows, Y][:, np.newaxis] - alpha
    dual = row_norms(diff, norm.dual)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.where(gap <= 0, 0.0,
                        np.where(dual > 0, gap / dual, np.inf))
    cand[rows, Y] = np.inf

    chosen = np.argmin(cand, axis=1)
    directions = diff[rows, chosen]
    undefined = np.isinf(cand[rows, chosen]) | ~np.any(directions, axis=1)
    return directions, undefined


def perturb_batch(net: Network,
                  X: np.ndarray,
                  Y: np.ndarray,
                  spec: PerturbationSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Perturbations of norm spec.budget for every row of a batch

    Rows without an alpha direction fall back to the loss maximizer, rows
    with a zero loss gradient get a zero perturbation.

    :param      net:   The frozen network
    :type       net:   Network
    :param      X:     Inputs (n, d)
    :type       X:     np.ndarray
    :param      Y:     Labels (n,)
    :type       Y:     np.ndarray
    :param      spec:  The perturbation spec
    :type       spec:  PerturbationSpec

    :returns:   Perturbations (n, d) and the mask of rows that fell back
    :rtype:     Tuple[np.ndarray, np.ndarray]
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y).astype(np.int64)
    n = X.shape[0]
    c = spec.budget
    if c == 0:
        return np.zeros_like(X), np.zeros(n, dtype=bool)

    R = np.zeros_like(X)
    fallback = np.zeros(n, dtype=bool)
    for start in range(0, n, ATTACK_CHUNK):
        stop = min(start + ATTACK_CHUNK, n)
        Xc, Yc = X[start:stop], Y[start:stop]

        if spec.family is AttackFamily.ADV_ALPHA:
            directions, undefined = _alpha_directions(net, Xc, Yc, spec.norm)
            Rc, _ = dual_norm_maximizer_rows(directions, spec.norm, c)
            if np.any(undefined):
                grads = input_gradients(net, Xc[undefined], Yc[undefined])
                Rc[undefined], _ = dual_norm_maximizer_rows(grads,
                                                            spec.norm, c)
            mask = undefined
        elif spec.family is AttackFamily.ADV_LOSS:
            grads = input_gradients(net, Xc, Yc)
            Rc, mask = dual_norm_maximizer_rows(grads, spec.norm, c)
        else:
            signs = np.sign(input_gradients(net, Xc, Yc))
            norms = row_norms(signs, spec.norm)
            mask = norms == 0
            Rc = np.zeros_like(signs)
            Rc[~mask] = c * signs[~mask] / norms[~mask][:, np.newaxis]

        R[start:stop] = Rc
        fallback[start:stop] = mask

    if np.any(fallback):
        logger.debug("{} of {} samples fell back".format(
            int(fallback.sum()), n))
    return R, fallback


def generate_adversarial_set(net: Network,
                             dataset: LabeledDataset,
                             spec: PerturbationSpec,
                             show_progress: bool = False) -> LabeledDataset:
    """
    Adversarial copy {(x_i + r_i, y_i)} of a dataset

    The sidecar metadata is stored under ``attributes["adversarial"]``.

    :param      net:            The targeted network
    :type       net:            Network
    :param      dataset:        The clean dataset
    :type       dataset:        LabeledDataset
    :param      spec:           The perturbation spec
    :type       spec:           PerturbationSpec
    :param      show_progress:  Show a progress bar
    :type       show_progress:  bool

    :returns:   The adversarial dataset with the original labels
    :rtype:     LabeledDataset
    """
    if dataset.dim != net.input_dim:
        raise AdversaryError("dataset has d={}, network expects {}".format(
            dataset.dim, net.input_dim))

    features = dataset.features.copy()
    fallback_count = 0
    chunks = range(0, dataset.size, ATTACK_CHUNK)
    for start in tqdm(chunks,
                      desc=spec.family.column_name,
                      disable=not show_progress):
        stop = min(start + ATTACK_CHUNK, dataset.size)
        R, fallback = perturb_batch(net,
                                    dataset.features[start:stop],
                                    dataset.labels[start:stop],
                                    spec)
        features[start:stop] += R
        fallback_count += int(fallback.sum())

    if spec.clip is not None:
        features = np.clip(features, spec.clip[0], spec.clip[1])

    info = AdversarialSetInfo(family=spec.family.value,
                              norm=spec.norm.value,
                              budget=spec.budget,
                              source_model_id=model_id(net),
                              fallback_count=fallback_count)
    if fallback_count:
        logger.info("{}: {} of {} samples used a fallback".format(
            spec.family.column_name, fallback_count, dataset.size))

    out = dataset.with_features(features, source_tag="{}:{}:{}:{:g}".format(
        dataset.source_tag, spec.family.value, spec.norm.value,
        spec.budget))
    out.attributes["adversarial"] = info.to_dict()
    return out


def adversarial_info(dataset: LabeledDataset) -> AdversarialSetInfo:
    """
    Sidecar metadata of a generated set

    :param      dataset:  Output of generate_adversarial_set
    :type       dataset:  LabeledDataset

    :raises     AdversaryError:  The dataset was not generated here

    :returns:   The metadata
    :rtype:     AdversarialSetInfo
    """
    try:
        return AdversarialSetInfo(**dataset.attributes["adversarial"])
    except (KeyError, TypeError):
        raise AdversaryError("dataset carries no adversarial metadata")


def save_adversarial_set(dataset: LabeledDataset,
                         path: Union[str, Path]) -> str:
    """
    Write the set and its ``.meta.json`` sidecar

    :param      dataset:  Output of generate_adversarial_set
    :type       dataset:  LabeledDataset
    :param      path:     The dataset path
    :type       path:     Union[str, Path]

    :returns:   SHA-256 hex digest of the dataset file
    :rtype:     str
    """
    path = Path(path)
    info = adversarial_info(dataset)
    digest = save_dataset(dataset, path)
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(json.dumps(info.to_dict(), indent=4, sort_keys=True))
    return digest
