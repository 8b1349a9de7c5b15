#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Robust binary logistic regression

With the logistic loss l(z) = log(1 + exp(-z)) the worst case over
||r|| <= c of l(y <w, x + r>) has the closed form l(y <w, x> - c ||w||_*).
The gap to the clean loss is the induced regularizer R_z(w).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import expit

from .core_math import (DenseVector, NormKind, as_vector, dual_norm,
                        dual_norm_maximizer, row_norms, seeded_rng)
from .data_io import LabeledDataset
from .errors import AdvTrainError, ConfigError

logger = logging.getLogger(__name__)

TraceRow = Tuple[int, float, float]


class LogRegError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class LogRegConfigError(LogRegError, ConfigError):
    """Invalid gradient descent or regularizer parameters."""
    pass


@dataclass(frozen=True)
class BinarySample:
    """Sample with label -1 or +1"""
    x: DenseVector
    y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        if self.y not in (-1, 1):
            raise LogRegError("label must be -1 or +1, got {}".format(self.y))


@dataclass
class RobustLogRegModel:
    """Weights w, budget c and the norm constraining r"""
    w: DenseVector
    c: float
    norm: NormKind = NormKind.L2

    def __post_init__(self) -> None:
        self.w = as_vector(self.w, "w")
        self.norm = NormKind.from_name(self.norm)
        if not np.isfinite(self.c) or self.c < 0:
            raise LogRegConfigError("c must be finite and >= 0")


@dataclass
class GDConfig:
    """Full batch gradient descent settings"""
    steps: int = 20000
    learning_rate: float = 0.5
    log_every: Optional[int] = None

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise LogRegConfigError("steps must be >= 0")
        if not self.learning_rate > 0:
            raise LogRegConfigError("learning_rate must be > 0")
        if self.log_every is None:
            self.log_every = max(1, self.steps // 200)
        if self.log_every < 1:
            raise LogRegConfigError("log_every must be >= 1")


def _arrays(data: Sequence[BinarySample]) -> Tuple[np.ndarray, np.ndarray]:
    if not data:
        raise LogRegError("data must not be empty")
    X = np.vstack([sample.x for sample in data])
    y = np.array([sample.y for sample in data], dtype=np.float64)
    return X, y


def logistic_loss(z) -> np.ndarray:
    """log(1 + exp(-z)), overflow safe"""
    return np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def binary_samples(dataset: LabeledDataset) -> List[BinarySample]:
    """
    Map classes {0, 1} to labels {-1, +1}

    :param      dataset:  A two class dataset
    :type       dataset:  LabeledDataset

    :raises     LogRegError:  More than two classes

    :returns:   The samples
    :rtype:     List[BinarySample]
    """
    if dataset.class_count != 2:
        raise LogRegError("need a two class dataset, got K={}".format(
            dataset.class_count))
    return [BinarySample(x=x, y=int(2 * label - 1))
            for x, label in zip(dataset.features, dataset.labels)]


def robust_objective(model: RobustLogRegModel,
                     data: Sequence[BinarySample]) -> float:
    """
    Sum of worst case logistic losses

    :param      model:  The model
    :type       model:  RobustLogRegModel
    :param      data:   The samples
    :type       data:   Sequence[BinarySample]

    :returns:   sum_i l(y_i <w, x_i> - c ||w||_*)
    :rtype:     float
    """
    X, y = _arrays(data)
    margins = y * (X @ model.w) - model.c * dual_norm(model.w, model.norm)
    return float(np.sum(logistic_loss(margins)))


def _norm_subgradient(w: np.ndarray, norm: NormKind) -> np.ndarray:
    if not np.any(w):
        return np.zeros_like(w)
    return dual_norm_maximizer(w, norm, 1.0)


def robust_gradient(model: RobustLogRegModel,
                    data: Sequence[BinarySample]) -> DenseVector:
    """
    Gradient (or the selected subgradient) of robust_objective

    At nonsmooth points of ||w||_* the maximizer of <w, u> over the unit
    ball of the constraint norm is used, the zero vector at w = 0.

    :param      model:  The model
    :type       model:  RobustLogRegModel
    :param      data:   The samples
    :type       data:   Sequence[BinarySample]

    :returns:   sum_i sigma(Q_i) (-y_i x_i + c s) with
                Q_i = -y_i <w, x_i> + c ||w||_*
    :rtype:     DenseVector
    """
    X, y = _arrays(data)
    w = model.w
    q = -y * (X @ w) + model.c * dual_norm(w, model.norm)
    weights = expit(q)
    s = _norm_subgradient(w, model.norm)
    return (weights[:, np.newaxis] *
            (-y[:, np.newaxis] * X + model.c * s)).sum(axis=0)


def induced_regularizer(w: DenseVector,
                        sample: BinarySample,
                        c: float,
                        norm: NormKind) -> float:
    """
    R_z(w), worst case minus clean logistic loss, always >= 0

    :param      w:       The weights
    :type       w:       DenseVector
    :param      sample:  The sample z
    :type       sample:  BinarySample
    :param      c:       The budget
    :type       c:       float
    :param      norm:    Constraint norm
    :type       norm:    NormKind

    :returns:   The regularizer value
    :rtype:     float
    """
    w = as_vector(w, "w")
    clean = sample.y * float(w @ sample.x)
    worst = clean - c * dual_norm(w, norm)
    return float(logistic_loss(worst) - logistic_loss(clean))


def regularizer_branch(w, sample: BinarySample, c: float) -> np.ndarray:
    """
    Smooth branch l(y x w - c w) - l(y x w) of the scalar R_z

    Equals R_z on w >= 0. For c = 0.5 and z = (1, 1) the second derivative
    at 0 is -3/16.

    :param      w:       Scalar weights, any shape
    :type       w:       Union[float, np.ndarray]
    :param      sample:  A one dimensional sample
    :type       sample:  BinarySample
    :param      c:       The budget
    :type       c:       float

    :returns:   Branch values shaped like w
    :rtype:     np.ndarray
    """
    if sample.x.shape != (1, ):
        raise LogRegError("the scalar branch needs a one dimensional sample")
    w = np.asarray(w, dtype=np.float64)
    clean = sample.y * sample.x[0] * w
    return logistic_loss(clean - c * w) - logistic_loss(clean)


def _scalar_regularizer(w: np.ndarray, sample: BinarySample,
                        c: float) -> np.ndarray:
    clean = sample.y * sample.x[0] * w
    return logistic_loss(clean - c * np.abs(w)) - logistic_loss(clean)


def find_nonconvexity_witness(sample: BinarySample,
                              c: float,
                              norm: NormKind = NormKind.L2,
                              lo: float = -10.0,
                              hi: float = 10.0,
                              points: int = 401
                              ) -> Tuple[float, float, float]:
    """
    Grid scan for the largest midpoint convexity violation of scalar R_z

    Every norm reduces to |w| in one dimension.

    :param      sample:  A one dimensional sample
    :type       sample:  BinarySample
    :param      c:       The budget
    :type       c:       float
    :param      norm:    Constraint norm
    :type       norm:    NormKind
    :param      lo:      Lower end of the scan
    :type       lo:      float
    :param      hi:      Upper end of the scan
    :type       hi:      float
    :param      points:  Grid size
    :type       points:  int

    :returns:   w1, w2 and R((w1 + w2) / 2) - (R(w1) + R(w2)) / 2
    :rtype:     Tuple[float, float, float]
    """
    if sample.x.shape != (1, ):
        raise LogRegError("the witness scan needs a one dimensional sample")
    if points < 2 or not lo < hi:
        raise LogRegConfigError("need points >= 2 and lo < hi")
    NormKind.from_name(norm)
    grid = np.linspace(lo, hi, points)
    values = _scalar_regularizer(grid, sample, c)
    w1, w2 = np.meshgrid(grid, grid, indexing="ij")
    v1, v2 = np.meshgrid(values, values, indexing="ij")
    violation = _scalar_regularizer((w1 + w2) / 2.0, sample, c) - \
        (v1 + v2) / 2.0
    i, j = np.unravel_index(np.argmax(violation), violation.shape)
    return float(grid[i]), float(grid[j]), float(violation[i, j])


def worst_case_loss_sampled(model: RobustLogRegModel,
                            sample: BinarySample,
                            trials: int = 10000,
                            seed: int = 0) -> float:
    """
    Largest l(y <w, x + r>) over random r on the sphere ||r|| = c

    :param      model:   The model
    :type       model:   RobustLogRegModel
    :param      sample:  The sample
    :type       sample:  BinarySample
    :param      trials:  Number of random directions
    :type       trials:  int
    :param      seed:    The seed
    :type       seed:    int

    :returns:   The sampled maximum
    :rtype:     float
    """
    rng = seeded_rng(seed)
    directions = rng.standard_normal((trials, sample.x.shape[0]))
    norms = row_norms(directions, model.norm)
    directions = directions[norms > 0] / norms[norms > 0][:, np.newaxis]
    r = model.c * directions
    z = sample.y * ((sample.x + r) @ model.w)
    clean = logistic_loss(sample.y * float(sample.x @ model.w))
    return float(max(np.max(logistic_loss(z)), clean))


def fit(data: Sequence[BinarySample],
        c: float,
        norm: NormKind = NormKind.L2,
        gd_config: Optional[GDConfig] = None
        ) -> Tuple[RobustLogRegModel, List[TraceRow]]:
    """
    Gradient descent on the mean robust objective from w = 0

    :param      data:       The samples
    :type       data:       Sequence[BinarySample]
    :param      c:          The budget
    :type       c:          float
    :param      norm:       Constraint norm
    :type       norm:       NormKind
    :param      gd_config:  Step count, learning rate and log interval
    :type       gd_config:  Optional[GDConfig]

    :returns:   Final model and trace rows (step, objective, ||w||_2)
    :rtype:     Tuple[RobustLogRegModel, List[TraceRow]]
    """
    if gd_config is None:
        gd_config = GDConfig()
    X, _ = _arrays(data)
    n = X.shape[0]
    model = RobustLogRegModel(w=np.zeros(X.shape[1]), c=c, norm=norm)

    def record(step: int) -> TraceRow:
        return (step, robust_objective(model, data),
                float(np.linalg.norm(model.w)))

    trace = [record(0)]
    for step in range(1, gd_config.steps + 1):
        model.w = model.w - gd_config.learning_rate / n * \
            robust_gradient(model, data)
        if step % gd_config.log_every == 0 or step == gd_config.steps:
            trace.append(record(step))
    logger.debug("fit c={} {}: final |w| {:.6f}".format(
        c, model.norm.value, trace[-1][2]))
    return model, trace


def _tail(trace: Sequence[TraceRow], fraction: float) -> np.ndarray:
    if not 0 < fraction <= 1:
        raise LogRegConfigError("tail fraction must be in (0, 1]")
    norms = np.array([row[2] for row in trace])
    count = max(2, int(np.ceil(len(norms) * fraction)))
    return norms[-count:]


def is_strictly_increasing(trace: Sequence[TraceRow],
                           tail_fraction: float = 0.9) -> bool:
    """
    Whether ||w|| strictly increases over the tail of the trace

    :param      trace:          Output of fit
    :type       trace:          Sequence[TraceRow]
    :param      tail_fraction:  Fraction of logged rows checked
    :type       tail_fraction:  float

    :returns:   True if every step increases the norm
    :rtype:     bool
    """
    return bool(np.all(np.diff(_tail(trace, tail_fraction)) > 0))


def is_bounded(trace: Sequence[TraceRow],
               tail_fraction: float = 0.1,
               rel_tol: float = 1e-3) -> bool:
    """
    Whether ||w|| has settled over the tail of the trace

    :param      trace:          Output of fit
    :type       trace:          Sequence[TraceRow]
    :param      tail_fraction:  Fraction of logged rows checked
    :type       tail_fraction:  float
    :param      rel_tol:        Allowed relative spread over the tail
    :type       rel_tol:        float

    :returns:   True if the spread is within rel_tol of the final norm
    :rtype:     bool
    """
    tail = _tail(trace, tail_fraction)
    scale = max(abs(tail[-1]), 1e-12)
    return bool((tail.max() - tail.min()) / scale <= rel_tol)


def _grid_directions(d: int, resolution: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    # Fibonacci sphere
    k = np.arange(resolution) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / resolution)
    azimuth = np.pi * (1.0 + 5.0 ** 0.5) * k
    return np.column_stack([np.cos(azimuth) * np.sin(polar),
                            np.sin(azimuth) * np.sin(polar),
                            np.cos(polar)])


def grid_margin(data: Sequence[BinarySample],
                resolution: int = 3600) -> float:
    """
    Best min_i y_i <u, x_i> over a grid of unit directions u, d <= 3

    :param      data:        The samples
    :type       data:        Sequence[BinarySample]
    :param      resolution:  Directions in the grid
    :type       resolution:  int

    :returns:   The best grid margin, may be negative
    :rtype:     float
    """
    X, y = _arrays(data)
    if X.shape[1] > 3:
        raise LogRegError("direction grid needs d <= 3")
    directions = _grid_directions(X.shape[1], resolution)
    margins = (y[:, np.newaxis] * (X @ directions.T)).min(axis=0)
    return float(margins.max())


def dataset_margin(data: Sequence[BinarySample]) -> float:
    """
    Largest min_i y_i <w, x_i> over unit L2 vectors w

    Separability through the origin is decided by a linear program, the
    margin itself by a hard margin SVM solved with SLSQP. For d <= 3 a
    direction grid guards against a poorly converged solve.

    :param      data:  The samples
    :type       data:  Sequence[BinarySample]

    :returns:   The margin, 0.0 if the data is not separable
    :rtype:     float
    """
    X, y = _arrays(data)
    A = y[:, np.newaxis] * X
    d = X.shape[1]

    feasibility = linprog(c=np.zeros(d),
                          A_ub=-A,
                          b_ub=-np.ones(A.shape[0]),
                          bounds=[(None, None)] * d,
                          method="highs")
    if feasibility.status != 0:
        return 0.0

    solution = minimize(fun=lambda w: 0.5 * float(w @ w),
                        x0=feasibility.x,
                        jac=lambda w: w,
                        constraints=[{"type": "ineq",
                                      "fun": lambda w: A @ w - 1.0,
                                      "jac": lambda w: A}],
                        method="SLSQP",
                        options={"ftol": 1e-12, "maxiter": 500})
    candidates = [0.0]
    for w in (solution.x, feasibility.x):
        norm = np.linalg.norm(w)
        if norm > 0:
            candidates.append(float((A @ w).min() / norm))
    if d <= 3:
        candidates.append(grid_margin(data))
    return max(candidates)
