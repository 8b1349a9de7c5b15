#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Dense linear algebra helpers, norms and their duals

Vectors and matrices are plain float64 numpy arrays. Everything here is a
pure function of its inputs; the only stateful object handed out is the
seeded random generator, which is owned by exactly one task.
"""

from enum import Enum
from typing import Tuple, Union

import numpy as np

from .errors import AdvTrainError

DenseVector = np.ndarray
DenseMatrix = np.ndarray
SeededRng = np.random.Generator


class CoreMathError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class DimensionMismatchError(CoreMathError, ValueError):
    """Operand shapes do not chain."""
    pass


class ZeroVectorError(CoreMathError, ValueError):
    """The dual norm maximizer of the zero vector is undefined."""
    pass


class NonFiniteError(CoreMathError, ValueError):
    """An operand contains NaN or Inf."""
    pass


class NormKind(Enum):
    """Supported vector norms"""
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @property
    def dual(self) -> "NormKind":
        """
        Get the dual norm kind

        :returns:   Linf for L1, L2 for L2, L1 for Linf
        :rtype:     NormKind
        """
        return _DUAL[self]

    @property
    def order(self) -> Union[int, float]:
        """
        Get the ``ord`` value understood by ``numpy.linalg.norm``

        :returns:   1, 2 or inf
        :rtype:     Union[int, float]
        """
        return _ORDER[self]

    @classmethod
    def from_name(cls, name: Union[str, "NormKind"]) -> "NormKind":
        """
        Parse a norm name like "l2", "L2", "linf" or "inf"

        :param      name:  The name
        :type       name:  Union[str, NormKind]

        :raises     ValueError:  Unknown norm name

        :returns:   The norm kind
        :rtype:     NormKind
        """
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"inf": "linf", "l_inf": "linf", "max": "linf"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError("Unknown norm '{}'".format(name))


_DUAL = {
    NormKind.L1: NormKind.LINF,
    NormKind.L2: NormKind.L2,
    NormKind.LINF: NormKind.L1,
}

_ORDER = {
    NormKind.L1: 1,
    NormKind.L2: 2,
    NormKind.LINF: np.inf,
}


def as_vector(data, name: str = "vector") -> DenseVector:
    """
    Convert data into a finite, nonempty float64 vector

    :param      data:  Array like input
    :type       data:  Any
    :param      name:  Name used in error messages
    :type       name:  str

    :raises     DimensionMismatchError:  Input is not a nonempty 1-D array
    :raises     NonFiniteError:          Input contains NaN or Inf

    :returns:   The vector
    :rtype:     DenseVector
    """
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatchError(
            "{} must be a nonempty 1-D array, got shape {}".format(
                name, v.shape))
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("{} contains non finite entries".format(name))
    return v


def as_matrix(data, name: str = "matrix") -> DenseMatrix:
    """
    Convert data into a finite, nonempty row-major float64 matrix

    :param      data:  Array like input
    :type       data:  Any
    :param      name:  Name used in error messages
    :type       name:  str

    :raises     DimensionMismatchError:  Input is not a nonempty 2-D array
    :raises     NonFiniteError:          Input contains NaN or Inf

    :returns:   The matrix
    :rtype:     DenseMatrix
    """
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatchError(
            "{} must be a nonempty 2-D array, got shape {}".format(
                name, m.shape))
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("{} contains non finite entries".format(name))
    return m


def vector_norm(v: DenseVector, kind: NormKind) -> float:
    """
    Compute the norm of a vector

    :param      v:     The vector
    :type       v:     DenseVector
    :param      kind:  The norm kind
    :type       kind:  NormKind

    :returns:   ||v|| in the given norm
    :rtype:     float
    """
    return float(np.linalg.norm(as_vector(v), ord=kind.order))


def dual_norm(v: DenseVector, kind: NormKind) -> float:
    """
    Compute the dual norm ||v||_* = max_{||u|| <= 1} <v, u>

    :param      v:     The vector
    :type       v:     DenseVector
    :param      kind:  The primal norm kind
    :type       kind:  NormKind

    :returns:   The norm of v in the dual of kind
    :rtype:     float
    """
    return vector_norm(v, kind.dual)


def row_norms(m: DenseMatrix, kind: NormKind) -> np.ndarray:
    """
    Compute the norm of every row of a matrix

    :param      m:     The matrix, any leading shape, norms over last axis
    :type       m:     np.ndarray
    :param      kind:  The norm kind
    :type       kind:  NormKind

    :returns:   Row norms
    :rtype:     np.ndarray
    """
    m = np.asarray(m, dtype=np.float64)
    if kind is NormKind.L2:
        return np.sqrt(np.sum(m * m, axis=-1))
    if kind is NormKind.L1:
        return np.sum(np.abs(m), axis=-1)
    return np.max(np.abs(m), axis=-1)


def dual_norm_maximizer(v: DenseVector,
                        kind: NormKind,
                        budget: float) -> DenseVector:
    """
    Find r with ||r|| = budget maximizing <v, r>

    L2 gives budget * v / ||v||_2, Linf gives budget * sign(v) with
    sign(0) = 0 and L1 puts the whole budget on the lowest index of maximal
    magnitude.

    :param      v:       The direction to align with
    :type       v:       DenseVector
    :param      kind:    Norm constraining r
    :type       kind:    NormKind
    :param      budget:  Required norm of r, nonnegative
    :type       budget:  float

    :raises     ZeroVectorError:  v is the zero vector
    :raises     ValueError:       budget is negative or not finite

    :returns:   The maximizer r
    :rtype:     DenseVector
    """
    v = as_vector(v)
    if not np.isfinite(budget) or budget < 0:
        raise ValueError("budget must be finite and >= 0, got {}".format(
            budget))
    if not np.any(v):
        raise ZeroVectorError("dual norm maximizer of the zero vector")

    r, _ = dual_norm_maximizer_rows(v[np.newaxis, :], kind, budget)
    return r[0]


def dual_norm_maximizer_rows(
        v: DenseMatrix,
        kind: NormKind,
        budgets: Union[float, np.ndarray]) -> Tuple[DenseMatrix, np.ndarray]:
    """
    Row-wise dual norm maximizer

    :param      v:        Directions, one per row
    :type       v:        DenseMatrix
    :param      kind:     Norm constraining each result row
    :type       kind:     NormKind
    :param      budgets:  Scalar or per-row budgets
    :type       budgets:  Union[float, np.ndarray]

    :returns:   Maximizers (zero rows where v is zero) and the zero row mask
    :rtype:     Tuple[DenseMatrix, np.ndarray]
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    budgets = np.broadcast_to(np.asarray(budgets, dtype=np.float64), (n,))
    zero = ~np.any(v != 0.0, axis=1)
    r = np.zeros_like(v)
    live = ~zero
    if not np.any(live):
        return r, zero

    vl = v[live]
    bl = budgets[live][:, np.newaxis]
    if kind is NormKind.L2:
        r[live] = bl * (vl / row_norms(vl, NormKind.L2)[:, np.newaxis])
    elif kind is NormKind.LINF:
        r[live] = bl * np.sign(vl)
    else:
        k = np.argmax(np.abs(vl), axis=1)
        rows = np.arange(vl.shape[0])
        out = np.zeros_like(vl)
        out[rows, k] = bl[:, 0] * np.sign(vl[rows, k])
        r[live] = out
    return r, zero


def matvec(m: DenseMatrix, v: DenseVector) -> DenseVector:
    """
    Matrix-vector product

    :param      m:  The matrix
    :type       m:  DenseMatrix
    :param      v:  The vector
    :type       v:  DenseVector

    :raises     DimensionMismatchError:  m.cols differs from v.len

    :returns:   m @ v
    :rtype:     DenseVector
    """
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise DimensionMismatchError(
            "matrix has {} columns, vector has {} entries".format(
                m.shape[1], v.shape[0]))
    return m @ v


def seeded_rng(seed: int) -> SeededRng:
    """
    Create a PCG64 generator from a 64 bit seed

    :param      seed:  The seed
    :type       seed:  int

    :raises     ValueError:  seed outside [0, 2**64)

    :returns:   The generator
    :rtype:     SeededRng
    """
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must be a 64 bit unsigned integer")
    return np.random.Generator(np.random.PCG64(seed))
