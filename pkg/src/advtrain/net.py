#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Feedforward softmax classifier with exact backpropagation

A Network is a stack of dense layers with ReLU hidden activations and a
softmax head. Layers below ``split_index`` form the representation stack
N_rep, the remaining layers plus the softmax form the classification stack
N_cla. All batch arrays are row-major with one sample per row.
"""

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp, softmax

from .core_math import DimensionMismatchError, SeededRng, seeded_rng
from .errors import AdvTrainError

MODEL_HEADER = "ADVTRAIN-MODEL v1"
# softmax entries stay strictly positive even when exp underflows
ALPHA_FLOOR = np.finfo(np.float64).tiny

DropoutMask = List[np.ndarray]


class NetworkError(AdvTrainError):
    """Base class for exceptions in this module."""
    pass


class ClassIndexError(NetworkError, IndexError):
    """A label is outside [0, K)."""
    pass


class SplitUndefinedError(NetworkError):
    """The operation needs a representation stack but split_index is 0."""
    pass


class ModelFormatError(NetworkError):
    """A model file is malformed."""
    pass


class Activation(Enum):
    """Layer activation"""
    RELU = "relu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of a dense layer"""
    in_dim: int
    out_dim: int
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise NetworkError("layer dims must be >= 1, got {}x{}".format(
                self.in_dim, self.out_dim))


@dataclass
class Layer:
    """Dense layer parameters, weight is out_dim x in_dim"""
    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ForwardTrace:
    """
    Intermediate values of a forward pass over a batch

    ``activations[0]`` is the input of layer ``start_layer`` and
    ``activations[i + 1]`` the output (after activation and dropout) of layer
    ``start_layer + i``.
    """
    start_layer: int
    pre_activations: List[np.ndarray]
    activations: List[np.ndarray]
    logits: np.ndarray
    alpha: np.ndarray
    representation: Optional[np.ndarray]
    mask: Optional[DropoutMask] = None

    @property
    def predictions(self) -> np.ndarray:
        """Predicted class per row, lowest index on exact ties"""
        return np.argmax(self.alpha, axis=1)


@dataclass
class ParamGradients:
    """Gradients shaped like the network parameters, in layer order"""
    weights: List[np.ndarray] = field(default_factory=list)
    biases: List[np.ndarray] = field(default_factory=list)

    def scaled(self, factor: float) -> "ParamGradients":
        return ParamGradients(weights=[factor * g for g in self.weights],
                              biases=[factor * g for g in self.biases])

    def __add__(self, other: "ParamGradients") -> "ParamGradients":
        return ParamGradients(
            weights=[a + b for a, b in zip(self.weights, other.weights)],
            biases=[a + b for a, b in zip(self.biases, other.biases)])


class Network(object):
    """Layered MLP with softmax head"""

    def __init__(self,
                 layers: List[Layer],
                 split_index: int = 0,
                 dropout_rate: float = 0.0,
                 seed: Optional[int] = None) -> None:
        """
        Init Network class

        :param      layers:        The layers, input side first
        :type       layers:        List[Layer]
        :param      split_index:   Number of layers forming N_rep
        :type       split_index:   int
        :param      dropout_rate:  Hidden unit drop probability in [0, 1)
        :type       dropout_rate:  float
        :param      seed:          Initialization seed, kept as metadata
        :type       seed:          Optional[int]
        """
        if not layers:
            raise NetworkError("a network needs at least one layer")
        for lower, upper in zip(layers[:-1], layers[1:]):
            if lower.spec.out_dim != upper.spec.in_dim:
                raise DimensionMismatchError(
                    "layer dims do not chain: {} -> {}".format(
                        lower.spec.out_dim, upper.spec.in_dim))
        for layer in layers:
            shape = (layer.spec.out_dim, layer.spec.in_dim)
            if layer.weight.shape != shape or \
                    layer.bias.shape != (layer.spec.out_dim, ):
                raise DimensionMismatchError(
                    "parameters do not match layer spec {}".format(shape))
        if not 0 <= split_index <= len(layers):
            raise NetworkError("split_index {} outside [0, {}]".format(
                split_index, len(layers)))
        if not 0.0 <= dropout_rate < 1.0:
            raise NetworkError("dropout_rate must be in [0, 1)")

        self.layers = layers
        self.split_index = split_index
        self.dropout_rate = float(dropout_rate)
        self.seed = seed

    @classmethod
    def create(cls,
               input_dim: int,
               hidden_dims: Sequence[int],
               class_count: int,
               split_index: int = 0,
               dropout_rate: float = 0.0,
               seed: int = 0) -> "Network":
        """
        Create a network with He initialised weights and zero biases

        :param      input_dim:     The input dimension d
        :type       input_dim:     int
        :param      hidden_dims:   Hidden layer sizes, e.g. (100, 100)
        :type       hidden_dims:   Sequence[int]
        :param      class_count:   Number of classes K
        :type       class_count:   int
        :param      split_index:   Number of layers forming N_rep
        :type       split_index:   int
        :param      dropout_rate:  Hidden unit drop probability
        :type       dropout_rate:  float
        :param      seed:          The initialization seed
        :type       seed:          int

        :returns:   The network
        :rtype:     Network
        """
        rng = seeded_rng(seed)
        dims = [int(input_dim)] + [int(h) for h in hidden_dims] + \
            [int(class_count)]
        layers = []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            last = i == len(dims) - 2
            spec = LayerSpec(in_dim=d_in,
                             out_dim=d_out,
                             activation=Activation.IDENTITY if last
                             else Activation.RELU)
            weight = rng.standard_normal((d_out, d_in)) * np.sqrt(2.0 / d_in)
            layers.append(Layer(spec=spec,
                                weight=weight,
                                bias=np.zeros(d_out)))
        return cls(layers=layers,
                   split_index=split_index,
                   dropout_rate=dropout_rate,
                   seed=seed)

    @property
    def input_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def class_count(self) -> int:
        return self.layers[-1].spec.out_dim

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def parameter_count(self) -> int:
        return sum(layer.weight.size + layer.bias.size
                   for layer in self.layers)

    def copy(self) -> "Network":
        """
        Deep copy of the network

        :returns:   Independent network with equal parameters
        :rtype:     Network
        """
        layers = [Layer(spec=layer.spec,
                        weight=layer.weight.copy(),
                        bias=layer.bias.copy()) for layer in self.layers]
        return Network(layers=layers,
                       split_index=self.split_index,
                       dropout_rate=self.dropout_rate,
                       seed=self.seed)

    def classifier_view(self) -> "Network":
        """
        The N_cla stack as a network sharing this network's parameters

        :raises     SplitUndefinedError:  split_index is 0 or covers all layers

        :returns:   Network whose input is the representation x~
        :rtype:     Network
        """
        if not 1 <= self.split_index < self.layer_count:
            raise SplitUndefinedError(
                "split_index {} leaves no classification layers".format(
                    self.split_index))
        return Network(layers=self.layers[self.split_index:],
                       split_index=0,
                       dropout_rate=self.dropout_rate,
                       seed=self.seed)


def _as_batch(x: np.ndarray, width: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise DimensionMismatchError(
            "expected input width {}, got shape {}".format(width, x.shape))
    return x, single


def _labels(y, rows: int, class_count: int) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y))
    if y.shape != (rows, ):
        raise DimensionMismatchError(
            "expected {} labels, got shape {}".format(rows, y.shape))
    if np.any(y < 0) or np.any(y >= class_count):
        raise ClassIndexError("labels must be in [0, {})".format(
            class_count))
    return y.astype(np.int64)


def _one_hot(y: np.ndarray, class_count: int) -> np.ndarray:
    out = np.zeros((y.shape[0], class_count))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def _run_layers(net: Network,
                x: np.ndarray,
                start: int,
                stop: int,
                mask: Optional[DropoutMask]
                ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    pres = []
    acts = [x]
    h = x
    last = net.layer_count - 1
    for i in range(start, stop):
        layer = net.layers[i]
        z = h @ layer.weight.T + layer.bias
        pres.append(z)
        if layer.spec.activation is Activation.RELU:
            h = np.maximum(z, 0.0)
        else:
            h = z
        if mask is not None and i < last:
            h = h * mask[i]
        acts.append(h)
    return pres, acts


def _trace(net: Network,
           x: np.ndarray,
           start: int,
           mask: Optional[DropoutMask]) -> ForwardTrace:
    pres, acts = _run_layers(net, x, start, net.layer_count, mask)
    logits = acts[-1]
    representation = None
    if start <= net.split_index:
        representation = acts[net.split_index - start]
    return ForwardTrace(start_layer=start,
                        pre_activations=pres,
                        activations=acts,
                        logits=logits,
                        alpha=np.maximum(softmax(logits, axis=1),
                                         ALPHA_FLOOR),
                        representation=representation,
                        mask=mask)


def _backprop(net: Network,
              start: int,
              pres: List[np.ndarray],
              acts: List[np.ndarray],
              mask: Optional[DropoutMask],
              delta: np.ndarray,
              need_params: bool = True
              ) -> Tuple[List[np.ndarray], List[np.ndarray], np.ndarray]:
    """Backpropagate a gradient w.r.t. the last output of a layer range"""
    grad_w = []
    grad_b = []
    last = net.layer_count - 1
    for idx in reversed(range(len(pres))):
        i = start + idx
        layer = net.layers[i]
        if mask is not None and i < last:
            delta = delta * mask[i]
        if layer.spec.activation is Activation.RELU:
            delta = delta * (pres[idx] > 0.0)
        if need_params:
            grad_w.append(delta.T @ acts[idx])
            grad_b.append(delta.sum(axis=0))
        delta = delta @ layer.weight
    grad_w.reverse()
    grad_b.reverse()
    return grad_w, grad_b, delta


def sample_dropout_mask(net: Network,
                        rng: SeededRng,
                        batch_size: int) -> Optional[DropoutMask]:
    """
    Draw an inverted dropout mask for every hidden layer

    Survivors are scaled by 1 / (1 - p) so inference needs no correction.
    No random numbers are consumed when the dropout rate is 0.

    :param      net:         The network
    :type       net:         Network
    :param      rng:         The generator
    :type       rng:         SeededRng
    :param      batch_size:  Number of rows
    :type       batch_size:  int

    :returns:   One mask per hidden layer, None without dropout
    :rtype:     Optional[DropoutMask]
    """
    p = net.dropout_rate
    if p == 0.0:
        return None
    keep = 1.0 - p
    return [(rng.random((batch_size, layer.spec.out_dim)) < keep) / keep
            for layer in net.layers[:-1]]


def forward(net: Network,
            x: np.ndarray,
            dropout_mask: Optional[DropoutMask] = None) -> ForwardTrace:
    """
    Forward pass from the input layer to the softmax

    :param      net:           The network
    :type       net:           Network
    :param      x:             One sample (d,) or a batch (n, d)
    :type       x:             np.ndarray
    :param      dropout_mask:  Training time mask, None at inference
    :type       dropout_mask:  Optional[DropoutMask]

    :raises     DimensionMismatchError:  x does not match the input layer

    :returns:   The trace, always batch shaped
    :rtype:     ForwardTrace
    """
    batch, _ = _as_batch(x, net.input_dim)
    return _trace(net, batch, 0, dropout_mask)


def predict(net: Network, x: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """
    Inference-mode class predictions of a batch

    :param      net:    The network
    :type       net:    Network
    :param      x:      Batch (n, d)
    :type       x:      np.ndarray
    :param      chunk:  Rows per forward pass
    :type       chunk:  int

    :returns:   Predicted classes (n,)
    :rtype:     np.ndarray
    """
    batch, _ = _as_batch(x, net.input_dim)
    out = np.empty(batch.shape[0], dtype=np.int64)
    for start in range(0, batch.shape[0], chunk):
        stop = start + chunk
        out[start:stop] = _trace(net, batch[start:stop], 0, None).predictions
    return out


def sample_losses(trace: ForwardTrace, y) -> np.ndarray:
    """
    Cross entropy -log alpha_y per row

    :param      trace:  The forward trace
    :type       trace:  ForwardTrace
    :param      y:      Label or labels
    :type       y:      Union[int, np.ndarray]

    :raises     ClassIndexError:  A label outside [0, K)

    :returns:   Losses, one per row
    :rtype:     np.ndarray
    """
    rows, k = trace.logits.shape
    y = _labels(y, rows, k)
    picked = trace.logits[np.arange(rows), y]
    return np.maximum(logsumexp(trace.logits, axis=1) - picked, 0.0)


def loss(trace: ForwardTrace, y) -> float:
    """
    Mean cross entropy of the trace rows, -log alpha_y for a single sample

    :param      trace:  The forward trace
    :type       trace:  ForwardTrace
    :param      y:      Label or labels
    :type       y:      Union[int, np.ndarray]

    :returns:   The loss
    :rtype:     float
    """
    return float(np.mean(sample_losses(trace, y)))


def backward(net: Network, trace: ForwardTrace, y) -> ParamGradients:
    """
    Exact gradient of the mean loss w.r.t. every weight and bias

    :param      net:    The network the trace was produced on
    :type       net:    Network
    :param      trace:  Trace of a full forward pass
    :type       trace:  ForwardTrace
    :param      y:      Labels
    :type       y:      Union[int, np.ndarray]

    :returns:   The parameter gradients
    :rtype:     ParamGradients
    """
    if trace.start_layer != 0:
        raise NetworkError("backward needs a trace of the full network")
    rows, k = trace.alpha.shape
    y = _labels(y, rows, k)
    delta = (trace.alpha - _one_hot(y, k)) / rows
    grad_w, grad_b, _ = _backprop(net, 0, trace.pre_activations,
                                  trace.activations, trace.mask, delta)
    return ParamGradients(weights=grad_w, biases=grad_b)


def logit_gradient(trace: ForwardTrace, y) -> np.ndarray:
    """
    Per-row gradient of the loss w.r.t. the logits, alpha - e_y

    :param      trace:  The forward trace
    :type       trace:  ForwardTrace
    :param      y:      Labels
    :type       y:      Union[int, np.ndarray]

    :returns:   Gradients, one row per sample
    :rtype:     np.ndarray
    """
    rows, k = trace.alpha.shape
    return trace.alpha - _one_hot(_labels(y, rows, k), k)


def input_gradients(net: Network, x: np.ndarray, y) -> np.ndarray:
    """
    Per-sample gradient of the loss w.r.t. the input

    :param      net:  The network
    :type       net:  Network
    :param      x:    Batch (n, d)
    :type       x:    np.ndarray
    :param      y:    Labels (n,)
    :type       y:    np.ndarray

    :returns:   Gradients (n, d)
    :rtype:     np.ndarray
    """
    trace = forward(net, x)
    _, _, delta = _backprop(net, 0, trace.pre_activations,
                            trace.activations, None,
                            logit_gradient(trace, y), need_params=False)
    return delta


def input_gradient(net: Network, x: np.ndarray, y: int) -> np.ndarray:
    """
    Gradient of -log alpha_y w.r.t. a single input

    :param      net:  The network
    :type       net:  Network
    :param      x:    The sample (d,)
    :type       x:    np.ndarray
    :param      y:    The label
    :type       y:    int

    :returns:   Gradient (d,)
    :rtype:     np.ndarray
    """
    batch, _ = _as_batch(x, net.input_dim)
    return input_gradients(net, batch, np.array([y]))[0]


def input_jacobians(net: Network, x: np.ndarray) -> np.ndarray:
    """
    Jacobian of the softmax output w.r.t. the input for every row

    Uses one backward pass per class.

    :param      net:  The network
    :type       net:  Network
    :param      x:    Batch (n, d)
    :type       x:    np.ndarray

    :returns:   Jacobians (n, K, d), row k is the gradient of alpha_k
    :rtype:     np.ndarray
    """
    trace = forward(net, x)
    alpha = trace.alpha
    rows, k = alpha.shape
    jac = np.empty((rows, k, net.input_dim))
    for cls in range(k):
        seed_delta = -alpha[:, cls:cls + 1] * alpha
        seed_delta[:, cls] += alpha[:, cls]
        _, _, delta = _backprop(net, 0, trace.pre_activations,
                                trace.activations, None, seed_delta,
                                need_params=False)
        jac[:, cls, :] = delta
    return jac


def input_jacobian(net: Network, x: np.ndarray) -> np.ndarray:
    """
    Jacobian H = d alpha / dx of a single input

    :param      net:  The network
    :type       net:  Network
    :param      x:    The sample (d,)
    :type       x:    np.ndarray

    :returns:   H with shape (K, d)
    :rtype:     np.ndarray
    """
    batch, _ = _as_batch(x, net.input_dim)
    return input_jacobians(net, batch)[0]


def rep_forward(net: Network,
                x: np.ndarray,
                dropout_mask: Optional[DropoutMask] = None) -> np.ndarray:
    """
    Output of the representation stack N_rep, the x~ of the split network

    :param      net:           The network
    :type       net:           Network
    :param      x:             One sample or a batch
    :type       x:             np.ndarray
    :param      dropout_mask:  Training time mask
    :type       dropout_mask:  Optional[DropoutMask]

    :returns:   x~ with the same leading shape as x
    :rtype:     np.ndarray
    """
    batch, single = _as_batch(x, net.input_dim)
    _, acts = _run_layers(net, batch, 0, net.split_index, dropout_mask)
    out = acts[-1]
    return out[0] if single else out


def cla_forward(net: Network,
                x_rep: np.ndarray,
                dropout_mask: Optional[DropoutMask] = None) -> ForwardTrace:
    """
    Forward pass of the classification stack N_cla from a representation

    :param      net:           The network
    :type       net:           Network
    :param      x_rep:         Representation, one row or a batch
    :type       x_rep:         np.ndarray
    :param      dropout_mask:  Training time mask, indexed like the full net
    :type       dropout_mask:  Optional[DropoutMask]

    :returns:   Trace starting at layer split_index
    :rtype:     ForwardTrace
    """
    split = net.split_index
    width = net.layers[split].spec.in_dim if split < net.layer_count \
        else net.class_count
    batch, _ = _as_batch(x_rep, width)
    return _trace(net, batch, split, dropout_mask)


def split_backward(net: Network,
                   rep_input: np.ndarray,
                   cla_trace: ForwardTrace,
                   y,
                   dropout_mask: Optional[DropoutMask] = None
                   ) -> ParamGradients:
    """
    Gradients of the split network with the representation update rule

    N_cla gets the gradient of the loss at ``cla_trace`` (possibly computed
    from a perturbed representation). N_rep gets d loss / d x~ at that same
    point chained with d N_rep / dW evaluated at ``rep_input``.

    :param      net:           The network
    :type       net:           Network
    :param      rep_input:     The raw inputs (n, d)
    :type       rep_input:     np.ndarray
    :param      cla_trace:     Trace of cla_forward
    :type       cla_trace:     ForwardTrace
    :param      y:             Labels
    :type       y:             np.ndarray
    :param      dropout_mask:  Mask used for both stacks
    :type       dropout_mask:  Optional[DropoutMask]

    :returns:   Gradients for every layer
    :rtype:     ParamGradients
    """
    split = net.split_index
    if cla_trace.start_layer != split:
        raise NetworkError("trace does not start at the split point")
    rows = cla_trace.alpha.shape[0]
    delta = logit_gradient(cla_trace, y) / rows
    cla_w, cla_b, delta_rep = _backprop(net, split,
                                        cla_trace.pre_activations,
                                        cla_trace.activations,
                                        dropout_mask, delta)
    pres, acts = _run_layers(net, rep_input, 0, split, dropout_mask)
    rep_w, rep_b, _ = _backprop(net, 0, pres, acts, dropout_mask, delta_rep)
    return ParamGradients(weights=rep_w + cla_w, biases=rep_b + cla_b)


def sgd_step(net: Network,
             grads: ParamGradients,
             learning_rate: float,
             momentum: float = 0.0,
             velocity: Optional[ParamGradients] = None) -> ParamGradients:
    """
    In-place momentum SGD update, v <- momentum * v + g, w <- w - lr * v

    :param      net:            The network to update
    :type       net:            Network
    :param      grads:          Gradients shaped like the parameters
    :type       grads:          ParamGradients
    :param      learning_rate:  The learning rate
    :type       learning_rate:  float
    :param      momentum:       The momentum factor
    :type       momentum:       float
    :param      velocity:       Velocity returned by the previous step
    :type       velocity:       Optional[ParamGradients]

    :returns:   The new velocity
    :rtype:     ParamGradients
    """
    if len(grads.weights) != net.layer_count:
        raise DimensionMismatchError("gradients do not cover every layer")
    if velocity is None:
        velocity = ParamGradients(
            weights=[np.zeros_like(layer.weight) for layer in net.layers],
            biases=[np.zeros_like(layer.bias) for layer in net.layers])
    new_w = []
    new_b = []
    for layer, g_w, g_b, v_w, v_b in zip(net.layers, grads.weights,
                                         grads.biases, velocity.weights,
                                         velocity.biases):
        v_w = momentum * v_w + g_w
        v_b = momentum * v_b + g_b
        layer.weight -= learning_rate * v_w
        layer.bias -= learning_rate * v_b
        new_w.append(v_w)
        new_b.append(v_b)
    return ParamGradients(weights=new_w, biases=new_b)


def model_to_bytes(net: Network) -> bytes:
    """
    Serialize a network into the versioned model format

    :param      net:  The network
    :type       net:  Network

    :returns:   File content
    :rtype:     bytes
    """
    meta = {
        "layers": [{"in_dim": layer.spec.in_dim,
                    "out_dim": layer.spec.out_dim,
                    "activation": layer.spec.activation.value}
                   for layer in net.layers],
        "split_index": net.split_index,
        "class_count": net.class_count,
        "dropout_rate": net.dropout_rate,
        "seed": net.seed,
        "dtype": "<f8",
    }
    chunks = [MODEL_HEADER.encode("ascii"), b"\n",
              json.dumps(meta, sort_keys=True).encode("utf-8"), b"\n"]
    for layer in net.layers:
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f8")
                      .tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f8")
                      .tobytes())
    return b"".join(chunks)


def model_from_bytes(content: bytes) -> Network:
    """
    Parse the versioned model format

    :param      content:  File content
    :type       content:  bytes

    :raises     ModelFormatError:  Wrong header, metadata or payload size

    :returns:   The network
    :rtype:     Network
    """
    try:
        header, meta_line, payload = content.split(b"\n", 2)
        header = header.decode("ascii")
    except ValueError as e:
        raise ModelFormatError("malformed model file: {}".format(e))
    if header != MODEL_HEADER:
        raise ModelFormatError("unknown model header {!r}".format(header))

    try:
        meta = json.loads(meta_line.decode("utf-8"))
        specs = [LayerSpec(in_dim=int(item["in_dim"]),
                           out_dim=int(item["out_dim"]),
                           activation=Activation(item["activation"]))
                 for item in meta["layers"]]
        split_index = int(meta["split_index"])
        dropout_rate = float(meta["dropout_rate"])
        seed = meta.get("seed")
    except (AttributeError, KeyError, TypeError, ValueError,
            NetworkError) as e:
        raise ModelFormatError("malformed model metadata: {!r}".format(e))

    expected = sum(s.in_dim * s.out_dim + s.out_dim for s in specs) * 8
    if len(payload) != expected:
        raise ModelFormatError("model payload has {} bytes, expected {}".
                               format(len(payload), expected))

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    layers = []
    offset = 0
    for spec in specs:
        n_w = spec.in_dim * spec.out_dim
        weight = values[offset:offset + n_w].reshape(spec.out_dim,
                                                     spec.in_dim).copy()
        offset += n_w
        bias = values[offset:offset + spec.out_dim].copy()
        offset += spec.out_dim
        layers.append(Layer(spec=spec, weight=weight, bias=bias))
    try:
        return Network(layers=layers,
                       split_index=split_index,
                       dropout_rate=dropout_rate,
                       seed=seed)
    except (NetworkError, DimensionMismatchError) as e:
        raise ModelFormatError("inconsistent model file: {}".format(e))


def model_id(net: Network) -> str:
    """
    Short content hash of a network

    :param      net:  The network
    :type       net:  Network

    :returns:   First 16 hex digits of the SHA-256 of the model bytes
    :rtype:     str
    """
    return hashlib.sha256(model_to_bytes(net)).hexdigest()[:16]


def save_model(net: Network, path: Union[str, Path]) -> str:
    """
    Write a network to a model file

    :param      net:   The network
    :type       net:   Network
    :param      path:  The output path
    :type       path:  Union[str, Path]

    :returns:   The model id
    :rtype:     str
    """
    content = model_to_bytes(net)
    Path(path).write_bytes(content)
    return hashlib.sha256(content).hexdigest()[:16]


def load_model(path: Union[str, Path]) -> Network:
    """
    Read a network from a model file

    :param      path:  The model path
    :type       path:  Union[str, Path]

    :returns:   The network
    :rtype:     Network
    """
    return model_from_bytes(Path(path).read_bytes())
