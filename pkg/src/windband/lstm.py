"""Single-layer LSTM cell with a scalar linear head, plus exact
backpropagation-through-time gradients.

Weights are plain numpy tensors, one per gate, so a variational layer can
swap in sampled values without touching this module. Internals are batched
over windows: vectors of shape (H, B) carry B parallel states. The public
single-window entry points are thin wrappers around the batched kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CacheMismatchError, EmptyWindowError, ShapeMismatchError
from .numerics import sigmoid

TENSOR_NAMES = ("W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o", "W_out", "b_out")

#: Gradients carry one array per weight tensor, keyed like LstmWeights.tensors().
LstmGradients = dict[str, np.ndarray]


def tensor_shapes(hidden: int, input_dim: int) -> dict[str, tuple[int, ...]]:
    """Shape of every weight tensor for a given hidden/input size."""
    gate = (hidden, hidden + input_dim)
    return {
        "W_f": gate,
        "W_i": gate,
        "W_c": gate,
        "W_o": gate,
        "b_f": (hidden,),
        "b_i": (hidden,),
        "b_c": (hidden,),
        "b_o": (hidden,),
        "W_out": (1, hidden),
        "b_out": (1,),
    }


@dataclass
class LstmWeights:
    """Gate matrices (hidden, hidden+input), gate biases, and the linear head."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        for name in TENSOR_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        hidden = self.W_f.shape[0]
        input_dim = self.W_f.shape[1] - hidden
        if input_dim < 1:
            raise ShapeMismatchError(f"W_f shape {self.W_f.shape} implies no input columns")
        expect = tensor_shapes(hidden, input_dim)
        for name in TENSOR_NAMES:
            got = getattr(self, name).shape
            if got != expect[name]:
                raise ShapeMismatchError(f"{name} has shape {got}, expected {expect[name]}")

    @property
    def hidden(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.hidden

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "LstmWeights":
        return cls(**{name: tensors[name] for name in TENSOR_NAMES})

    @classmethod
    def zeros(cls, hidden: int, input_dim: int = 1) -> "LstmWeights":
        shapes = tensor_shapes(hidden, input_dim)
        return cls(**{name: np.zeros(shape) for name, shape in shapes.items()})


def zero_gradients(hidden: int, input_dim: int) -> LstmGradients:
    return {name: np.zeros(shape) for name, shape in tensor_shapes(hidden, input_dim).items()}


@dataclass
class LstmState:
    """Hidden and cell vectors; (H,) for one window or (H, B) for a batch."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "LstmState":
        shape = (hidden,) if batch is None else (hidden, batch)
        return cls(h=np.zeros(shape), c=np.zeros(shape))


@dataclass
class StepCache:
    """Per-step values retained for the backward pass (all (·, B))."""

    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c_prev: np.ndarray
    tanh_c: np.ndarray


@dataclass
class SequenceCache:
    hidden: int
    input_dim: int
    batch: int
    steps: list[StepCache] = field(default_factory=list)
    h_last: np.ndarray | None = None


def _as_columns(vec: np.ndarray, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(vec, dtype=float)
    if arr.ndim == 1:
        return arr[:, None], True
    if arr.ndim == 2:
        return arr, False
    raise ShapeMismatchError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")


def _step(h, c, x, w: LstmWeights) -> tuple[np.ndarray, np.ndarray, StepCache]:
    z = np.concatenate([h, x], axis=0)
    f = sigmoid(w.W_f @ z + w.b_f[:, None])
    i = sigmoid(w.W_i @ z + w.b_i[:, None])
    g = np.tanh(w.W_c @ z + w.b_c[:, None])
    o = sigmoid(w.W_o @ z + w.b_o[:, None])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    cache = StepCache(z=z, f=f, i=i, g=g, o=o, c_prev=c, tanh_c=tanh_c)
    return h_new, c_new, cache


def cell_forward(state: LstmState, x_t, w: LstmWeights) -> tuple[LstmState, StepCache]:
    """One gate update: returns the new state and the backward cache."""
    h, squeeze_h = _as_columns(state.h, "state.h")
    c, _ = _as_columns(state.c, "state.c")
    x, squeeze_x = _as_columns(x_t, "x_t")
    if h.shape[0] != w.hidden or c.shape != h.shape:
        raise ShapeMismatchError(f"state shape {h.shape} incompatible with hidden={w.hidden}")
    if x.shape[0] != w.input_dim or x.shape[1] != h.shape[1]:
        raise ShapeMismatchError(
            f"input shape {x.shape} incompatible with input_dim={w.input_dim}, batch={h.shape[1]}"
        )
    h_new, c_new, cache = _step(h, c, x, w)
    if squeeze_h and squeeze_x:
        return LstmState(h=h_new[:, 0], c=c_new[:, 0]), cache
    return LstmState(h=h_new, c=c_new), cache


def batch_forward(windows: np.ndarray, w: LstmWeights) -> tuple[np.ndarray, SequenceCache]:
    """Run B windows of length L; returns (B,) predictions and caches.

    windows is (B, L) for scalar inputs or (B, L, D) in general. The
    initial state is zero; the prediction is W_out @ h_L + b_out.
    """
    arr = np.asarray(windows, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ShapeMismatchError(f"windows must be (B, L) or (B, L, D), got {arr.shape}")
    batch, length, input_dim = arr.shape
    if length < 1:
        raise EmptyWindowError("window length must be >= 1")
    if input_dim != w.input_dim:
        raise ShapeMismatchError(f"input_dim {input_dim} does not match weights ({w.input_dim})")
    h = np.zeros((w.hidden, batch))
    c = np.zeros((w.hidden, batch))
    cache = SequenceCache(hidden=w.hidden, input_dim=input_dim, batch=batch)
    for t in range(length):
        x = arr[:, t, :].T
        h, c, step = _step(h, c, x, w)
        cache.steps.append(step)
    cache.h_last = h
    preds = (w.W_out @ h + w.b_out[:, None])[0]
    return preds, cache


def sequence_forward(window: np.ndarray, w: LstmWeights) -> tuple[float, SequenceCache]:
    """Single window of length L (scalar inputs) to a scalar prediction."""
    arr = np.asarray(window, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    elif arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        raise ShapeMismatchError(f"window must be (L,) or (L, D), got {arr.shape}")
    preds, cache = batch_forward(arr, w)
    return float(preds[0]), cache


def batch_backward(cache: SequenceCache, grad_outputs: np.ndarray, w: LstmWeights) -> LstmGradients:
    """Exact BPTT gradients of sum_b grad_outputs[b] * prediction_b.

    Returns one gradient array per weight tensor, accumulated over the
    batch and all time steps.
    """
    if cache.hidden != w.hidden or cache.input_dim != w.input_dim:
        raise CacheMismatchError(
            f"cache built for (H={cache.hidden}, D={cache.input_dim}), "
            f"weights are (H={w.hidden}, D={w.input_dim})"
        )
    if cache.h_last is None or not cache.steps:
        raise CacheMismatchError("cache does not contain a completed forward pass")
    grad_row = np.asarray(grad_outputs, dtype=float).reshape(1, -1)
    if grad_row.shape[1] != cache.batch:
        raise CacheMismatchError(
            f"grad_outputs has {grad_row.shape[1]} entries, cache batch is {cache.batch}"
        )

    hidden = w.hidden
    grads = zero_gradients(hidden, w.input_dim)
    grads["W_out"] = grad_row @ cache.h_last.T
    grads["b_out"] = grad_row.sum(axis=1)

    dh = w.W_out.T @ grad_row
    dc = np.zeros_like(dh)
    for step in reversed(cache.steps):
        do = dh * step.tanh_c
        da_o = do * step.o * (1.0 - step.o)
        dc = dc + dh * step.o * (1.0 - step.tanh_c * step.tanh_c)
        df = dc * step.c_prev
        da_f = df * step.f * (1.0 - step.f)
        di = dc * step.g
        da_i = di * step.i * (1.0 - step.i)
        dg = dc * step.i
        da_g = dg * (1.0 - step.g * step.g)

        grads["W_f"] += da_f @ step.z.T
        grads["W_i"] += da_i @ step.z.T
        grads["W_c"] += da_g @ step.z.T
        grads["W_o"] += da_o @ step.z.T
        grads["b_f"] += da_f.sum(axis=1)
        grads["b_i"] += da_i.sum(axis=1)
        grads["b_c"] += da_g.sum(axis=1)
        grads["b_o"] += da_o.sum(axis=1)

        dz = w.W_f.T @ da_f + w.W_i.T @ da_i + w.W_c.T @ da_g + w.W_o.T @ da_o
        dh = dz[:hidden]
        dc = dc * step.f
    return grads


def sequence_backward(cache: SequenceCache, grad_output: float, w: LstmWeights) -> LstmGradients:
    """Gradients of grad_output * prediction for a single-window cache."""
    if cache.batch != 1:
        raise CacheMismatchError(f"expected a single-window cache, got batch={cache.batch}")
    return batch_backward(cache, np.array([grad_output]), w)
