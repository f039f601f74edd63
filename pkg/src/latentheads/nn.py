"""Minimal trainable neural toolkit: tape-based autodiff over numpy vectors.

Everything is float64 and unbatched: the unit of work is a single vector or a
matrix-vector product. Each operation returns a `Tensor` wired to its inputs,
so one `backward()` call on a scalar loss accumulates gradients into every
reachable `Parameter`. Inference code should run under `no_grad()` to skip
tape construction entirely.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigurationError,
    InvalidInputError,
    NonFiniteError,
    UsageError,
)

_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, exc_type, exc, tb):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """A float64 array plus an optional backward closure on the tape."""

    __slots__ = ("data", "grad", "needs_grad", "_parents", "_bw", "_released")

    def __init__(self, data, parents=(), bw=None, needs_grad=False):
        if isinstance(data, np.ndarray):
            if data.dtype != np.float64:
                data = data.astype(np.float64)
        else:
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self.needs_grad = needs_grad
        self._parents = parents
        self._bw = bw
        self._released = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A view of the same values with no tape behind it."""
        return Tensor(self.data)

    def backward(self, retain: bool = False) -> None:
        """Propagate d(self)/d(param) into every reachable Parameter's grad.

        The loss must be a scalar produced by a recorded forward pass. By
        default the tape is released afterwards (closures dropped, graph
        edges cut), so a second backward on the same graph raises.
        """
        if self.data.size != 1:
            raise UsageError(f"backward() expects a scalar loss, got shape {self.shape}")
        if self._released:
            raise UsageError("backward() called again on an already released graph")
        if not self.needs_grad:
            raise UsageError("backward() without a recorded forward pass")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            nid = id(node)
            if nid in visited:
                continue
            visited.add(nid)
            stack.append((node, True))
            for parent in node._parents:
                if parent.needs_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._bw is not None:
                node._bw()
        if not retain:
            for node in topo:
                if node._bw is not None:
                    node._bw = None
                    node._parents = ()
                    if node is not self:
                        node.grad = None
            self._released = True

    def __repr__(self):
        return f"Tensor(shape={self.shape}, needs_grad={self.needs_grad})"


class Parameter(Tensor):
    """Trainable tensor carrying its gradient and Adam accumulators."""

    __slots__ = ("adam_m", "adam_v", "step_count")

    def __init__(self, data):
        super().__init__(data, needs_grad=True)
        self.grad = np.zeros_like(self.data)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0


def _acc(t: Tensor, g: np.ndarray, own: bool = False) -> None:
    # own=True means g is a fresh array the closure built and may hand over.
    if t.grad is None:
        t.grad = g if own else g.copy()
    else:
        t.grad += g


def constant(data) -> Tensor:
    return Tensor(data)


def zeros(n: int) -> Tensor:
    return Tensor(np.zeros(n))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ConfigurationError(f"add: shape mismatch {a.shape} vs {b.shape}")
    out_data = a.data + b.data
    if not (_grad_enabled and (a.needs_grad or b.needs_grad)):
        return Tensor(out_data)
    out = Tensor(out_data, (a, b), None, True)

    def bw():
        g = out.grad
        if a.needs_grad:
            _acc(a, g)
        if b.needs_grad:
            _acc(b, g)

    out._bw = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ConfigurationError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    out_data = a.data * b.data
    if not (_grad_enabled and (a.needs_grad or b.needs_grad)):
        return Tensor(out_data)
    out = Tensor(out_data, (a, b), None, True)

    def bw():
        g = out.grad
        if a.needs_grad:
            _acc(a, g * b.data, own=True)
        if b.needs_grad:
            _acc(b, g * a.data, own=True)

    out._bw = bw
    return out


def matvec(w: Tensor, x: Tensor) -> Tensor:
    """Matrix (m, n) times vector (n,) -> vector (m,)."""
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ConfigurationError(f"matvec: incompatible shapes {w.shape} @ {x.shape}")
    out_data = w.data @ x.data
    if not (_grad_enabled and (w.needs_grad or x.needs_grad)):
        return Tensor(out_data)
    out = Tensor(out_data, (w, x), None, True)

    def bw():
        g = out.grad
        if w.needs_grad:
            _acc(w, np.outer(g, x.data), own=True)
        if x.needs_grad:
            _acc(x, w.data.T @ g, own=True)

    out._bw = bw
    return out


def concat(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise InvalidInputError("concat of an empty sequence")
    out_data = np.concatenate([p.data for p in parts])
    if not (_grad_enabled and any(p.needs_grad for p in parts)):
        return Tensor(out_data)
    sizes = [p.data.shape[0] for p in parts]
    out = Tensor(out_data, tuple(parts), None, True)

    def bw():
        g = out.grad
        off = 0
        for p, n in zip(parts, sizes):
            if p.needs_grad:
                _acc(p, g[off:off + n])
            off += n

    out._bw = bw
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    if not (_grad_enabled and x.needs_grad):
        return Tensor(t)
    out = Tensor(t, (x,), None, True)

    def bw():
        _acc(x, out.grad * (1.0 - t * t), own=True)

    out._bw = bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    if not (_grad_enabled and x.needs_grad):
        return Tensor(s)
    out = Tensor(s, (x,), None, True)

    def bw():
        _acc(x, out.grad * s * (1.0 - s), own=True)

    out._bw = bw
    return out


def softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    p = e / e.sum()
    if not (_grad_enabled and x.needs_grad):
        return Tensor(p)
    out = Tensor(p, (x,), None, True)

    def bw():
        g = out.grad
        _acc(x, p * (g - np.dot(g, p)), own=True)

    out._bw = bw
    return out


def row(table: Tensor, index: int) -> Tensor:
    """Select one row of a 2-D tensor (embedding lookup)."""
    if table.data.ndim != 2:
        raise ConfigurationError("row: expected a 2-D table")
    if not 0 <= index < table.data.shape[0]:
        raise InvalidInputError(f"row index {index} out of range")
    out_data = table.data[index].copy()
    if not (_grad_enabled and table.needs_grad):
        return Tensor(out_data)
    out = Tensor(out_data, (table,), None, True)

    def bw():
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        table.grad[index] += out.grad

    out._bw = bw
    return out


def mean_of(terms: Sequence[Tensor]) -> Tensor:
    """Mean of scalar terms; each receives gradient 1/n."""
    if not terms:
        raise InvalidInputError("mean_of an empty sequence")
    vals = [float(t.data) for t in terms]
    out_data = np.asarray(math.fsum(vals) / len(vals))
    tracked = tuple(t for t in terms if t.needs_grad)
    if not (_grad_enabled and tracked):
        return Tensor(out_data)
    out = Tensor(out_data, tracked, None, True)
    inv = 1.0 / len(terms)

    def bw():
        g = out.grad * inv
        for t in tracked:
            _acc(t, g)

    out._bw = bw
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    out_data = x.data * factor
    if not (_grad_enabled and x.needs_grad):
        return Tensor(out_data)
    out = Tensor(out_data, (x,), None, True)

    def bw():
        _acc(x, out.grad * factor, own=True)

    out._bw = bw
    return out


def _target_data(target) -> np.ndarray:
    return target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared componentwise difference.

    `target` may be a plain array or a detached tensor, in which case it is a
    constant; a live tensor target also receives gradient.
    """
    tdata = _target_data(target)
    if pred.data.shape != tdata.shape:
        raise InvalidInputError(f"mse_loss: length mismatch {pred.shape} vs {tdata.shape}")
    d = pred.data - tdata
    n = d.size
    out_data = np.asarray(np.vdot(d, d) / n)
    target_tracked = isinstance(target, Tensor) and target.needs_grad
    if not (_grad_enabled and (pred.needs_grad or target_tracked)):
        return Tensor(out_data)
    parents = (pred, target) if target_tracked else (pred,)
    out = Tensor(out_data, parents, None, True)

    def bw():
        c = out.grad * (2.0 / n)
        if pred.needs_grad:
            _acc(pred, c * d, own=True)
        if target_tracked:
            _acc(target, -c * d, own=True)

    out._bw = bw
    return out


def mae_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute componentwise difference (subgradient 0 at ties)."""
    tdata = _target_data(target)
    if pred.data.shape != tdata.shape:
        raise InvalidInputError(f"mae_loss: length mismatch {pred.shape} vs {tdata.shape}")
    d = pred.data - tdata
    n = d.size
    out_data = np.asarray(np.abs(d).sum() / n)
    target_tracked = isinstance(target, Tensor) and target.needs_grad
    if not (_grad_enabled and (pred.needs_grad or target_tracked)):
        return Tensor(out_data)
    parents = (pred, target) if target_tracked else (pred,)
    out = Tensor(out_data, parents, None, True)

    def bw():
        c = out.grad * (1.0 / n)
        s = np.sign(d)
        if pred.needs_grad:
            _acc(pred, c * s, own=True)
        if target_tracked:
            _acc(target, -c * s, own=True)

    out._bw = bw
    return out


def margin_loss(scores: Tensor, gold_index: int) -> Tensor:
    """Hinge loss: max(0, 1 - score[gold] + best competitor score).

    Zero (with zero gradient) once the gold score leads by at least 1. With a
    single class there is no competitor and the loss is 0.
    """
    s = scores.data
    if s.ndim != 1:
        raise InvalidInputError("margin_loss expects a score vector")
    if not 0 <= gold_index < s.shape[0]:
        raise InvalidInputError(f"gold index {gold_index} out of range for {s.shape[0]} scores")
    if s.shape[0] == 1:
        return Tensor(0.0)
    masked = s.copy()
    masked[gold_index] = -np.inf
    best_other = int(np.argmax(masked))
    value = 1.0 - s[gold_index] + s[best_other]
    if value <= 0.0:
        return Tensor(0.0)
    if not (_grad_enabled and scores.needs_grad):
        return Tensor(value)
    out = Tensor(np.asarray(value), (scores,), None, True)

    def bw():
        g = out.grad
        vec = np.zeros_like(s)
        vec[gold_index] = -g
        vec[best_other] = g
        _acc(scores, vec, own=True)

    out._bw = bw
    return out


def nll_loss(probs: Tensor, gold_index: int) -> Tensor:
    """Negative log of the gold probability (pair with a softmax output)."""
    p = probs.data
    if p.ndim != 1:
        raise InvalidInputError("nll_loss expects a probability vector")
    if not 0 <= gold_index < p.shape[0]:
        raise InvalidInputError(f"gold index {gold_index} out of range for {p.shape[0]} classes")
    pg = max(float(p[gold_index]), 1e-30)
    out_data = np.asarray(-math.log(pg))
    if not (_grad_enabled and probs.needs_grad):
        return Tensor(out_data)
    out = Tensor(out_data, (probs,), None, True)

    def bw():
        vec = np.zeros_like(p)
        vec[gold_index] = -float(out.grad) / pg
        _acc(probs, vec, own=True)

    out._bw = bw
    return out


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Returns 0.0 when either vector has (near-)zero norm, so early-training
    diagnostics never see NaN.
    """
    av = a.data if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)
    bv = b.data if isinstance(b, Tensor) else np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise InvalidInputError(f"cosine_similarity: length mismatch {av.shape} vs {bv.shape}")
    na2 = float(np.vdot(av, av))
    nb2 = float(np.vdot(bv, bv))
    if na2 < 1e-24 or nb2 < 1e-24:
        return 0.0
    if av is bv or np.array_equal(av, bv):
        return 1.0
    # sqrt of the product, not product of sqrts: one rounding instead of two
    return float(np.clip(np.dot(av, bv) / math.sqrt(na2 * nb2), -1.0, 1.0))


def glorot_uniform(rng: np.random.Generator, out_size: int, in_size: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (in_size + out_size))
    return rng.uniform(-limit, limit, size=(out_size, in_size))


_ACTIVATIONS = ("tanh", "softmax", "identity")


class DenseLayer:
    """Fully connected layer: activation(W x + b)."""

    def __init__(self, in_size: int, out_size: int, activation: str = "identity",
                 rng: np.random.Generator | None = None):
        if in_size < 1 or out_size < 1:
            raise ConfigurationError("DenseLayer sizes must be positive")
        if activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {activation!r}")
        if rng is None:
            rng = np.random.default_rng()
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.weights = Parameter(glorot_uniform(rng, out_size, in_size))
        self.bias = Parameter(np.zeros(out_size))

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape != (self.in_size,):
            raise ConfigurationError(
                f"DenseLayer expects input of length {self.in_size}, got {x.shape}")
        z = add(matvec(self.weights, x), self.bias)
        if self.activation == "tanh":
            return tanh(z)
        if self.activation == "softmax":
            return softmax(z)
        return z

    __call__ = forward

    def named_parameters(self, prefix: str = ""):
        yield prefix + "weights", self.weights
        yield prefix + "bias", self.bias


class LstmCell:
    """Standard LSTM cell; each gate is one affine map over [x; h_prev].

    Forget-gate bias starts at 1.0 so early training does not wipe the cell
    state.
    """

    GATES = ("input", "forget", "output", "candidate")

    def __init__(self, input_size: int, hidden_size: int,
                 rng: np.random.Generator | None = None):
        if input_size < 1 or hidden_size < 1:
            raise ConfigurationError("LstmCell sizes must be positive")
        if rng is None:
            rng = np.random.default_rng()
        self.input_size = input_size
        self.hidden_size = hidden_size
        z = input_size + hidden_size

        def gate(bias_init: float):
            w = Parameter(glorot_uniform(rng, hidden_size, z))
            b = Parameter(np.full(hidden_size, bias_init))
            return w, b

        self.w_input, self.b_input = gate(0.0)
        self.w_forget, self.b_forget = gate(1.0)
        self.w_output, self.b_output = gate(0.0)
        self.w_candidate, self.b_candidate = gate(0.0)

    def initial_state(self) -> tuple[Tensor, Tensor]:
        return zeros(self.hidden_size), zeros(self.hidden_size)

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        if x.data.shape != (self.input_size,):
            raise ConfigurationError(
                f"LstmCell expects input of length {self.input_size}, got {x.shape}")
        if h_prev.data.shape != (self.hidden_size,) or c_prev.data.shape != (self.hidden_size,):
            raise ConfigurationError("LstmCell state size mismatch")
        xh = concat((x, h_prev))
        i = sigmoid(add(matvec(self.w_input, xh), self.b_input))
        f = sigmoid(add(matvec(self.w_forget, xh), self.b_forget))
        o = sigmoid(add(matvec(self.w_output, xh), self.b_output))
        cand = tanh(add(matvec(self.w_candidate, xh), self.b_candidate))
        c = add(mul(f, c_prev), mul(i, cand))
        h = mul(o, tanh(c))
        return h, c

    def named_parameters(self, prefix: str = ""):
        for gate_name in self.GATES:
            yield f"{prefix}w_{gate_name}", getattr(self, f"w_{gate_name}")
            yield f"{prefix}b_{gate_name}", getattr(self, f"b_{gate_name}")


class BiEncoder:
    """Two LSTMs reading a sequence in opposite directions, outputs concatenated."""

    def __init__(self, input_size: int, hidden_size: int,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.forward_cell = LstmCell(input_size, hidden_size, rng)
        self.reverse_cell = LstmCell(input_size, hidden_size, rng)

    @classmethod
    def from_cells(cls, forward_cell: LstmCell, reverse_cell: LstmCell) -> "BiEncoder":
        enc = cls.__new__(cls)
        enc.input_size = forward_cell.input_size
        enc.hidden_size = forward_cell.hidden_size
        enc.forward_cell = forward_cell
        enc.reverse_cell = reverse_cell
        return enc

    @property
    def output_size(self) -> int:
        return 2 * self.hidden_size

    def _run(self, cell: LstmCell, xs: Sequence[Tensor]) -> list[Tensor]:
        h, c = cell.initial_state()
        states = []
        for x in xs:
            h, c = cell.step(x, h, c)
            states.append(h)
        return states

    def encode_with_finals(self, xs: Sequence[Tensor]) -> tuple[list[Tensor], Tensor, Tensor]:
        """Per-position [forward; reverse] states plus each direction's final state."""
        if not xs:
            raise InvalidInputError("BiEncoder.encode on an empty sequence")
        fwd = self._run(self.forward_cell, xs)
        rev = self._run(self.reverse_cell, list(reversed(xs)))
        rev_aligned = list(reversed(rev))
        outputs = [concat((f, r)) for f, r in zip(fwd, rev_aligned)]
        return outputs, fwd[-1], rev[-1]

    def encode(self, xs: Sequence[Tensor]) -> list[Tensor]:
        outputs, _, _ = self.encode_with_finals(xs)
        return outputs

    def named_parameters(self, prefix: str = ""):
        yield from self.forward_cell.named_parameters(prefix + "forward.")
        yield from self.reverse_cell.named_parameters(prefix + "reverse.")


def adam_step(params: Iterable, lr: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> None:
    """One Adam update with bias correction; gradients are reset to zero.

    `params` yields Parameters or (name, Parameter) pairs. Any non-finite
    gradient fails the whole step before any value changes.
    """
    items: list[tuple[str, Parameter]] = []
    for i, entry in enumerate(params):
        if isinstance(entry, Parameter):
            items.append((f"param{i}", entry))
        else:
            name, p = entry
            items.append((str(name), p))
    for name, p in items:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(f"non-finite gradient in parameter {name!r}")
    for _, p in items:
        p.step_count += 1
        t = p.step_count
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * p.grad
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * (p.grad * p.grad)
        m_hat = p.adam_m / (1.0 - beta1 ** t)
        v_hat = p.adam_v / (1.0 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + epsilon)
        p.grad[...] = 0.0
