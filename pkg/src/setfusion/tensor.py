"""Reverse-mode automatic differentiation over float64 numpy arrays.

Each operation returns a new `Tensor` carrying a closure that knows how
to push an incoming gradient to the operation's inputs. `backward`
replays these closures over the recorded graph in reverse creation
order, which equals reverse execution order for a single-threaded
forward pass, visiting each recorded node exactly once.

Design constraints:
  - float64 everywhere; forward ops raise `NumericError` on NaN/Inf
    outputs instead of propagating them silently.
  - no broadcasting except bias-add (matrix + row vector); everything
    else must shape-match exactly.
  - relu derivative at 0 is 0; `reduce(..., "max")` routes gradient to
    the first argmax on ties.
  - a second `backward` without clearing leaf gradients is an error,
    not an accumulate.
"""

from __future__ import annotations

import itertools
import math
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_seq_counter = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """An n-dimensional float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_bwd", "_seq")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"tensor '{name or '<anon>'}' initialized with non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._bwd = None
        self._seq = next(_seq_counter)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A gradient-free leaf sharing this tensor's current values."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], bwd, op: str) -> Tensor:
    """Internal fast constructor for op outputs."""
    # a non-finite element always drives the sum non-finite, so this
    # single reduction is a sound (and much cheaper) finiteness probe
    if not math.isfinite(float(data.sum())):
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{op} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._seq = next(_seq_counter)
    if _grad_enabled and any(p.requires_grad or p._bwd is not None for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._bwd = bwd
    else:
        out.requires_grad = False
        out._parents = ()
        out._bwd = None
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a gradient contribution on a graph node."""
    if t.requires_grad or t._bwd is not None:
        if t.grad is None:
            t.grad = np.array(g, dtype=np.float64)
        else:
            t.grad = t.grad + g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# elementwise ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        def bwd(g):
            _acc(a, g)
            _acc(b, g)
    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        # bias-add: matrix + row vector
        def bwd(g):
            _acc(a, g)
            _acc(b, g.sum(axis=0))
    else:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not match")
    return _make(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not match")

    def bwd(g):
        _acc(a, g)
        _acc(b, -g)

    return _make(a.data - b.data, (a, b), bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not match")

    def bwd(g):
        _acc(a, g * b.data)
        _acc(b, g * a.data)

    return _make(a.data * b.data, (a, b), bwd, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def bwd(g):
        _acc(a, g * c)

    return _make(a.data * c, (a,), bwd, "scale")


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # derivative at exactly 0 is 0

    def bwd(g):
        _acc(a, g * mask)

    return _make(np.maximum(a.data, 0.0), (a,), bwd, "relu")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports 2d@2d, 2d@1d (matvec) and 1d@2d (vecmat)."""
    a, b = as_tensor(a), as_tensor(b)
    na, nb = a.data.ndim, b.data.ndim
    if na == 2 and nb == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")

        def bwd(g):
            _acc(a, g @ b.data.T)
            _acc(b, a.data.T @ g)
    elif na == 2 and nb == 1:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")

        def bwd(g):
            _acc(a, g[:, None] * b.data[None, :])
            _acc(b, a.data.T @ g)
    elif na == 1 and nb == 2:
        if a.shape[0] != b.shape[0]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")

        def bwd(g):
            _acc(a, b.data @ g)
            _acc(b, a.data[:, None] * g[None, :])
    else:
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b), bwd, "matmul")


def linear(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """Fused dense layer W x + b for 1d x; one graph node instead of two."""
    w, x, b = as_tensor(w), as_tensor(x), as_tensor(b)
    if w.data.ndim != 2 or x.data.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ShapeError(f"linear: shapes {w.shape} @ {x.shape} are not aligned")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"linear: bias shape {b.shape} does not match output {w.shape[0]}")

    def bwd(g):
        _acc(w, g[:, None] * x.data[None, :])
        _acc(x, w.data.T @ g)
        _acc(b, g)

    return _make(w.data @ x.data + b.data, (w, x, b), bwd, "linear")


# ---------------------------------------------------------------------------
# shape ops


def stack(tensors: list[Tensor] | tuple[Tensor, ...]) -> Tensor:
    """Stack equal-length 1d tensors into a (k, n) matrix."""
    if not tensors:
        raise ValueError("stack: empty tensor list")
    ts = [as_tensor(t) for t in tensors]
    width = ts[0].shape
    if any(t.data.ndim != 1 or t.shape != width for t in ts):
        raise ShapeError(f"stack: expected equal 1d shapes, got {[t.shape for t in ts]}")

    def bwd(g):
        for i, t in enumerate(ts):
            _acc(t, g[i])

    return _make(np.stack([t.data for t in ts]), tuple(ts), bwd, "stack")


def concat(tensors: list[Tensor] | tuple[Tensor, ...]) -> Tensor:
    """Concatenate 1d tensors."""
    if not tensors:
        raise ValueError("concat: empty tensor list")
    ts = [as_tensor(t) for t in tensors]
    if any(t.data.ndim != 1 for t in ts):
        raise ShapeError(f"concat: expected 1d operands, got {[t.shape for t in ts]}")
    sizes = [t.shape[0] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            _acc(t, g[lo:hi])

    return _make(np.concatenate([t.data for t in ts]), tuple(ts), bwd, "concat")


def row(a: Tensor, index: int) -> Tensor:
    """Select row `index` of a 2d tensor (differentiable embedding lookup)."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"row: expected 2d tensor, got shape {a.shape}")
    if not 0 <= index < a.shape[0]:
        raise ValueError(f"row: index {index} out of range for shape {a.shape}")

    def bwd(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _acc(a, full)

    return _make(a.data[index].copy(), (a,), bwd, "row")


def slice1d(a: Tensor, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeError(f"slice1d: expected 1d tensor, got shape {a.shape}")
    if not 0 <= start <= stop <= a.shape[0]:
        raise ValueError(f"slice1d: range [{start}, {stop}) invalid for length {a.shape[0]}")

    def bwd(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _acc(a, full)

    return _make(a.data[start:stop].copy(), (a,), bwd, "slice1d")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}")

    def bwd(g):
        _acc(a, g.reshape(a.shape))

    return _make(a.data.reshape(shape).copy(), (a,), bwd, "reshape")


# ---------------------------------------------------------------------------
# reductions and losses


def reduce(x: Tensor, axis: int, kind: str) -> Tensor:
    """Reduce along `axis` with sum, mean or max."""
    x = as_tensor(x)
    if kind not in ("sum", "mean", "max"):
        raise ValueError(f"reduce: unknown kind {kind!r}")
    if not 0 <= axis < x.data.ndim:
        raise ShapeError(f"reduce: axis {axis} out of range for shape {x.shape}")
    if kind == "sum":
        out = x.data.sum(axis=axis)

        def bwd(g):
            _acc(x, np.broadcast_to(np.expand_dims(g, axis), x.shape))
    elif kind == "mean":
        out = x.data.mean(axis=axis)
        n = x.shape[axis]

        def bwd(g):
            _acc(x, np.broadcast_to(np.expand_dims(g, axis) / n, x.shape))
    else:
        out = x.data.max(axis=axis)
        argmax = np.argmax(x.data, axis=axis)  # first index on ties

        def bwd(g):
            full = np.zeros_like(x.data)
            np.put_along_axis(
                full, np.expand_dims(argmax, axis), np.expand_dims(g, axis), axis
            )
            _acc(x, full)

    return _make(np.asarray(out), (x,), bwd, f"reduce_{kind}")


def softmax_cross_entropy(logits: Tensor, target_class: int) -> Tensor:
    """Stable cross-entropy of a 1d logit vector against an integer class."""
    logits = as_tensor(logits)
    if logits.data.ndim != 1:
        raise ShapeError(f"softmax_cross_entropy: expected 1d logits, got {logits.shape}")
    c = logits.shape[0]
    if not 0 <= int(target_class) < c:
        raise ValueError(f"softmax_cross_entropy: class {target_class} out of range [0, {c})")
    target_class = int(target_class)
    z = logits.data
    m = z.max()
    exps = np.exp(z - m)
    lse = m + np.log(exps.sum())
    probs = exps / exps.sum()

    def bwd(g):
        delta = probs.copy()
        delta[target_class] -= 1.0
        _acc(logits, g * delta)

    return _make(np.asarray(lse - z[target_class]), (logits,), bwd, "softmax_cross_entropy")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain numpy softmax (prediction-side helper, not differentiable)."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared difference; zero iff a == b."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: shapes {a.shape} and {b.shape} do not match")
    diff = a.data - b.data
    n = a.size

    def bwd(g):
        scaled = (2.0 / n) * g * diff
        _acc(a, scaled)
        _acc(b, -scaled)

    return _make(np.asarray(np.mean(diff * diff)), (a, b), bwd, "mse")


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Populate gradients for every requires_grad leaf reachable from `loss`.

    Raises `ContractError` if `loss` is not scalar or if a reachable
    leaf still carries a gradient from a previous pass.
    """
    if loss.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")

    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack_ = [loss]
    while stack_:
        t = stack_.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack_.extend(t._parents)

    for t in nodes:
        if t._bwd is None and t.requires_grad and t.grad is not None:
            raise ContractError(
                f"backward: leaf '{t.name or '<anon>'}' already has a gradient; "
                "clear gradients (optimizer step or zero_grad) before calling backward again"
            )

    loss.grad = np.ones_like(loss.data)
    for t in sorted(nodes, key=lambda n: n._seq, reverse=True):
        if t._bwd is not None and t.grad is not None:
            t._bwd(t.grad)
