"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every differentiable operation appends a node to the active :class:`Tape`.
``Tape.backward`` walks the nodes in reverse insertion order exactly once.
Outside of a tape nothing is recorded, which is how inference runs.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from typing import Callable, Iterable

import numpy as np

_TAPES: list["Tape"] = []


class Tape:
    def __init__(self):
        self.nodes: list[Tensor] = []
        self._done = False

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def record(self, t: "Tensor"):
        self.nodes.append(t)

    def backward(self, loss: "Tensor"):
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            raise ValueError("backward needs a scalar loss tensor")
        if not self.nodes or (loss._backward is None and not loss.requires_grad):
            raise RuntimeError("backward called before any recorded forward pass")
        if self._done:
            raise RuntimeError("tape already consumed by a backward pass")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)
        self._done = True


def _active():
    return _TAPES[-1] if _TAPES else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}{', grad' if self.requires_grad else ''})"

    @property
    def shape(self):
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def _acc(self, g):
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return add(self, neg(as_tensor(o)))

    def __rsub__(self, o):
        return add(as_tensor(o), neg(self))

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Tensor):
            raise TypeError("division by a tensor is not supported")
        return mul(self, 1.0 / np.asarray(o, dtype=float))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    tape = _active()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        tape.record(out)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        a._acc(_unbroadcast(g, a.shape))
        b._acc(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bw)


def neg(a) -> Tensor:
    return _make(-a.data, (a,), lambda g: a._acc(-g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        a._acc(_unbroadcast(g * b.data, a.shape))
        b._acc(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        a._acc(g @ b.data.T)
        b._acc(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bw)


def relu(a) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: a._acc(g * mask))


def tanh(a) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: a._acc(g * (1.0 - y * y)))


def sigmoid(a) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(y, (a,), lambda g: a._acc(g * y * (1.0 - y)))


def softplus(a) -> Tensor:
    x = a.data
    y = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    s = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _make(y, (a,), lambda g: a._acc(g * s))


def square(a) -> Tensor:
    return _make(a.data * a.data, (a,), lambda g: a._acc(2.0 * g * a.data))


def sqrt(a) -> Tensor:
    y = np.sqrt(a.data)
    safe = np.where(y > 0, y, np.inf)
    return _make(y, (a,), lambda g: a._acc(0.5 * g / safe))


def tabs(a) -> Tensor:
    return _make(np.abs(a.data), (a,), lambda g: a._acc(g * np.sign(a.data)))


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softplus": softplus,
    "identity": lambda t: t,
}


# -- shape / reductions ------------------------------------------------------
def tsum(a, axis=None, keepdims=False) -> Tensor:
    shape = a.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._acc(np.broadcast_to(g, shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)


def mean(a, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / max(n, 1))


def reshape(a, shape) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: a._acc(g.reshape(old)))


def concat(items: Iterable, axis: int = -1) -> Tensor:
    items = [as_tensor(t) for t in items]
    sizes = [t.shape[axis] for t in items]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(items, np.split(g, cuts, axis=axis)):
            t._acc(piece)

    return _make(np.concatenate([t.data for t in items], axis=axis), tuple(items), bw)


def index(a, key) -> Tensor:
    """Fancy indexing; gradient scatters back with ``np.add.at`` (repeated indices accumulate)."""
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        a._acc(out)

    return _make(a.data[key], (a,), bw)


def segment_sum(a, seg, n: int) -> Tensor:
    seg = np.asarray(seg, dtype=np.int64)
    out = np.zeros((n,) + a.shape[1:])
    np.add.at(out, seg, a.data)
    return _make(out, (a,), lambda g: a._acc(g[seg]))


def segment_mean(a, seg, n: int) -> Tensor:
    seg = np.asarray(seg, dtype=np.int64)
    cnt = np.bincount(seg, minlength=n).astype(float)
    inv = np.where(cnt > 0, 1.0 / np.maximum(cnt, 1.0), 0.0)
    return mul(segment_sum(a, seg, n), inv.reshape((n,) + (1,) * (a.data.ndim - 1)))


def segment_argmax(values: np.ndarray, seg: np.ndarray, n: int) -> np.ndarray:
    """Row index of the max per (segment, column); lowest row wins ties, -1 for empty segments."""
    values = np.asarray(values)
    v2 = values.reshape(len(values), -1)
    rows = np.arange(len(v2))
    out = np.full((n, v2.shape[1]), -1, dtype=np.int64)
    for c in range(v2.shape[1]):
        order = np.lexsort((rows, -v2[:, c], seg))
        s = seg[order]
        first = np.ones(len(s), dtype=bool)
        first[1:] = s[1:] != s[:-1]
        out[s[first], c] = order[first]
    return out.reshape((n,) + values.shape[1:])


def segment_max(a, seg, n: int, fill: float = 0.0) -> Tensor:
    """Per-segment maximum; gradient routed to the (lowest-index) argmax row."""
    seg = np.asarray(seg, dtype=np.int64)
    if a.data.ndim == 1:
        return reshape(segment_max(reshape(a, (-1, 1)), seg, n, fill), (n,))
    arg = segment_argmax(a.data, seg, n)
    cols = np.broadcast_to(np.arange(a.shape[1]), arg.shape)
    valid = arg >= 0
    picked = index(a, (np.where(valid, arg, 0), cols))
    return add(mul(picked, valid.astype(float)), np.where(valid, 0.0, fill))


def cross_entropy(logits, labels) -> Tensor:
    """Mean softmax cross-entropy for integer ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    n = len(labels)
    loss = -np.mean(np.log(p[np.arange(n), labels] + 1e-300))

    def bw(g):
        d = p.copy()
        d[np.arange(n), labels] -= 1.0
        logits._acc(g * d / n)

    return _make(np.array(loss), (logits,), bw)


def l1_loss(pred, target) -> Tensor:
    return mean(tabs(pred - np.asarray(target, dtype=float)))


# -- parameters --------------------------------------------------------------
class ParamStore:
    """Named parameters with gradient accumulators and a seeded initializer."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.state: dict = {}

    def param(self, name: str, shape, init: str = "glorot") -> Tensor:
        if name in self.params:
            p = self.params[name]
            if p.shape != tuple(shape):
                raise ValueError(f"parameter {name} exists with shape {p.shape}, requested {tuple(shape)}")
            return p
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "glorot":
            fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (1, shape[0])
            a = math.sqrt(6.0 / (fan_in + fan_out))
            data = self.rng.uniform(-a, a, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = Tensor(data, requires_grad=True, name=name)
        self.params[name] = p
        return p

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()]) if self.params else np.zeros(0)

    def copy_from(self, other: "ParamStore"):
        for k, p in other.params.items():
            self.params[k].data[...] = p.data


def sgd_step(store: ParamStore, lr: float):
    for p in store.params.values():
        if p.grad is not None:
            p.data -= lr * p.grad
    store.zero_grad()


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; moment estimates live in ``store.state``."""
    st = store.state.setdefault("adam", {"t": 0, "m": {}, "v": {}})
    st["t"] += 1
    t = st["t"]
    for name, p in store.params.items():
        if p.grad is None:
            continue
        m = st["m"].get(name, np.zeros_like(p.data))
        v = st["v"].get(name, np.zeros_like(p.data))
        m = beta1 * m + (1 - beta1) * p.grad
        v = beta2 * v + (1 - beta2) * p.grad**2
        st["m"][name], st["v"][name] = m, v
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
    store.zero_grad()


CHECKPOINT_HEADER = "# topnets-checkpoint v1"


def save_checkpoint(store: ParamStore, path, meta: str | None = None):
    """Text format: header, optional ``meta=<json>`` line, then ``name=shape:values`` per parameter."""
    lines = [CHECKPOINT_HEADER]
    if meta is not None:
        lines.append("meta=" + meta)
    for name, p in store.params.items():
        shape = ",".join(str(s) for s in p.shape)
        vals = ",".join(repr(float(v)) for v in p.data.ravel())
        lines.append(f"{name}={shape}:{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[dict, str | None]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a topnets checkpoint (bad header)")
    params, meta = OrderedDict(), None
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("meta="):
            meta = line[5:]
            continue
        name, _, rest = line.partition("=")
        shape_s, _, vals_s = rest.partition(":")
        shape = tuple(int(s) for s in shape_s.split(",") if s)
        vals = np.array([float(v) for v in vals_s.split(",") if v], dtype=float)
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"{path}:{ln}: {name} has {vals.size} values for shape {shape}")
        params[name] = vals.reshape(shape)
    return params, meta


# -- building blocks ---------------------------------------------------------
class MLP:
    def __init__(self, store: ParamStore, prefix: str, widths, act: str = "relu", final_act: str | None = None):
        self.widths = list(widths)
        self.act = ACTIVATIONS[act]
        self.final_act = ACTIVATIONS[final_act] if final_act else None
        self.layers = []
        for i, (a, b) in enumerate(zip(self.widths, self.widths[1:])):
            W = store.param(f"{prefix}.W{i}", (a, b))
            bias = store.param(f"{prefix}.b{i}", (b,), init="zeros")
            self.layers.append((W, bias))

    @property
    def in_width(self):
        return self.widths[0]

    @property
    def out_width(self):
        return self.widths[-1]

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        for i, (W, b) in enumerate(self.layers):
            x = matmul(x, W) + b
            if i < len(self.layers) - 1:
                x = self.act(x)
        if self.final_act is not None:
            x = self.final_act(x)
        return x


class DeepSet:
    """inner MLP -> per-segment pool -> outer MLP; an empty segment pools to the zero vector."""

    def __init__(self, store, prefix, inner_widths, outer_widths, pool: str = "sum", act: str = "relu"):
        self.inner = MLP(store, prefix + ".inner", inner_widths, act=act, final_act=act)
        self.outer = MLP(store, prefix + ".outer", outer_widths, act=act)
        self.pool = pool

    @property
    def out_width(self):
        return self.outer.out_width

    def __call__(self, x, seg=None, n: int = 1) -> Tensor:
        x = as_tensor(x)
        if seg is None:
            seg = np.zeros(x.shape[0], dtype=np.int64)
        if x.shape[0] == 0:
            pooled = Tensor(np.zeros((n, self.inner.out_width)))
        else:
            h = self.inner(x)
            pooled = pool(h, seg, n, self.pool)
        return self.outer(pooled)


def pool(h, seg, n, kind: str) -> Tensor:
    if kind == "sum":
        return segment_sum(h, seg, n)
    if kind == "mean":
        return segment_mean(h, seg, n)
    if kind == "max":
        return segment_max(h, seg, n)
    raise ValueError(f"unknown pooling {kind!r}")


# -- gradient checking -------------------------------------------------------
class GradCheckReport(dict):
    @property
    def passed(self) -> bool:
        return self.get("skipped", False) or self.get("max_rel_err", np.inf) < self.get("tol", 0)


def grad_check(loss_fn: Callable[[], Tensor], store: ParamStore, *, h: float = 1e-5, tol: float = 1e-4,
               n_coords: int = 20, n_dirs: int = 3, rng=None, tie_margin: Callable[[], float] | None = None,
               floor: float = 1e-6) -> GradCheckReport:
    """Compare reverse-mode gradients to central differences.

    Checks ``n_dirs`` random directional derivatives and ``n_coords`` random
    coordinates. If ``tie_margin()`` (smallest gap between competing filter
    values) is below ``10*h`` the case is reported as skipped.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if tie_margin is not None:
        margin = tie_margin()
        if margin <= 10 * h:
            return GradCheckReport(skipped=True, reason=f"tie margin {margin:.3g} <= 10h", tol=tol)
    store.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    names = list(store.params)
    grads = {k: (store[k].grad if store[k].grad is not None else np.zeros_like(store[k].data)) for k in names}
    store.zero_grad()

    def f():
        return float(loss_fn().data)

    errs = []
    for _ in range(n_dirs):
        dirs = {k: rng.standard_normal(store[k].shape) for k in names}
        norm = math.sqrt(sum(float((d**2).sum()) for d in dirs.values()))
        for k in names:
            store[k].data += h * dirs[k] / norm
        fp = f()
        for k in names:
            store[k].data -= 2 * h * dirs[k] / norm
        fm = f()
        for k in names:
            store[k].data += h * dirs[k] / norm
        num = (fp - fm) / (2 * h)
        ana = sum(float((grads[k] * dirs[k]).sum()) for k in names) / norm
        errs.append(abs(num - ana) / max(abs(num), abs(ana), floor))
    sizes = np.array([store[k].data.size for k in names])
    for _ in range(n_coords):
        k = names[rng.choice(len(names), p=sizes / sizes.sum())]
        i = np.unravel_index(rng.integers(store[k].data.size), store[k].shape)
        old = store[k].data[i]
        store[k].data[i] = old + h
        fp = f()
        store[k].data[i] = old - h
        fm = f()
        store[k].data[i] = old
        num = (fp - fm) / (2 * h)
        ana = float(grads[k][i])
        errs.append(abs(num - ana) / max(abs(num), abs(ana), floor))
    return GradCheckReport(skipped=False, max_rel_err=float(max(errs)), checks=len(errs), tol=tol)
