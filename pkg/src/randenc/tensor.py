"""Minimal reverse-mode autodiff over float64 numpy arrays.

Provides exactly what the randomized encoders, the distribution-matching
attacks, and the toy classifiers need: dense matmul, broadcasted
elementwise arithmetic, the usual nonlinearities, non-overlapping patch
convolution, batch normalization, reductions, and seeded initialization.

Every op records a backward closure on its output; ``backward`` on a
scalar walks the recorded graph in reverse topological order.  Data is
always float64.  With ``RANDENC_DEBUG=1`` every forward op asserts its
output is finite.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

from .seeds import derive_seed

_DEBUG = os.environ.get("RANDENC_DEBUG", "") not in ("", "0")


class Tensor:
    """Array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, requires_grad=None) -> Tensor:
    if requires_grad is None:
        requires_grad = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires_grad)
    if requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    if _DEBUG and not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite values in forward op output")
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def backward(out: Tensor) -> None:
    """Reverse-mode gradients of a scalar output.

    Gradients accumulate into ``.grad`` of every reachable tensor with
    ``requires_grad``.
    """
    if out.data.size != 1:
        raise ValueError("backward requires a scalar output")
    if not out.requires_grad:
        raise ValueError("output does not depend on any tracked tensor")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    out.accumulate_grad(np.ones_like(out.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise and linear ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(a.data / b.data, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * c)

    return _make(a.data * c, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0  # subgradient at 0 is 0

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - y * y))

    return _make(y, (a,), bw)


def logistic(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * y * (1.0 - y))

    return _make(y, (a,), bw)


def softplus(a: Tensor) -> Tensor:
    y = np.logaddexp(0.0, a.data)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * s)

    return _make(y, (a,), bw)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * y)

    return _make(y, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _make(np.log(a.data), (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * 0.5 / y)

    return _make(y, (a,), bw)


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * p * np.power(a.data, p - 1.0))

    return _make(np.power(a.data, p), (a,), bw)


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(g, a.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def mean_pool(a: Tensor, axis: int) -> Tensor:
    """Mean over one axis; the gradient fans out uniformly (1/n)."""
    return mean(a, axis=axis)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return _make(a.data.reshape(shape), (a,), bw)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(int(i) for i in np.argsort(axes))

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), bw)


def concat0(parts: "Sequence[Tensor]") -> Tensor:
    """Concatenate along axis 0; the gradient splits back by row blocks."""
    parts = list(parts)
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate_grad(g[a:b])

    return _make(np.concatenate([p.data for p in parts], axis=0), tuple(parts), bw)


# ---------------------------------------------------------------------------
# structured ops
# ---------------------------------------------------------------------------


def patchify(images: Tensor, patch: int) -> Tensor:
    """Split (B, C, H, W) into flattened non-overlapping patches.

    Returns (B, (H/p)·(W/p), C·p·p); requires the patch size to divide
    both spatial dims.  Pure reshape/transpose, so exactly invertible.
    """
    if images.data.ndim != 4:
        raise ValueError("patchify expects (B, C, H, W)")
    b, c, h, w = images.shape
    if h % patch or w % patch:
        raise ValueError(f"patch size {patch} does not divide image dims {h}x{w}")
    hp, wp = h // patch, w // patch
    x = reshape(images, (b, c, hp, patch, wp, patch))
    x = transpose(x, (0, 2, 4, 1, 3, 5))
    return reshape(x, (b, hp * wp, c * patch * patch))


def conv_nonoverlap(images: Tensor, kernels: Tensor) -> Tensor:
    """Non-overlapping (stride = kernel size) convolution.

    ``images`` is (C, H, W) or (B, C, H, W); ``kernels`` is (K, C, p, p).
    Each output position is the contraction of one disjoint p×p patch with
    each kernel; returns (K, H/p, W/p) or (B, K, H/p, W/p).
    """
    single = images.data.ndim == 3
    x = reshape(images, (1, *images.shape)) if single else images
    k, c, p, p2 = kernels.shape
    if p != p2:
        raise ValueError("kernels must be square")
    if x.shape[1] != c:
        raise ValueError(f"kernel channels {c} do not match input channels {x.shape[1]}")
    b, _, h, w = x.shape
    patches = patchify(x, p)  # (B, P, C·p·p)
    flat = reshape(patches, (b * patches.shape[1], c * p * p))
    weights = reshape(kernels, (k, c * p * p))
    out = matmul(flat, transpose(weights, (1, 0)))  # (B·P, K)
    hp, wp = h // p, w // p
    out = reshape(out, (b, hp, wp, k))
    out = transpose(out, (0, 3, 1, 2))
    return reshape(out, (k, hp, wp)) if single else out


def batch_normalize(
    batch: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    """Standardize per feature with the supplied batch's statistics, then
    apply the affine transform.  The batch must have at least 2 rows."""
    if batch.data.ndim != 2:
        raise ValueError("batch_normalize expects a (rows, features) batch")
    if batch.shape[0] < 2:
        raise ValueError("batch normalization needs at least 2 rows")
    mu = mean(batch, axis=0, keepdims=True)
    centered = sub(batch, mu)
    var = mean(mul(centered, centered), axis=0, keepdims=True)
    denom = sqrt(add(var, Tensor(np.full((1, batch.shape[1]), eps))))
    normed = div(centered, denom)
    return add(mul(normed, gamma), beta)


def standardize_fixed(
    batch: Tensor, mu: np.ndarray, sigma: np.ndarray, gamma: Tensor, beta: Tensor
) -> Tensor:
    """Affine-normalize with frozen statistics instead of batch statistics."""
    normed = div(sub(batch, Tensor(mu)), Tensor(sigma))
    return add(mul(normed, gamma), beta)


# ---------------------------------------------------------------------------
# initialization and parameters
# ---------------------------------------------------------------------------


def seeded_init(shape, scheme, seed: int) -> np.ndarray:
    """Deterministic array init.

    ``scheme`` is ("gaussian", mean, std) or ("uniform", low, high).  The
    generator is numpy's default PCG64, so the same seed reproduces the
    same bits on every platform and run.
    """
    kind = scheme[0]
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        _, mu, sigma = scheme
        if sigma < 0:
            raise ValueError("standard deviation must be nonnegative")
        return mu + sigma * rng.standard_normal(shape)
    if kind == "uniform":
        _, lo, hi = scheme
        if hi < lo:
            raise ValueError("uniform bounds out of order")
        return rng.uniform(lo, hi, size=shape)
    raise ValueError(f"unknown init scheme {kind!r}")


class ParamStore:
    """Named parameter tensors with a reproducible seed record.

    Each parameter's stream is keyed by the store seed and its name, so
    rebuilding a store from the same seed record reproduces identical bit
    patterns regardless of creation order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._params: dict[str, Tensor] = {}
        self._record: dict[str, tuple] = {}

    def add(self, name: str, shape, scheme) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        data = seeded_init(shape, scheme, derive_seed(self.seed, name))
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        self._record[name] = (tuple(shape), tuple(scheme))
        return t

    def gaussian(self, name: str, shape, mean: float = 0.0, std: float = 1.0) -> Tensor:
        return self.add(name, shape, ("gaussian", mean, std))

    def uniform(self, name: str, shape, low: float, high: float) -> Tensor:
        return self.add(name, shape, ("uniform", low, high))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, shape, ("gaussian", 0.0, 0.0))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def params(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def seed_record(self) -> dict:
        return {
            "seed": self.seed,
            "params": {
                k: {"shape": list(v[0]), "scheme": list(v[1])}
                for k, v in self._record.items()
            },
        }

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for k, arr in arrays.items():
            t = self._params[k]
            if t.data.shape != arr.shape:
                raise ValueError(f"shape mismatch loading {k!r}")
            t.data = np.asarray(arr, dtype=np.float64).copy()


class Adam:
    """Per-parameter adaptive first/second-moment update."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.lr = float(lr)
        self.b1, self.b2 = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self._m[i] = self.b1 * self._m[i] + (1 - self.b1) * g
            self._v[i] = self.b2 * self._v[i] + (1 - self.b2) * g * g
            m_hat = self._m[i] / (1 - self.b1**self.t)
            v_hat = self._v[i] / (1 - self.b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
