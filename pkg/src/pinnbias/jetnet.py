"""Fully-connected scalar network with exact input-derivative jets.

The network maps a scalar ``x`` to a scalar ``u``.  Besides the value, the
forward pass carries the first three derivatives ``du/dx .. d3u/dx3`` through
every layer (affine layers act linearly on jets, activations follow the
univariate Faa di Bruno rules).  ``backprop_jet`` runs the reverse pass over
that jet computation, giving parameter gradients of any linear combination
of the jet components.

All arrays are float64.  Inputs may be scalars or 1-D arrays of points; the
per-point results are then arrays and parameter gradients are summed over
points.
"""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels

DEFAULT_LAYERS = (1, 100, 100, 1)
MAX_ACTIVATION_ORDER = 4
MAX_JET_ORDER = 3

_KIND = {"tanh": _kernels.TANH, "swish": _kernels.SWISH}

_CHECKPOINT_MAGIC = b"PBJN"
_CHECKPOINT_VERSION = 1


class StructureError(ValueError):
    """Invalid network layout or mismatched shapes."""


class UnsupportedOrderError(ValueError):
    """Derivative order beyond what the activation supports."""


class CheckpointError(OSError):
    """Unreadable or corrupt parameter checkpoint."""


# ---------------------------------------------------------------- activations


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclasses.dataclass(frozen=True)
class Activation:
    kind: str = "tanh"

    def __post_init__(self):
        if self.kind not in ("tanh", "swish"):
            raise ValueError(f"unknown activation {self.kind!r}")

    def derivatives(self, a, max_order: int) -> list:
        """Return ``[s(a), s'(a), ..., s^(max_order)(a)]`` elementwise."""
        if max_order < 0 or max_order > MAX_ACTIVATION_ORDER:
            raise UnsupportedOrderError(
                f"activation derivatives available up to order "
                f"{MAX_ACTIVATION_ORDER}, got {max_order}"
            )
        a = np.asarray(a, dtype=np.float64)
        n = max_order
        if self.kind == "tanh":
            t = np.tanh(a)
            out = [t]
            if n >= 1:
                out.append(1.0 - t * t)
            if n >= 2:
                out.append(-2.0 * t * out[1])
            if n >= 3:
                out.append(-2.0 * out[1] * out[1] - 2.0 * t * out[2])
            if n >= 4:
                out.append(-6.0 * out[1] * out[2] - 2.0 * t * out[3])
            return out
        # swish(a) = a * p(a) with p the logistic sigmoid;
        # swish^(k) = a p^(k) + k p^(k-1)
        p = [_sigmoid(a)]
        q = 1.0 - 2.0 * p[0]
        if n >= 1:
            p.append(p[0] * (1.0 - p[0]))
        if n >= 2:
            p.append(p[1] * q)
        if n >= 3:
            p.append(p[2] * q - 2.0 * p[1] * p[1])
        if n >= 4:
            p.append(p[3] * q - 6.0 * p[1] * p[2])
        return [a * p[0]] + [a * p[k] + k * p[k - 1] for k in range(1, n + 1)]


def activation_derivatives(act: Activation | str, a: float, max_order: int) -> list[float]:
    if isinstance(act, str):
        act = Activation(act)
    return [float(v) for v in act.derivatives(a, max_order)]


# ---------------------------------------------------------------- parameters


@dataclasses.dataclass
class ParamVector:
    """Weights and biases of a ``1 -> ... -> 1`` network.

    ``weights[l]`` has shape ``(sizes[l+1], sizes[l])``.  With
    ``use_bias=False`` the biases are pinned at zero and excluded from
    :meth:`flat`, which gives a pure linear-in-parameters model for the
    single-layer case.
    """

    weights: list
    biases: list
    use_bias: bool = True

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        validate_layer_sizes(self.layer_sizes)
        if len(self.biases) != len(self.weights):
            raise StructureError("one bias vector per weight matrix required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise StructureError(f"layer {l}: weight {w.shape} / bias {b.shape}")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise StructureError(f"layer {l}: input width mismatch")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def size(self) -> int:
        n = sum(w.size for w in self.weights)
        if self.use_bias:
            n += sum(b.size for b in self.biases)
        return n

    def arrays(self) -> list:
        """Trainable arrays in canonical order (w0, b0, w1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            if self.use_bias:
                out.append(b)
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec) -> "ParamVector":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise StructureError(f"flat vector of length {self.size} expected, got {vec.shape}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vec[pos : pos + w.size].reshape(w.shape))
            pos += w.size
            if self.use_bias:
                biases.append(vec[pos : pos + b.size].copy())
                pos += b.size
            else:
                biases.append(np.zeros_like(b))
        return ParamVector(weights, biases, self.use_bias)

    def zeros_like(self) -> "ParamVector":
        return ParamVector(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
            self.use_bias,
        )

    def copy(self) -> "ParamVector":
        return ParamVector(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.use_bias
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.weights + self.biases)


def validate_layer_sizes(sizes: Sequence[int]) -> None:
    sizes = list(sizes)
    if len(sizes) < 2:
        raise StructureError("at least an input and an output layer are required")
    if sizes[0] != 1 or sizes[-1] != 1:
        raise StructureError(f"scalar network needs first/last size 1, got {sizes}")
    if any(int(s) != s or s < 1 for s in sizes):
        raise StructureError(f"layer sizes must be positive integers, got {sizes}")


def init_params(
    seed: int,
    layer_sizes: Sequence[int] = DEFAULT_LAYERS,
    scheme: str = "glorot",
    use_bias: bool = True,
    bias_std: float = 0.0,
) -> ParamVector:
    """Gaussian weights; biases zero unless ``bias_std`` is set.

    ``glorot``: variance 2/(fan_in + fan_out); ``lecun``: 1/fan_in;
    ``ntk``: unit variance (intended for width-scaled parametrisations).
    """
    validate_layer_sizes(layer_sizes)
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        if scheme == "glorot":
            var = 2.0 / (fan_in + fan_out)
        elif scheme == "lecun":
            var = 1.0 / fan_in
        elif scheme == "ntk":
            var = 1.0
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        weights.append(rng.normal(0.0, np.sqrt(var), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if bias_std and use_bias:
        for b in biases[:-1]:
            b += rng.normal(0.0, bias_std, size=b.shape)
    return ParamVector(weights, biases, use_bias)


# ---------------------------------------------------------------- jets


@dataclasses.dataclass
class Jet3:
    """Network value and its first three x-derivatives."""

    v: np.ndarray | float
    d1: np.ndarray | float
    d2: np.ndarray | float
    d3: np.ndarray | float

    def component(self, k: int):
        return (self.v, self.d1, self.d2, self.d3)[k]


@dataclasses.dataclass
class _Tape:
    x: np.ndarray
    order: int
    pre: list  # per hidden layer: jet of pre-activations, shape (order+1, P, H)
    sig: list  # per hidden layer: activation derivatives 0..order+1
    post: list  # per layer input: jet of inputs, shape (order+1, P, H)


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise StructureError("x must be a scalar or a 1-D array of points")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input point")
    return arr, scalar


def _apply_activation(act: "Activation", a: np.ndarray, sig_order: int):
    """Push a pre-activation jet ``a`` (order+1, P, H) through sigma.

    Returns the output jet and the activation derivatives up to ``sig_order``.
    """
    order = a.shape[0] - 1
    flat = a.reshape(order + 1, -1)
    z = np.empty_like(flat)
    sig = np.empty((sig_order + 1, flat.shape[1]))
    th = np.tanh(flat[0]) if act.kind == "tanh" else np.tanh(0.5 * flat[0])
    _kernels.activate(flat, th, _KIND[act.kind], order, sig_order, z, sig)
    return z.reshape(a.shape), sig


def _forward(params: ParamVector, x: np.ndarray, order: int, act: Activation, keep: bool):
    if order < 0 or order > MAX_JET_ORDER:
        raise UnsupportedOrderError(f"jet order must be 0..{MAX_JET_ORDER}, got {order}")
    P = x.shape[0]
    h = np.zeros((order + 1, P, 1))
    h[0, :, 0] = x
    if order >= 1:
        h[1, :, 0] = 1.0
    sig_order = order + 1 if keep else order
    pre, sig, post = [], [], []
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if l == 0:
            # input jet is (x, 1, 0, 0): skip the matmul
            a = np.zeros((order + 1, P, w.shape[0]))
            a[0] = np.outer(x, w[:, 0])
            if order >= 1:
                a[1] = w[:, 0]
        else:
            a = (h.reshape(-1, h.shape[-1]) @ w.T).reshape(order + 1, P, w.shape[0])
        a[0] += b
        if keep:
            post.append(h)
        if l == last:
            return a[..., 0], _Tape(x, order, pre, sig, post) if keep else None
        h, s = _apply_activation(act, a, sig_order)
        if keep:
            pre.append(a)
            sig.append(s)
    raise AssertionError("unreachable")


def forward_jet(params: ParamVector, x, order: int = 3, activation: Activation | str = "tanh") -> Jet3:
    """Jet (u, u', u'', u''') at ``x``; components above ``order`` are zero."""
    if isinstance(activation, str):
        activation = Activation(activation)
    pts, scalar = _as_points(x)
    out, _ = _forward(params, pts, order, activation, keep=False)
    comps = [out[k] if k <= order else np.zeros_like(out[0]) for k in range(4)]
    if scalar:
        comps = [float(c[0]) for c in comps]
    return Jet3(*comps)


def forward(params: ParamVector, x, activation: Activation | str = "tanh"):
    return forward_jet(params, x, 0, activation).v


def _backward(params: ParamVector, tape: _Tape, g: np.ndarray) -> ParamVector:
    """Reverse pass.  ``g`` has shape (order+1, P): cotangent per jet component."""
    order = tape.order
    grads_w = [None] * params.n_layers
    grads_b = [None] * params.n_layers
    ga = g[..., None]  # cotangent of the last pre-activation jet, (order+1, P, 1)
    for l in range(params.n_layers - 1, -1, -1):
        w = params.weights[l]
        h = tape.post[l]
        grads_b[l] = ga[0].sum(axis=0)
        if l == 0:
            # a0 = w x + b, a1 = w
            gw = ga[0].T @ tape.x
            if order >= 1:
                gw = gw + ga[1].sum(axis=0)
            grads_w[0] = gw[:, None]
            break
        n_in = h.shape[-1]
        grads_w[l] = ga.reshape(-1, ga.shape[-1]).T @ h.reshape(-1, n_in)
        gz = (ga.reshape(-1, ga.shape[-1]) @ w).reshape(order + 1, -1, n_in)
        a = tape.pre[l - 1]
        ga = np.empty_like(a)
        _kernels.activate_reverse(
            gz.reshape(order + 1, -1), a.reshape(order + 1, -1), tape.sig[l - 1], order, ga.reshape(order + 1, -1)
        )
    if not params.use_bias:
        grads_b = [np.zeros_like(b) for b in params.biases]
    return ParamVector(grads_w, grads_b, params.use_bias)


def jet_and_backprop(
    params: ParamVector,
    x,
    cotangent_fn,
    order: int,
    activation: Activation | str = "tanh",
) -> tuple[np.ndarray, ParamVector]:
    """Forward jet, then reverse pass with cotangents computed from the jet.

    ``cotangent_fn(jet)`` receives the (order+1, P) jet array and returns an
    array of the same shape.  Used by the losses to avoid a second forward.
    """
    if isinstance(activation, str):
        activation = Activation(activation)
    pts, _ = _as_points(x)
    out, tape = _forward(params, pts, order, activation, keep=True)
    g = np.asarray(cotangent_fn(out), dtype=np.float64).reshape(order + 1, pts.shape[0])
    return out, _backward(params, tape, g)


def backprop_jet(
    params: ParamVector,
    x,
    cotangents: Sequence,
    activation: Activation | str = "tanh",
) -> ParamVector:
    """Gradient of ``sum_points(w_v v + w_1 d1 + w_2 d2 + w_3 d3)`` w.r.t. params.

    ``cotangents`` holds four entries, each a scalar or a per-point array.
    """
    pts, _ = _as_points(x)
    cot = np.zeros((4, pts.shape[0]))
    for k, c in enumerate(cotangents):
        cot[k] = c
    if not np.all(np.isfinite(cot)):
        raise ValueError("non-finite cotangent")
    nz = np.nonzero(np.any(cot != 0.0, axis=1))[0]
    order = int(nz.max()) if nz.size else 0
    _, grad = jet_and_backprop(params, pts, lambda _: cot[: order + 1], order, activation)
    return grad


# ---------------------------------------------------------------- checkpoints


def save_params(params: ParamVector, path) -> None:
    """Binary checkpoint: magic, version, bias flag, layer sizes, float64 LE data."""
    sizes = params.layer_sizes
    head = _CHECKPOINT_MAGIC + struct.pack(
        "<HBI", _CHECKPOINT_VERSION, int(params.use_bias), len(sizes)
    )
    head += struct.pack(f"<{len(sizes)}I", *sizes)
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for w, b in zip(params.weights, params.biases)
        for a in (w, b)
    )
    Path(path).write_bytes(head + body)


def load_params(path) -> ParamVector:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        if raw[:4] != _CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a parameter checkpoint")
        version, use_bias, n = struct.unpack_from("<HBI", raw, 4)
        if version != _CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        off = 4 + struct.calcsize("<HBI")
        sizes = struct.unpack_from(f"<{n}I", raw, off)
        off += 4 * n
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            cnt = fan_in * fan_out
            weights.append(np.frombuffer(raw, "<f8", cnt, off).reshape(fan_out, fan_in).copy())
            off += 8 * cnt
            biases.append(np.frombuffer(raw, "<f8", fan_out, off).copy())
            off += 8 * fan_out
        if off != len(raw):
            raise CheckpointError(f"{path}: trailing bytes in checkpoint")
        return ParamVector(weights, biases, bool(use_bias))
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
