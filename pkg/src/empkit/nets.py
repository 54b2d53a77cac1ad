"""Feedforward networks with point evaluation and Gaussian moment propagation.

A network is a sequence of layers, each an affine map followed by an
elementwise activation.  Two evaluation modes exist:

* ``forward_point``: ordinary forward pass on a vector.
* ``forward_moments``: pushes a diagonal Gaussian through the network.
  Affine layers use the exact linear-Gaussian rule (off-diagonal output
  covariance dropped), nonlinear activations use the first-order delta
  method: mean -> f(mu), variance -> f'(mu)^2 * var.

Activations may be a single tag applied to the whole layer or a per-unit
list of tags; the latter is needed to express mixed branches (e.g. a sine
branch next to pass-through units) in a single layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gaussian import DiagonalGaussian

__all__ = [
    "ACTIVATION_TAGS",
    "LayerSpec",
    "FeedforwardNet",
    "DynamicsModel",
    "forward_point",
    "propagate_linear",
    "propagate_activation",
    "forward_moments",
    "net_to_json",
    "net_from_json",
]

VAR_FLOOR = 1e-8

# tag -> (f, f', f'')
_ACT = {
    "identity": (
        lambda z: z,
        lambda z: np.ones_like(z),
        lambda z: np.zeros_like(z),
    ),
    "tanh": (
        np.tanh,
        lambda z: 1.0 - np.tanh(z) ** 2,
        lambda z: -2.0 * np.tanh(z) * (1.0 - np.tanh(z) ** 2),
    ),
    "sine": (np.sin, np.cos, lambda z: -np.sin(z)),
    "cosine": (np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z)),
    "square": (
        lambda z: z * z,
        lambda z: 2.0 * z,
        lambda z: np.full_like(z, 2.0),
    ),
}

ACTIVATION_TAGS = frozenset(_ACT)


@dataclass(frozen=True)
class LayerSpec:
    """One affine + activation layer.

    ``activation`` is either a single tag (applied to every unit) or a
    sequence of tags, one per output unit.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: object = "identity"
    tags: tuple = field(init=False, repr=False, compare=False)
    _groups: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise ValueError("weights must be a matrix (out x in)")
        if b.ndim != 1 or b.size != w.shape[0]:
            raise ValueError("bias length must equal weights row count")
        act = self.activation
        if isinstance(act, str):
            tags = (act,) * w.shape[0]
        else:
            tags = tuple(act)
            if len(tags) != w.shape[0]:
                raise ValueError("per-unit activation list must match output dim")
        for t in tags:
            if t not in _ACT:
                raise ValueError(f"unknown activation tag: {t!r}")
        # index groups per distinct tag, for vectorized slice application
        groups = []
        for t in dict.fromkeys(tags):
            idx = np.flatnonzero([u == t for u in tags])
            idx.setflags(write=False)
            groups.append((t, idx))
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "_groups", tuple(groups))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def uniform_tag(self):
        return self.tags[0] if len(self._groups) == 1 else None

    def act(self, z: np.ndarray, order: int = 0) -> np.ndarray:
        """Apply f (order=0), f' (order=1) or f'' (order=2) elementwise."""
        if len(self._groups) == 1:
            return _ACT[self.tags[0]][order](z)
        out = np.empty_like(z)
        for tag, idx in self._groups:
            out[..., idx] = _ACT[tag][order](z[..., idx])
        return out


@dataclass(frozen=True)
class FeedforwardNet:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer dimensions do not chain: {a.out_dim} -> {b.in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True)
class DynamicsModel:
    """Gaussian one-step dynamics p(x'|x,a) packaged as a network.

    The network maps (state, action) to 2*state_dim outputs: the first
    half is the next-state mean, the second half the next-state
    log-standard-deviation.
    """

    net: FeedforwardNet
    state_dim: int
    action_dim: int

    def __post_init__(self):
        if self.net.in_dim != self.state_dim + self.action_dim:
            raise ValueError("net input dim must equal state_dim + action_dim")
        if self.net.out_dim != 2 * self.state_dim:
            raise ValueError("net output dim must equal 2 * state_dim")

    def conditional(self, state, action) -> DiagonalGaussian:
        """p(x'|x,a) as a DiagonalGaussian."""
        x = np.concatenate([np.atleast_1d(state), np.atleast_1d(action)])
        y = forward_point(self.net, x)
        d = self.state_dim
        return DiagonalGaussian(y[:d], np.exp(2.0 * y[d:]))


def forward_point(net: FeedforwardNet, x) -> np.ndarray:
    """Plain forward pass; accepts a vector or a batch of row vectors."""
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != net.in_dim:
        raise ValueError(
            f"input dim {h.shape[-1]} does not match net input {net.in_dim}"
        )
    for layer in net.layers:
        h = layer.act(h @ layer.weights.T + layer.bias)
    return h


def propagate_linear(layer: LayerSpec, g: DiagonalGaussian) -> DiagonalGaussian:
    """Exact diagonal moment rule for an affine (identity-activation) layer."""
    if layer.uniform_tag() != "identity":
        raise ValueError("propagate_linear requires an identity-activation layer")
    if g.dim != layer.in_dim:
        raise ValueError("input dimension mismatch")
    mean = layer.weights @ g.mean + layer.bias
    var = (layer.weights**2) @ g.variance
    return DiagonalGaussian(mean, var)


def propagate_activation(
    tag: str, g: DiagonalGaussian, var_floor: float = VAR_FLOOR
) -> DiagonalGaussian:
    """First-order delta rule for an elementwise activation.

    mean -> f(mu), variance -> f'(mu)^2 var, floored at ``var_floor``.
    Exact for tag='identity' (up to the floor).
    """
    if tag not in _ACT:
        raise ValueError(f"unknown activation tag: {tag!r}")
    f, df, _ = _ACT[tag]
    mean = f(g.mean)
    var = np.maximum(df(g.mean) ** 2 * g.variance, var_floor)
    return DiagonalGaussian(mean, var)


def forward_moments(
    net: FeedforwardNet, g: DiagonalGaussian, var_floor: float = VAR_FLOOR
) -> DiagonalGaussian:
    """Push a diagonal Gaussian through the network layer by layer."""
    m, v, _ = _moments_trace(net, g.mean, g.variance, var_floor)
    return DiagonalGaussian(m, v)


# ---------------------------------------------------------------------------
# traced forward passes + hand-rolled reverse mode, used by the empowerment
# objective gradient (the nets here are tiny; autodiff frameworks are not
# worth the dependency).


def _moments_trace(net, m, v, var_floor=VAR_FLOOR):
    """Forward moment pass recording per-layer intermediates for backprop."""
    trace = []
    for layer in net.layers:
        ma = layer.weights @ m + layer.bias
        va = (layer.weights**2) @ v
        raw = layer.act(ma, 1) ** 2 * va
        mask = raw > var_floor
        m = layer.act(ma)
        v = np.where(mask, raw, var_floor)
        trace.append((layer, ma, va, mask))
    return m, v, trace


def _moments_backprop(trace, gm, gv):
    """Reverse pass of _moments_trace; returns grads wrt input mean/variance."""
    for layer, ma, va, mask in reversed(trace):
        df = layer.act(ma, 1)
        d2f = layer.act(ma, 2)
        gv_raw = np.where(mask, gv, 0.0)
        gma = df * gm + 2.0 * df * d2f * va * gv_raw
        gva = df**2 * gv_raw
        gm = layer.weights.T @ gma
        gv = (layer.weights**2).T @ gva
    return gm, gv


def _point_trace(net, x):
    """Batched forward pass recording pre-activations for backprop."""
    h = np.asarray(x, dtype=float)
    trace = []
    for layer in net.layers:
        z = h @ layer.weights.T + layer.bias
        trace.append((layer, z))
        h = layer.act(z)
    return h, trace


def _point_backprop(trace, gy):
    for layer, z in reversed(trace):
        gz = layer.act(z, 1) * gy
        gy = gz @ layer.weights
    return gy


# ---------------------------------------------------------------------------
# JSON serialization


def _layer_to_dict(layer: LayerSpec) -> dict:
    tag = layer.uniform_tag()
    return {
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
        "activation": tag if tag is not None else list(layer.tags),
    }


def net_to_json(net: FeedforwardNet) -> str:
    return json.dumps({"layers": [_layer_to_dict(l) for l in net.layers]})


def net_from_json(doc: str) -> FeedforwardNet:
    data = json.loads(doc)
    layers = []
    for entry in data["layers"]:
        act = entry["activation"]
        layers.append(
            LayerSpec(
                np.asarray(entry["weights"], dtype=float),
                np.asarray(entry["bias"], dtype=float),
                act if isinstance(act, str) else tuple(act),
            )
        )
    return FeedforwardNet(tuple(layers))
