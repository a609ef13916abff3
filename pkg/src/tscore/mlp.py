"""Dense MLP networks with explicit reverse-mode gradients, SVD, and ADAM.

Everything runs in float64. Networks are plain weight/bias stacks with a
fixed activation per layer ("swish" or "linear"); gradients are computed by
per-layer backward rules rather than a general autodiff graph, which keeps
training fully deterministic and easy to check against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


class TapeMismatchError(RuntimeError):
    """Backward pass called with a tape that does not match the network."""


def _as_float_array(x, name: str) -> Array:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def sigmoid(x: Array) -> Array:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x: Array) -> Array:
    """x * sigmoid(x)."""
    return x * sigmoid(x)


def swish_prime(x: Array) -> Array:
    s = sigmoid(x)
    return s + x * s * (1.0 - s)


def _activation(name: str, pre: Array) -> Array:
    if name == "swish":
        return swish(pre)
    if name == "linear":
        return pre
    raise ValueError(f"unknown activation {name!r}")


def _activation_prime(name: str, pre: Array) -> Array:
    if name == "swish":
        return swish_prime(pre)
    if name == "linear":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {name!r}")


def _affine(x: Array, weight: Array, bias: Array) -> Array:
    """x @ weight + bias with a fixed per-row reduction order.

    BLAS matmul rounds differently depending on batch shape; accumulating
    over input features keeps every row's result identical whether it is
    evaluated alone or inside any batch, which the scoring paths rely on.
    """
    out = np.broadcast_to(bias, (x.shape[0], bias.shape[0])).copy()
    for i in range(weight.shape[0]):
        out += x[:, i : i + 1] * weight[i : i + 1, :]
    return out


@dataclass
class Layer:
    """One dense layer: out = act(x @ weight + bias)."""

    weight: Array  # (in_dim, out_dim)
    bias: Array  # (out_dim,)
    activation: str  # "swish" | "linear"

    def __post_init__(self):
        self.weight = _as_float_array(self.weight, "weight")
        self.bias = _as_float_array(self.bias, "bias")
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("weight must be 2-D and bias 1-D")
        if self.bias.shape[0] != self.weight.shape[1]:
            raise ValueError("bias length must equal weight cols")
        if self.activation not in ("swish", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Tape:
    """Cached forward-pass state, sufficient for one exact backward pass."""

    inputs: list[Array]  # input to each layer, (n, in_dim_l)
    pres: list[Array]  # pre-activations, (n, out_dim_l)
    layer_shapes: list[tuple[int, int]]


@dataclass
class Mlp:
    """Fully-connected network; adjacent layer dims must chain."""

    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("adjacent layer dimensions do not chain")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @classmethod
    def create(
        cls,
        in_dim: int,
        hidden: int,
        out_dim: int,
        rng: np.random.Generator,
        n_hidden: int = 3,
    ) -> "Mlp":
        """Standard stack: n_hidden swish layers plus a linear output layer.

        Weights are uniform in +-sqrt(6/(fan_in+fan_out)); biases zero.
        """
        dims = [in_dim] + [hidden] * n_hidden + [out_dim]
        acts = ["swish"] * n_hidden + ["linear"]
        layers = []
        for (fi, fo), act in zip(zip(dims, dims[1:]), acts):
            bound = np.sqrt(6.0 / (fi + fo))
            w = rng.uniform(-bound, bound, size=(fi, fo))
            layers.append(Layer(w, np.zeros(fo), act))
        return cls(layers)

    def forward(self, batch: Array) -> tuple[Array, Tape]:
        """Forward pass over a (n, in_dim) batch; returns output and tape."""
        x = _as_float_array(batch, "batch")
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"batch has shape {x.shape}, expected (n, {self.in_dim})"
            )
        inputs, pres = [], []
        for layer in self.layers:
            inputs.append(x)
            pre = _affine(x, layer.weight, layer.bias)
            pres.append(pre)
            x = _activation(layer.activation, pre)
        tape = Tape(inputs, pres, [l.weight.shape for l in self.layers])
        return x, tape

    def __call__(self, batch: Array) -> Array:
        return self.forward(batch)[0]

    def backward(self, tape: Tape, upstream: Array) -> tuple[list[Array], Array]:
        """Backpropagate an upstream (n, out_dim) gradient through the tape.

        Returns ([dW0, db0, dW1, db1, ...], d_input). The gradient list is
        parallel to :meth:`params`.
        """
        if tape.layer_shapes != [l.weight.shape for l in self.layers]:
            raise TapeMismatchError("tape does not match network layout")
        g = np.asarray(upstream, dtype=np.float64)
        if g.shape != tape.pres[-1].shape:
            raise TapeMismatchError(
                f"upstream gradient shape {g.shape} does not match "
                f"forward output {tape.pres[-1].shape}"
            )
        grads: list[Array] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            d_pre = g * _activation_prime(layer.activation, tape.pres[i])
            grads[2 * i] = tape.inputs[i].T @ d_pre
            grads[2 * i + 1] = d_pre.sum(axis=0)
            g = d_pre @ layer.weight.T
        return grads, g

    def jacobian(self, x: Array) -> Array:
        """Exact (out_dim, in_dim) Jacobian at a single input point."""
        return self.jacobian_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def jacobian_batch(self, batch: Array) -> Array:
        """Stacked Jacobians, shape (n, out_dim, in_dim)."""
        x = _as_float_array(batch, "batch")
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"batch has shape {x.shape}, expected (n, {self.in_dim})"
            )
        jac = None
        for layer in self.layers:
            pre = _affine(x, layer.weight, layer.bias)
            dact = _activation_prime(layer.activation, pre)
            # layer Jacobian: diag(dact) @ W.T, batched
            jl = dact[:, :, None] * layer.weight.T[None, :, :]
            jac = jl if jac is None else jl @ jac
            x = _activation(layer.activation, pre)
        return jac

    def params(self) -> list[Array]:
        """Live references [W0, b0, W1, b1, ...]; mutate to update the net."""
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weight": l.weight.tolist(),
                    "bias": l.bias.tolist(),
                    "activation": l.activation,
                }
                for l in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        return cls(
            [
                Layer(
                    np.array(l["weight"], dtype=np.float64),
                    np.array(l["bias"], dtype=np.float64),
                    l["activation"],
                )
                for l in d["layers"]
            ]
        )

    def copy(self) -> "Mlp":
        return Mlp(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


def svd(m: Array) -> tuple[Array, Array, Array]:
    """Thin SVD of a real matrix: m == U @ diag(s) @ Vt.

    Singular values come back non-negative in descending order. Raises
    ValueError on non-finite or non-2-D input.
    """
    a = _as_float_array(m, "matrix")
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"svd expects a non-empty 2-D matrix, got shape {a.shape}")
    return np.linalg.svd(a, full_matrices=False)


@dataclass
class Adam:
    """ADAM optimizer state over a list of parameter arrays.

    Defaults follow the usual setting: lr 1e-3, beta1 0.9, beta2 0.999,
    eps 1e-8.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[Array] = field(default_factory=list)
    v: list[Array] = field(default_factory=list)

    def step(self, params: list[Array], grads: list[Array]) -> list[Array]:
        """Apply one bias-corrected ADAM update in place; returns params."""
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(params) != len(grads) or len(params) != len(self.m):
            raise ValueError("params/grads do not match optimizer state")
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape or p.shape != m.shape:
                raise ValueError(
                    f"shape mismatch: param {p.shape} vs grad {g.shape}"
                )
        self.step_count += 1
        b1t = 1.0 - self.beta1**self.step_count
        b2t = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return params
