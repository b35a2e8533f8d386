"""Small tanh MLPs with hand-written backprop and an Adam optimizer.

Inputs may be a single vector ``(input_dim,)`` or a batch ``(n, input_dim)``.
Layer ``i`` maps ``a_{i} -> tanh(a_i @ W_i + b_i)``; the last layer is affine
and followed by the head (softmax for policies, identity for Q/value nets).
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hems.errors import NumericalError, ValidationError

HEADS = ("softmax-policy", "linear-q", "linear-value")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"
    head: str = "softmax-policy"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValidationError(f"all layer sizes must be >= 1: {self}")
        if self.activation != "tanh":
            raise ValidationError(f"unsupported activation {self.activation!r}")
        if self.head not in HEADS:
            raise ValidationError(f"head must be one of {HEADS}")

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]


Params = list[tuple[np.ndarray, np.ndarray]]  # [(W (fan_in, fan_out), b (fan_out,)), ...]


def _views(flat: np.ndarray, sizes: list[int]) -> Params:
    params, o = [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = flat[o : o + fan_in * fan_out].reshape(fan_in, fan_out)
        o += fan_in * fan_out
        b = flat[o : o + fan_out]
        o += fan_out
        params.append((W, b))
    return params


def n_params(sizes: list[int]) -> int:
    return sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))


def init_params(spec: MlpSpec, rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases; all views into one flat buffer."""
    sizes = spec.sizes
    params = _views(np.zeros(n_params(sizes)), sizes)
    for (W, _), fan_in, fan_out in zip(params, sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return params


def flat_buffer(params: Params) -> np.ndarray | None:
    """The shared 1-D buffer behind ``params``, if they were built by ``_views``."""
    base = params[0][0].base
    if base is None or base.ndim != 1 or base.size != sum(W.size + b.size for W, b in params):
        return None
    if any(x.base is not base for pair in params for x in pair):
        return None
    return base


def params_from_arrays(arrays: list[tuple[np.ndarray, np.ndarray]]) -> Params:
    sizes = [arrays[0][0].shape[0]] + [W.shape[1] for W, _ in arrays]
    params = _views(np.zeros(n_params(sizes)), sizes)
    for (W, b), (W0, b0) in zip(params, arrays):
        W[...] = W0
        b[...] = b0
    return params


def zeros_like(params: Params) -> Params:
    return [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]


def copy_params(params: Params) -> Params:
    return params_from_arrays(params)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(params: Params, spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.input_dim or x.ndim not in (1, 2):
        raise ValidationError(f"input shape {x.shape} incompatible with input_dim={spec.input_dim}")
    if len(params) != len(spec.sizes) - 1:
        raise ValidationError("parameter list does not match the spec")
    return x


def forward_cache(params: Params, spec: MlpSpec, x) -> tuple[list[np.ndarray], np.ndarray]:
    """Layer inputs (for backprop) and the final pre-head output."""
    a = _check_input(params, spec, x)
    acts = [a]
    for W, b in params[:-1]:
        a = np.tanh(a @ W + b)
        acts.append(a)
    W, b = params[-1]
    return acts, a @ W + b


def forward(params: Params, spec: MlpSpec, x) -> np.ndarray:
    _, z = forward_cache(params, spec, x)
    return softmax(z) if spec.head == "softmax-policy" else z


def backward_logits(params: Params, acts: list[np.ndarray], grad_z: np.ndarray) -> Params:
    """Parameter gradients given d(loss)/d(pre-head output), summed over the batch."""
    grads = [None] * len(params)
    delta = grad_z
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        a = acts[i]
        if a.ndim == 1:
            gW = np.outer(a, delta)
            gb = delta.copy()
        else:
            gW = a.T @ delta
            gb = delta.sum(axis=0)
        grads[i] = (gW, gb)
        if i > 0:
            delta = (delta @ W.T) * (1.0 - acts[i] ** 2)
    return grads


def backward(params: Params, spec: MlpSpec, x, upstream) -> Params:
    """Gradient of ``sum(upstream * forward(x))`` with respect to the parameters."""
    acts, z = forward_cache(params, spec, x)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != z.shape:
        raise ValidationError(f"upstream gradient shape {g.shape} != output shape {z.shape}")
    if spec.head == "softmax-policy":
        p = softmax(z)
        g = p * (g - (g * p).sum(axis=-1, keepdims=True))
    return backward_logits(params, acts, g)


@dataclass
class Adam:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)  # flat, parameter order
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")

    def step(self, params: Params, grads: Params) -> Params:
        """Apply one descent step in place and return ``params``."""
        g = np.concatenate([x.ravel() for pair in grads for x in pair])
        if not np.isfinite(g).all():
            raise NumericalError("non-finite gradient")
        if self.m is None:
            self.m, self.v = np.zeros_like(g), np.zeros_like(g)
        elif self.m.shape != g.shape:
            raise ValidationError("gradient size changed between optimizer steps")
        self.t += 1
        m, v = self.m, self.v
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * (g * g)
        update = self.learning_rate * (m / (1.0 - self.beta1**self.t)) / (
            np.sqrt(v / (1.0 - self.beta2**self.t)) + self.eps
        )
        flat = flat_buffer(params)
        if flat is not None:
            flat -= update
        else:
            o = 0
            for pair in params:
                for x in pair:
                    x -= update[o : o + x.size].reshape(x.shape)
                    o += x.size
        return params


@dataclass
class Network:
    """Spec + parameters, the unit that trainers pass around and save."""

    spec: MlpSpec
    params: Params

    @classmethod
    def create(cls, spec: MlpSpec, rng: np.random.Generator) -> "Network":
        return cls(spec, init_params(spec, rng))

    def __call__(self, x) -> np.ndarray:
        return forward(self.params, self.spec, x)

    def copy(self) -> "Network":
        return Network(self.spec, copy_params(self.params))

    def greedy(self, x) -> int:
        # np.argmax returns the first maximum: ties go to action 0
        return int(np.argmax(self(x)))


def network_to_dict(net: Network, **meta) -> dict:
    """JSON layout: ``layers[i]`` holds ``W`` flattened row-major with shape
    ``[fan_in, fan_out]`` and bias ``b``; layers ordered input to output."""
    d = {"spec": {**asdict(net.spec), "hidden": list(net.spec.hidden)}}
    d["layers"] = [
        {"shape": list(W.shape), "W": W.ravel().tolist(), "b": b.tolist()} for W, b in net.params
    ]
    d.update(meta)
    return d


def network_from_dict(d: dict) -> Network:
    try:
        spec = MlpSpec(**d["spec"])
        arrays = []
        for layer in d["layers"]:
            W = np.array(layer["W"], dtype=np.float64).reshape(layer["shape"])
            arrays.append((W, np.array(layer["b"], dtype=np.float64)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed network file: {exc}") from exc
    sizes = spec.sizes
    if len(arrays) != len(sizes) - 1:
        raise ValidationError("layer count does not match the spec")
    for (W, b), fi, fo in zip(arrays, sizes[:-1], sizes[1:]):
        if W.shape != (fi, fo) or b.shape != (fo,):
            raise ValidationError("layer shapes do not match the spec")
    return Network(spec, params_from_arrays(arrays))


def save_network(net: Network, path: str | os.PathLike, **meta) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net, **meta), indent=1) + "\n")


def load_network(path: str | os.PathLike) -> tuple[Network, dict]:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read policy file {path}: {exc}") from exc
    return network_from_dict(d), d
