"""Minimal feedforward generative-model engine.

Three affine layers with batch normalization and rectifier units between
them, a simplex (softmax) or positive (exponential) output head, exact
reverse-mode gradients, and bias-corrected Adam updates. Nets transform
standard-normal noise into samples; nothing here knows about copulas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, TrainingDivergenceError
from .util import as_rng

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1

SIMPLEX_HEAD = "simplex"
POSITIVE_HEAD = "positive"


@dataclass
class TrainConfig:
    """Optimizer and loop settings shared by both training algorithms."""

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 128
    max_iters: int = 2000
    seed: int = 0
    penalty_weight: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")


class GenerativeNet:
    """Noise-to-sample multilayer perceptron with a constrained output head.

    Parameters live in `params` as flat numpy arrays. `mode` selects batch
    statistics ("training") or frozen running statistics ("sampling") for
    the normalization layers; frozen nets are deterministic given the
    noise input.
    """

    def __init__(self, input_dim: int, hidden_dim: int, output_dim: int,
                 head: str, rng=None):
        if head not in (SIMPLEX_HEAD, POSITIVE_HEAD):
            raise InvalidInputError(f"unknown output head {head!r}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.output_dim = output_dim
        self.head = head
        self.mode = "sampling"
        rng = as_rng(rng if rng is not None else 0)
        dims = [(input_dim, hidden_dim), (hidden_dim, hidden_dim),
                (hidden_dim, output_dim)]
        self.params: dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(dims):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
        for i in (0, 1):
            self.params[f"gamma{i}"] = np.ones(hidden_dim)
            self.params[f"beta{i}"] = np.zeros(hidden_dim)
        # running statistics are state, not trainable parameters
        self.running_mean = [np.zeros(hidden_dim), np.zeros(hidden_dim)]
        self.running_var = [np.ones(hidden_dim), np.ones(hidden_dim)]

    def param_names(self) -> list[str]:
        return sorted(self.params)

    def forward(self, noise: np.ndarray, mode: str | None = None):
        """Run the net on noise rows; returns (samples, cache) for backward."""
        mode = mode or self.mode
        p = self.params
        cache = {"mode": mode, "z": noise}
        h = noise
        for i in (0, 1):
            a = h @ p[f"W{i}"] + p[f"b{i}"]
            if mode == "training":
                mu = a.mean(axis=0)
                var = a.var(axis=0)
                self.running_mean[i] = (1 - _BN_MOMENTUM) * self.running_mean[i] + _BN_MOMENTUM * mu
                self.running_var[i] = (1 - _BN_MOMENTUM) * self.running_var[i] + _BN_MOMENTUM * var
            else:
                mu = self.running_mean[i]
                var = self.running_var[i]
            inv_std = 1.0 / np.sqrt(var + _BN_EPS)
            xhat = (a - mu) * inv_std
            bn = p[f"gamma{i}"] * xhat + p[f"beta{i}"]
            relu_mask = bn > 0
            h_next = bn * relu_mask
            cache[f"layer{i}"] = (h, a, xhat, inv_std, relu_mask)
            h = h_next
        a2 = h @ p["W2"] + p["b2"]
        if self.head == SIMPLEX_HEAD:
            shifted = a2 - a2.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            out = e / e.sum(axis=1, keepdims=True)
        else:
            out = np.exp(np.clip(a2, -60.0, 60.0))
        cache["layer2"] = (h, a2, out)
        return out, cache

    def backward(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter.

        `dout` is the loss gradient w.r.t. the sample matrix returned by
        the matching forward call.
        """
        p = self.params
        grads = {}
        h2, a2, out = cache["layer2"]
        if self.head == SIMPLEX_HEAD:
            # rowwise softmax Jacobian: da = y * (dy - sum(dy * y))
            inner = (dout * out).sum(axis=1, keepdims=True)
            da2 = out * (dout - inner)
        else:
            da2 = dout * out
        grads["W2"] = h2.T @ da2
        grads["b2"] = da2.sum(axis=0)
        dh = da2 @ p["W2"].T
        for i in (1, 0):
            h_in, a, xhat, inv_std, relu_mask = cache[f"layer{i}"]
            dbn = dh * relu_mask
            grads[f"gamma{i}"] = (dbn * xhat).sum(axis=0)
            grads[f"beta{i}"] = dbn.sum(axis=0)
            dxhat = dbn * p[f"gamma{i}"]
            if cache["mode"] == "training":
                b = a.shape[0]
                dvar = (dxhat * (a - a.mean(axis=0)) * -0.5 * inv_std**3).sum(axis=0)
                dmu = (-dxhat * inv_std).sum(axis=0) + dvar * (-2.0 / b) * (a - a.mean(axis=0)).sum(axis=0)
                da = dxhat * inv_std + dvar * 2.0 * (a - a.mean(axis=0)) / b + dmu / b
            else:
                da = dxhat * inv_std
            grads[f"W{i}"] = h_in.T @ da
            grads[f"b{i}"] = da.sum(axis=0)
            dh = da @ p[f"W{i}"].T
        return grads

    def sample(self, count: int, seed) -> np.ndarray:
        """Draw `count` outputs from standard-normal noise in current mode."""
        rng = as_rng(seed)
        noise = rng.standard_normal(size=(count, self.input_dim))
        out, _ = self.forward(noise)
        return out

    def clone(self) -> "GenerativeNet":
        other = GenerativeNet(self.input_dim, self.hidden_dim, self.output_dim,
                              self.head)
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.running_mean = [v.copy() for v in self.running_mean]
        other.running_var = [v.copy() for v in self.running_var]
        other.mode = self.mode
        return other

    def to_dict(self) -> dict:
        """Value-exact JSON-ready encoding (floats as decimal strings)."""
        return {
            "kind": "generative-net",
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "output_dim": self.output_dim,
            "head": self.head,
            "params": {k: _encode_array(v) for k, v in self.params.items()},
            "running_mean": [_encode_array(v) for v in self.running_mean],
            "running_var": [_encode_array(v) for v in self.running_var],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GenerativeNet":
        if doc.get("kind") != "generative-net":
            raise InvalidInputError("not a generative-net document")
        net = cls(doc["input_dim"], doc["hidden_dim"], doc["output_dim"], doc["head"])
        shapes = {k: v.shape for k, v in net.params.items()}
        net.params = {k: _decode_array(v).reshape(shapes[k]) for k, v in doc["params"].items()}
        net.running_mean = [_decode_array(v) for v in doc["running_mean"]]
        net.running_var = [_decode_array(v) for v in doc["running_var"]]
        return net

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GenerativeNet":
        return cls.from_dict(json.loads(text))


def _encode_array(arr: np.ndarray) -> list[str]:
    # repr of a Python float is the shortest decimal string that round-trips
    return [repr(float(v)) for v in np.asarray(arr).ravel()]


def _decode_array(items: list[str]) -> np.ndarray:
    return np.array([float(v) for v in items], dtype=float)


def backward(net: GenerativeNet, loss_fn, count: int, seed,
             mode: str = "training"):
    """Gradients of loss_fn(samples) w.r.t. all net parameters.

    `loss_fn` maps a sample matrix to (loss, dloss/dsamples). Raises on a
    non-finite loss.
    """
    rng = as_rng(seed)
    noise = rng.standard_normal(size=(count, net.input_dim))
    out, cache = net.forward(noise, mode=mode)
    loss, dout = loss_fn(out)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"loss is non-finite: {loss}")
    return loss, net.backward(cache, np.asarray(dout, dtype=float))


@dataclass
class AdamState:
    """First/second moment accumulators for one net."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(net: GenerativeNet, grads: dict[str, np.ndarray],
              config: TrainConfig, state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place."""
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        mhat = state.m[name] / (1 - b1**state.t)
        vhat = state.v[name] / (1 - b2**state.t)
        net.params[name] -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)


def gradient_check(net: GenerativeNet, loss_fn, count: int, seed,
                   step: float = 1e-5, mode: str = "training") -> float:
    """Fraction of parameters whose analytic gradient matches central
    finite differences to 1e-4 relative error (1e-7 absolute floor)."""
    rng = as_rng(seed)
    noise = rng.standard_normal(size=(count, net.input_dim))

    def eval_loss():
        out, _ = net.forward(noise, mode=mode)
        return loss_fn(out)[0]

    out, cache = net.forward(noise, mode=mode)
    _, dout = loss_fn(out)
    grads = net.backward(cache, np.asarray(dout, dtype=float))
    # forward() mutates running stats in training mode; freeze them for FD
    saved = ([v.copy() for v in net.running_mean], [v.copy() for v in net.running_var])
    ok = 0
    total = 0
    for name in net.param_names():
        arr = net.params[name]
        flat = arr.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            net.running_mean, net.running_var = ([v.copy() for v in saved[0]],
                                                 [v.copy() for v in saved[1]])
            up = eval_loss()
            flat[idx] = orig - step
            net.running_mean, net.running_var = ([v.copy() for v in saved[0]],
                                                 [v.copy() for v in saved[1]])
            down = eval_loss()
            flat[idx] = orig
            fd = (up - down) / (2 * step)
            an = grads[name].ravel()[idx]
            denom = max(abs(fd), abs(an), 1e-3)
            if abs(fd - an) <= 1e-4 * denom + 1e-7:
                ok += 1
            total += 1
    net.running_mean, net.running_var = saved
    return ok / total
