"""Inference of the stable tail dependence function.

The transformed observation xi = min_j phi^{-1}(u_j)/x_j has survival
function phi(x * l(x)), which gives a likelihood for the spectral model
behind l. Training maximizes that likelihood over directions sampled
uniformly on the simplex, with a penalty keeping spectral coordinate
means at 1/d. The classical rank-based estimators (Pickands, CFG and its
generator-corrected variant) are provided as baselines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import InvalidInputError, TrainingDivergenceError
from .util import as_rng, chunks, spawn_rngs, uniform_simplex

LOGLIK_CLIP = -1e6


def empirical_stdf(pool: np.ndarray, x: np.ndarray, chunk: int = 256) -> np.ndarray:
    """(d/l) * sum_k max_j x_j w_kj for one direction or a batch of them."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    d = pool.shape[1]
    out = np.empty(X.shape[0])
    for lo, hi in chunks(X.shape[0], chunk):
        prod = X[lo:hi, None, :] * pool[None, :, :]
        out[lo:hi] = d * prod.max(axis=2).mean(axis=1)
    return float(out[0]) if single else out


@dataclass
class SpectralModel:
    """Sampler for the spectral component W; defines l by expectation.

    Backed either by a generative net (frozen, sampling mode) or by an
    explicit pool of simplex points.
    """

    d: int
    net: nn.GenerativeNet | None = None
    pool: np.ndarray | None = None
    eval_samples: int = 10_000
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.net is None and self.pool is None:
            raise InvalidInputError("spectral model needs a net or a pool")
        if self.eval_samples < 1:
            raise InvalidInputError("eval_samples must be >= 1")
        if self.pool is not None:
            self.pool = np.asarray(self.pool, dtype=float)

    def sample_w(self, count: int, seed) -> np.ndarray:
        rng = as_rng(seed)
        if self.net is not None:
            return self.net.sample(count, rng)
        idx = rng.integers(self.pool.shape[0], size=count)
        return self.pool[idx]

    def eval_pool(self, seed=0) -> np.ndarray:
        """Frozen W pool used for deterministic stdf evaluation."""
        key = int(seed) if not isinstance(seed, np.random.Generator) else None
        if key is not None and self._cache.get("key") == key:
            return self._cache["pool"]
        if self.net is None and self.pool.shape[0] <= self.eval_samples:
            pool = self.pool
        else:
            pool = self.sample_w(self.eval_samples, seed)
        if key is not None:
            self._cache = {"key": key, "pool": pool}
        return pool

    def stdf(self, x, seed=0) -> float | np.ndarray:
        return empirical_stdf(self.eval_pool(seed), x)

    def to_dict(self) -> dict:
        pool = self.eval_pool(0)
        return {
            "kind": "spectral-model",
            "d": self.d,
            "eval_samples": self.eval_samples,
            "net": self.net.to_dict() if self.net is not None else None,
            "pool": [nn._encode_array(row) for row in pool],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectralModel":
        if doc.get("kind") != "spectral-model":
            raise InvalidInputError("not a spectral-model document")
        net = nn.GenerativeNet.from_dict(doc["net"]) if doc.get("net") else None
        pool = np.array([nn._decode_array(row) for row in doc["pool"]])
        return cls(d=doc["d"], net=net, pool=pool if net is None else pool,
                   eval_samples=doc["eval_samples"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SpectralModel":
        return cls.from_dict(json.loads(text))


def stdf_eval(model: SpectralModel, x, seed=0):
    """Empirical stable tail dependence function of the model at x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidInputError("stdf argument must be finite and non-negative")
    return model.stdf(x, seed)


def xi_transform(u_row, x, phi_inv) -> float:
    """min over supported coordinates of phi^{-1}(u_j) / x_j.

    Coordinates with x_j = 0 are excluded from the minimum.
    """
    u_row = np.asarray(u_row, dtype=float)
    x = np.asarray(getattr(x, "coords", x), dtype=float)
    support = x > 0
    if not support.any():
        raise InvalidInputError("direction must have at least one positive coordinate")
    return float(np.min(phi_inv(u_row[support]) / x[support]))


def xi_matrix(phi_inv_u: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """xi for every observation (rows) against every direction (columns)."""
    safe = np.where(directions > 0, directions, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = phi_inv_u[:, None, :] / safe[None, :, :]
    return np.nanmin(ratios, axis=2)


def xi_loglik(xi, x, phi_deriv, model: SpectralModel, seed=0) -> float:
    """log(-phi'(xi * l(x))) + log l(x), clipped at -1e6 beyond support."""
    if xi < 0:
        raise InvalidInputError("xi must be non-negative")
    lval = float(stdf_eval(model, x, seed))
    slope = float(phi_deriv(xi * lval))
    if slope < 0:
        return float(np.log(-slope) + np.log(lval))
    return LOGLIK_CLIP + np.log(lval)


def moment_penalty(w_batch: np.ndarray) -> float:
    """Squared residual of spectral coordinate means against 1/d."""
    w_batch = np.asarray(w_batch, dtype=float)
    d = w_batch.shape[1]
    return float(np.sum((w_batch.mean(axis=0) - 1.0 / d) ** 2))


def _check_generator_pair(phi_inv, phi_deriv) -> None:
    """phi_inv and phi_deriv must describe the same generator.

    Finite differences of the inverse should match 1/phi'(phi^{-1}(w)).
    """
    ws = np.array([0.15, 0.35, 0.5, 0.7, 0.9])
    h = 1e-6
    fd = (phi_inv(ws + h) - phi_inv(ws - h)) / (2 * h)
    slope = phi_deriv(phi_inv(ws))
    rel = np.abs(fd * slope - 1.0)
    if np.any(rel > 1e-3):
        raise InvalidInputError(
            f"phi_inverse/phi_derivative inconsistent (relative error {rel.max():.2e})"
        )


def _fd_second(phi_deriv, y: np.ndarray) -> np.ndarray:
    h = 1e-6 * np.maximum(1.0, np.abs(y))
    return (phi_deriv(y + h) - phi_deriv(y - h)) / (2 * h)


@dataclass
class StdfTrainResult:
    model: SpectralModel
    loss_trace: list
    clipped: int


def train_stdf(u, phi_inv, phi_deriv, config: nn.TrainConfig,
               dirs_per_batch: int = 8, phi_second=None,
               hidden_dim: int = 30, train_samples: int = 128,
               eval_samples: int = 10_000, net: nn.GenerativeNet | None = None,
               return_trace: bool = False):
    """Fit a spectral net by maximum likelihood of transformed observations.

    Each step crosses a minibatch of observations with `dirs_per_batch`
    fresh uniform simplex directions, evaluates the transformed-data
    log-likelihood under the current empirical stdf, adds the moment
    penalty, and takes an Adam step. Returns the frozen model (plus trace
    and clip diagnostics when `return_trace` is set).
    """
    values = np.asarray(getattr(u, "values", u), dtype=float)
    n, d = values.shape
    _check_generator_pair(phi_inv, phi_deriv)
    if phi_second is None:
        phi_second = lambda y: _fd_second(phi_deriv, y)

    rng_noise, rng_dirs, rng_rows = spawn_rngs(config.seed, 3)
    if net is None:
        net = nn.GenerativeNet(d, hidden_dim, d, nn.SIMPLEX_HEAD, rng=rng_noise)
    state = nn.AdamState()
    phi_inv_u = phi_inv(values)
    trace: list[float] = []
    clipped = 0
    l_train = train_samples

    for _ in range(config.max_iters):
        rows = rng_rows.integers(n, size=min(config.batch_size, n))
        dirs = uniform_simplex(dirs_per_batch, d, rng_dirs)
        xs = xi_matrix(phi_inv_u[rows], dirs)  # (B, m)
        noise = rng_noise.standard_normal(size=(l_train, d))
        w, cache = net.forward(noise, mode="training")
        prod = dirs[None, :, :] * w[:, None, :]  # (l, m, d)
        argmax = prod.argmax(axis=2)
        lvals = d * prod.max(axis=2).mean(axis=0)  # (m,)

        y = xs * lvals[None, :]
        slope = phi_deriv(y)
        valid = slope < 0
        clipped += int(np.sum(~valid))
        log_term = np.where(
            valid,
            np.log(np.where(valid, -slope, 1.0)) + np.log(lvals)[None, :],
            LOGLIK_CLIP,
        )
        nll = -np.mean(log_term)
        penalty = moment_penalty(w)
        loss = nll + config.penalty_weight * penalty
        if not np.isfinite(loss):
            raise TrainingDivergenceError("stdf training loss diverged", trace)
        trace.append(float(loss))

        # dNLL/dl per direction; clipped entries contribute no gradient
        curv = phi_second(y)
        ratio = np.where(valid, curv / np.where(valid, slope, 1.0), 0.0)
        b = xs.shape[0]
        m = xs.shape[1]
        dl = (-(xs * ratio).sum(axis=0) - valid.sum(axis=0) / lvals) / (b * m)
        # chain rule into the sample matrix through the empirical maxima
        dw = np.zeros_like(w)
        coef = dl * d / l_train  # (m,)
        for j in range(m):
            np.add.at(dw, (np.arange(l_train), argmax[:, j]), coef[j] * dirs[j, argmax[:, j]])
        dw += config.penalty_weight * 2.0 * (w.mean(axis=0) - 1.0 / d) / l_train
        grads = net.backward(cache, dw)
        nn.adam_step(net, grads, config, state)

    net.mode = "sampling"
    model = SpectralModel(d=d, net=net, eval_samples=eval_samples)
    if return_trace:
        return StdfTrainResult(model=model, loss_trace=trace, clipped=clipped)
    return model


def _xi_for_estimate(u_values: np.ndarray, directions: np.ndarray, phi_inv):
    return xi_matrix(phi_inv(u_values), np.atleast_2d(directions))


def pickands_estimate(u, x, phi_inv) -> float | np.ndarray:
    """Endpoint-corrected Pickands estimate of l at one or many directions.

    sum_i -log(i/(n+1)) divided by sum_i xi(u_i, x).
    """
    values = np.asarray(getattr(u, "values", u), dtype=float)
    n = values.shape[0]
    if n < 2:
        raise InvalidInputError("estimator needs n >= 2")
    xs = _xi_for_estimate(values, x, phi_inv)  # (n, m)
    ranks = np.arange(1, n + 1) / (n + 1)
    numer = -np.log(ranks).sum()
    out = numer / xs.sum(axis=0)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def cfg_estimate(u, x) -> float | np.ndarray:
    """CFG estimate of l; the transform uses phi = exp(-x) implicitly."""
    return cfg_modified_estimate(u, x, lambda w: -np.log(w))


def cfg_modified_estimate(u, x, phi_inv) -> float | np.ndarray:
    """Generator-corrected CFG estimate of l.

    log l = mean_i log(phi^{-1}(i/(n+1))) - mean_i log xi(u_i, x).
    Observations with xi = 0 (some u_j = 1 on the direction support) are
    excluded; their count is available via cfg_zero_count.
    """
    values = np.asarray(getattr(u, "values", u), dtype=float)
    n = values.shape[0]
    if n < 2:
        raise InvalidInputError("estimator needs n >= 2")
    xs = _xi_for_estimate(values, x, phi_inv)  # (n, m)
    out = np.empty(xs.shape[1])
    for j in range(xs.shape[1]):
        col = xs[:, j]
        col = col[col > 0]
        k = col.size
        if k < 2:
            raise InvalidInputError("too many xi = 0 observations for CFG")
        ranks = np.arange(1, k + 1) / (k + 1)
        out[j] = np.exp(np.mean(np.log(phi_inv(ranks))) - np.mean(np.log(col)))
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def cfg_zero_count(u, x, phi_inv) -> int:
    """Number of observations excluded from the CFG sums at direction x."""
    values = np.asarray(getattr(u, "values", u), dtype=float)
    xs = _xi_for_estimate(values, x, phi_inv)
    return int(np.sum(xs <= 0))
