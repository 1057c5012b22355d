"""Inference of the Archimedean generator from Kendall statistics.

The generator is the Williamson transform of the radial law, so fitting
reduces to matching the equispaced empirical Kendall values against the
transform evaluated at sorted radial-times-Z products. Two routes are
provided: gradient training of a generative radial net, and the
finite-support alternating reconstruction that solves probabilities by
least squares and support ratios by bounded least squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import nn
from .core import KendallSample
from .errors import InvalidInputError, NumericError, TrainingDivergenceError
from .util import as_rng, spawn_rngs


def williamson(r_samples, x, d: int):
    """Williamson transform of a sample pool: mean of (1 - x/r)_+^{d-1}.

    `x` may have any shape; the output matches it.
    """
    r = np.asarray(r_samples, dtype=float)
    if r.size == 0 or np.any(r <= 0):
        raise InvalidInputError("radial samples must be positive and non-empty")
    x = np.asarray(x, dtype=float)
    xv = np.atleast_1d(x).ravel()
    base = np.clip(1.0 - xv[:, None] / r[None, :], 0.0, None)
    out = np.mean(base ** (d - 1), axis=1)
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def williamson_deriv(r_samples, x, d: int):
    """Derivative of the transform: mean of (d-1)(-1/r)(1 - x/r)_+^{d-2}."""
    if d < 2:
        raise InvalidInputError("Williamson derivative needs d >= 2")
    r = np.asarray(r_samples, dtype=float)
    if r.size == 0 or np.any(r <= 0):
        raise InvalidInputError("radial samples must be positive and non-empty")
    x = np.asarray(x, dtype=float)
    xv = np.atleast_1d(x).ravel()
    base = np.clip(1.0 - xv[:, None] / r[None, :], 0.0, None)
    # the (base > 0) factor keeps d = 2 from turning 0^0 into slope mass
    out = np.mean((d - 1) * (-1.0 / r[None, :]) * base ** (d - 2) * (base > 0),
                  axis=1)
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def williamson_second(r_samples, x, d: int):
    """Second derivative of the transform; needs d >= 3 to be pointwise."""
    if d < 3:
        raise InvalidInputError("pointwise second derivative needs d >= 3")
    r = np.asarray(r_samples, dtype=float)
    x = np.asarray(x, dtype=float)
    xv = np.atleast_1d(x).ravel()
    base = np.clip(1.0 - xv[:, None] / r[None, :], 0.0, None)
    out = np.mean((d - 1) * (d - 2) * (1.0 / r[None, :] ** 2)
                  * base ** (d - 3) * (base > 0), axis=1)
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def phi_inverse_numeric(phi, w, bracket_hint: float = 1.0,
                        tol: float = 1e-10) -> float:
    """Invert a continuous non-increasing generator with phi(0) = 1.

    Expands a bracket from the hint, then solves to |phi(x) - w| < tol
    with a safeguarded root finder.
    """
    w = float(w)
    if not 0 < w <= 1:
        raise InvalidInputError("phi_inverse_numeric is defined on (0, 1]")
    if phi(0.0) < w:
        return 0.0
    hi = max(bracket_hint, 1e-8)
    for _ in range(200):
        if phi(hi) < w:
            break
        hi *= 2.0
        if hi > 1e15:
            raise NumericError("no sign change found while expanding bracket")
    else:
        raise NumericError("no sign change found while expanding bracket")
    x = float(optimize.brentq(lambda t: phi(t) - w, 0.0, hi,
                              xtol=1e-14, rtol=8.9e-16, maxiter=300))
    if abs(phi(x) - w) >= tol:
        raise NumericError(f"inverse residual {abs(phi(x) - w):.2e} exceeds {tol}")
    return x


def phi_inverse_numeric_batch(phi, ws: np.ndarray, tol: float = 1e-10,
                              max_iter: int = 200) -> np.ndarray:
    """Vectorized bisection inverse for arrays of targets in (0, 1]."""
    ws = np.asarray(ws, dtype=float)
    if np.any(ws <= 0) or np.any(ws > 1):
        raise InvalidInputError("targets must lie in (0, 1]")
    flat = ws.ravel()
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    for _ in range(200):
        vals = phi(hi)
        mask = vals >= flat
        if not mask.any():
            break
        hi[mask] *= 2.0
        if hi.max() > 1e15:
            raise NumericError("no sign change found while expanding bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        vals = phi(mid)
        left = vals >= flat  # phi decreasing: root to the right
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.all(np.abs(vals - flat) < tol):
            break
    return (0.5 * (lo + hi)).reshape(ws.shape)


@dataclass
class RadialModel:
    """Sampler for the positive radial component; defines phi by transform."""

    d: int
    net: nn.GenerativeNet | None = None
    pool: np.ndarray | None = None
    eval_samples: int = 10_000
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.net is None and self.pool is None:
            raise InvalidInputError("radial model needs a net or a pool")
        if self.pool is not None:
            self.pool = np.asarray(self.pool, dtype=float)

    def sample_r(self, count: int, seed) -> np.ndarray:
        rng = as_rng(seed)
        if self.net is not None:
            return self.net.sample(count, rng)[:, 0]
        idx = rng.integers(self.pool.shape[0], size=count)
        return self.pool[idx]

    def eval_pool(self, seed=0) -> np.ndarray:
        key = int(seed) if not isinstance(seed, np.random.Generator) else None
        if key is not None and self._cache.get("key") == key:
            return self._cache["pool"]
        if self.net is None and self.pool.shape[0] <= self.eval_samples:
            pool = self.pool
        else:
            pool = self.sample_r(self.eval_samples, seed)
        if key is not None:
            self._cache = {"key": key, "pool": pool}
        return pool

    def phi(self, x, seed=0):
        return williamson(self.eval_pool(seed), x, self.d)

    def phi_prime(self, x, seed=0):
        return williamson_deriv(self.eval_pool(seed), x, self.d)

    def phi_inverse(self, w, seed=0):
        pool = self.eval_pool(seed)
        return phi_inverse_numeric_batch(lambda t: williamson(pool, t, self.d),
                                         np.asarray(w, dtype=float))

    def to_dict(self) -> dict:
        return {
            "kind": "radial-model",
            "d": self.d,
            "eval_samples": self.eval_samples,
            "net": self.net.to_dict() if self.net is not None else None,
            "pool": nn._encode_array(self.eval_pool(0)),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RadialModel":
        if doc.get("kind") != "radial-model":
            raise InvalidInputError("not a radial-model document")
        net = nn.GenerativeNet.from_dict(doc["net"]) if doc.get("net") else None
        pool = nn._decode_array(doc["pool"])
        return cls(d=doc["d"], net=net, pool=pool, eval_samples=doc["eval_samples"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RadialModel":
        return cls.from_dict(json.loads(text))


@dataclass
class FiniteRadial:
    """Discrete radial law on a strictly increasing positive support."""

    support: np.ndarray
    probabilities: np.ndarray
    d: int

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.support.ndim != 1 or self.support.size == 0:
            raise InvalidInputError("finite radial support must be non-empty")
        if np.any(self.support <= 0) or np.any(np.diff(self.support) <= 0):
            raise InvalidInputError("support must be positive and strictly increasing")
        if self.probabilities.shape != self.support.shape:
            raise InvalidInputError("support and probabilities must align")
        if abs(self.probabilities.sum() - 1.0) > 1e-9 or np.any(self.probabilities < 0):
            raise InvalidInputError("probabilities must be a distribution")

    @property
    def ratios(self) -> np.ndarray:
        """Adjacent support ratios r_j / r_{j+1}, all in (0, 1)."""
        return self.support[:-1] / self.support[1:]

    def sample_r(self, count: int, seed) -> np.ndarray:
        rng = as_rng(seed)
        return rng.choice(self.support, size=count, p=self.probabilities)

    def phi(self, x, seed=0):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x).ravel()
        base = np.clip(1.0 - xv[:, None] / self.support[None, :], 0.0, None)
        out = (base ** (self.d - 1)) @ self.probabilities
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def phi_prime(self, x, seed=0):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x).ravel()
        base = np.clip(1.0 - xv[:, None] / self.support[None, :], 0.0, None)
        out = ((self.d - 1) * (-1.0 / self.support[None, :])
               * base ** (self.d - 2) * (base > 0)) @ self.probabilities
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def phi_inverse(self, w, seed=0):
        return phi_inverse_numeric_batch(self.phi, np.asarray(w, dtype=float))

    def to_dict(self) -> dict:
        return {
            "kind": "finite-radial",
            "d": self.d,
            "support": nn._encode_array(self.support),
            "probabilities": nn._encode_array(self.probabilities),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FiniteRadial":
        if doc.get("kind") != "finite-radial":
            raise InvalidInputError("not a finite-radial document")
        return cls(nn._decode_array(doc["support"]),
                   nn._decode_array(doc["probabilities"]), doc["d"])


def kendall_mse(kendall_w: np.ndarray, r_samples: np.ndarray,
                z_samples: np.ndarray, d: int) -> float:
    """Residual objective: mean squared gap between sorted Kendall values
    and the Williamson transform at sorted radial-times-Z products."""
    r = np.asarray(r_samples, dtype=float)
    z = np.asarray(z_samples, dtype=float)
    t = np.sort(np.outer(r, z), axis=None, kind="stable")
    phi_t = williamson(r, t, d)
    return float(np.mean((np.asarray(kendall_w) - phi_t) ** 2))


@dataclass
class GeneratorTrainResult:
    model: RadialModel
    loss_trace: list
    final_mse: float


def train_generator(kendall_w, z_sampler, d: int, n_r: int, n_z: int,
                    config: nn.TrainConfig, epsilon: float = 1e-4,
                    hidden_dim: int = 10, eval_samples: int = 10_000,
                    net: nn.GenerativeNet | None = None,
                    resample_start: int = 16,
                    return_trace: bool = False):
    """Fit a radial net so its Williamson transform matches Kendall values.

    Each step draws n_r radial samples, pairs the sorted products with the
    non-increasing Kendall values, and descends the squared residual plus
    the unit-mean regularizer that pins the free scale of the support.
    The Z pool is refreshed every k steps with k annealed from
    `resample_start` down to 1. Stops early once the residual MSE falls
    below `epsilon`.
    """
    w = np.asarray(kendall_w, dtype=float)
    if w.ndim != 1 or w.size != n_r * n_z:
        raise InvalidInputError("kendall_w must have length n_r * n_z")
    if np.any(np.diff(w) > 0):
        raise InvalidInputError("kendall_w must be sorted non-increasing")

    rng_noise, rng_z = spawn_rngs(config.seed, 2)
    if net is None:
        net = nn.GenerativeNet(1, hidden_dim, 1, nn.POSITIVE_HEAD, rng=rng_noise)
    state = nn.AdamState()
    trace: list[float] = []
    z = np.asarray(z_sampler(n_z, rng_z), dtype=float)
    mse = np.inf
    total = max(config.max_iters, 1)

    for it in range(config.max_iters):
        cadence = max(1, int(round(resample_start * (1.0 - it / total))))
        if it > 0 and it % cadence == 0:
            z = np.asarray(z_sampler(n_z, rng_z), dtype=float)

        noise = rng_noise.standard_normal(size=(n_r, 1))
        out, cache = net.forward(noise, mode="training")
        r = out[:, 0]
        products = np.outer(r, z).ravel()  # index = j * n_z + l
        order = np.argsort(products, kind="stable")
        t = products[order]
        ratio = np.clip(1.0 - t[:, None] / r[None, :], 0.0, None)  # (N, n_r)
        phi_t = (ratio ** (d - 1)).mean(axis=1)
        resid = phi_t - w
        mse = float(np.mean(resid**2))
        reg = (r.mean() - 1.0) ** 2
        loss = mse + reg
        if not np.isfinite(loss):
            raise TrainingDivergenceError("generator training loss diverged", trace)
        trace.append(loss)
        if mse < epsilon:
            break

        N = t.size
        inside = ratio > 0
        # pool route: d phi_t / d r_j at fixed products
        dpool = (d - 1) * ratio ** (d - 2) * inside * (t[:, None] / r[None, :] ** 2) / n_r
        dr = dpool.T @ (2.0 * resid / N)
        # product route: d phi_t / d t times dt/dr through the sorted pairing
        dphi_dt = ((d - 1) * (-1.0 / r[None, :]) * ratio ** (d - 2) * inside).mean(axis=1)
        dt = 2.0 * resid * dphi_dt / N
        src = order // n_z  # radial index behind each sorted product
        np.add.at(dr, src, dt * z[order % n_z])
        dr += 2.0 * (r.mean() - 1.0) / n_r
        grads = net.backward(cache, dr[:, None])
        nn.adam_step(net, grads, config, state)

    net.mode = "sampling"
    model = RadialModel(d=d, net=net, eval_samples=eval_samples)
    if return_trace:
        return GeneratorTrainResult(model=model, loss_trace=trace, final_mse=mse)
    return model


def choose_supports(n: int, n_r: int | None = None,
                    n_z: int | None = None) -> tuple[int, int]:
    """Default support sizes (100, 80), capped at the sample count."""
    if n < 1:
        raise InvalidInputError("sample count must be >= 1")
    if n_r is None:
        n_r = min(100, n)
    if n_z is None:
        n_z = min(80, n)
    return n_r, n_z


def _group_products(t_sorted: np.ndarray, m: int, rtol: float = 1e-9) -> np.ndarray:
    """Assign sorted products to m consecutive groups.

    Exact ties always share a group; when there are more distinct values
    than atoms, adjacent value-groups are merged by index quantiles.
    """
    N = t_sorted.size
    new_value = np.ones(N, dtype=bool)
    new_value[1:] = np.abs(np.diff(t_sorted)) > rtol * np.maximum(1.0, np.abs(t_sorted[1:]))
    value_id = np.cumsum(new_value) - 1
    n_unique = value_id[-1] + 1
    if n_unique < m:
        raise NumericError(
            f"only {n_unique} distinct products for {m} Kendall atoms"
        )
    # quantile merge of distinct values onto atoms, order preserved
    group_of_value = np.minimum((np.arange(n_unique) * m) // n_unique, m - 1)
    return group_of_value[value_id]


def reconstruct_finite(kendall: KendallSample, z_support, z_probs, n_r: int,
                       d: int, bounds: tuple[float, float] = (0.01, 1.0),
                       epsilon: float = 1e-4, max_iters: int = 200,
                       init_ratios=None) -> FiniteRadial:
    """Alternating finite-support reconstruction of the radial law.

    Per iteration: build the product support from the current ratios,
    group sorted products onto the Kendall atoms, solve atom masses for
    the radial probabilities by least squares (clamped and normalized),
    then solve the support ratios by bounded least squares against the
    non-increasingly sorted Kendall values. The top support point is
    pinned at 1; scale is not identifiable and is left to callers.
    """
    z = np.asarray(z_support, dtype=float)
    pz = np.asarray(z_probs, dtype=float)
    if z.ndim != 1 or z.shape != pz.shape or np.any(z <= 0):
        raise InvalidInputError("Z support must be positive with aligned masses")
    if abs(pz.sum() - 1.0) > 1e-9:
        raise InvalidInputError("Z probabilities must sum to 1")
    m = kendall.size
    n_z = z.size
    if m > n_r * n_z:
        raise InvalidInputError("more Kendall atoms than product support points")

    # mass vector stays in input order; values are fitted in decreasing order
    p_w = kendall.p
    w_desc = np.sort(kendall.w)[::-1]

    if n_r == 1:
        return FiniteRadial(np.array([1.0]), np.array([1.0]), d)

    alpha = np.full(n_r - 1, 0.9) if init_ratios is None else np.asarray(init_ratios, float)
    if alpha.shape != (n_r - 1,):
        raise InvalidInputError("init_ratios must have length n_r - 1")
    p_r = np.full(n_r, 1.0 / n_r)
    # keep the support strictly increasing even if the solver hits a bound
    lo, hi = bounds[0], min(bounds[1], 1.0 - 1e-9)

    def support_from(ratios):
        r = np.empty(n_r)
        r[-1] = 1.0
        for j in range(n_r - 2, -1, -1):
            r[j] = r[j + 1] * ratios[j]
        return r

    mse = np.inf
    for _ in range(max_iters):
        r = support_from(alpha)
        products = np.outer(r, z).ravel()
        order = np.argsort(products, kind="stable")
        t_sorted = products[order]
        group = _group_products(t_sorted, m)
        src_r = order // n_z
        src_z = order % n_z

        # least-squares system: sum of pair masses per group vs atom mass
        A = np.zeros((m, n_r))
        np.add.at(A, (group, src_r), pz[src_z])
        sol, _, rank, _ = np.linalg.lstsq(A, p_w, rcond=None)
        if rank < min(A.shape):
            raise NumericError(
                f"probability system is rank deficient (rank {rank} of {min(A.shape)})"
            )
        sol = np.clip(sol, 0.0, None)
        total = sol.sum()
        if total <= 0:
            raise NumericError("probability solve collapsed to zero mass")
        p_r = sol / total

        def residuals(ratios):
            # the product support is re-sorted per evaluation: T is defined
            # as the sorted products of the candidate support with Z
            rr = support_from(ratios)
            tt = np.sort(np.outer(rr, z), axis=None, kind="stable")
            grp = _group_products(tt, m)
            first = np.searchsorted(grp, np.arange(m), side="left")
            rep = tt[first]
            base = np.clip(1.0 - rep[:, None] / rr[None, :], 0.0, None)
            return (base ** (d - 1)) @ p_r - w_desc

        res = optimize.least_squares(residuals, alpha, bounds=(lo, hi), method="trf")
        alpha = res.x
        mse = float(np.mean(res.fun**2))
        if mse < epsilon:
            break

    return FiniteRadial(support_from(alpha), p_r, d)
