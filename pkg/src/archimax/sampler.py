"""Sampling machinery built on the radial-times-simplex representation.

A generalized Pareto vector is drawn from one uniform variable and one
spectral draw; coordinate-wise maxima of d-1 such vectors give a raw
simplex candidate, accepted when the empirical tail dependence function
is at most one. Accepted batches are rank-corrected to exact Beta(1, d-1)
marginals, scaled by radial draws, and pushed through the generator to
land on the unit hypercube.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import parametric
from .core import DataMatrix, rank_normalize
from .errors import InvalidInputError, SamplerDegenerateError
from .radial_infer import FiniteRadial, RadialModel, phi_inverse_numeric_batch
from .stdf_infer import SpectralModel
from .util import as_rng, spawn_rngs, uniform_simplex


@dataclass
class ParametricRadial:
    """Radial adapter for a closed-form generator family."""

    generator: parametric.ArchGeneratorFamily
    d: int

    def sample_r(self, count: int, seed) -> np.ndarray:
        return parametric.sample_radial(self.generator, self.d, count, seed)

    def phi(self, x, seed=0):
        return parametric.phi(self.generator, x)

    def phi_prime(self, x, seed=0):
        return parametric.phi_prime(self.generator, x)

    def phi_inverse(self, w, seed=0):
        return parametric.phi_inverse(self.generator, w)

    def to_dict(self) -> dict:
        return {"kind": "parametric-radial", "d": self.d,
                "family": self.generator.family, "theta": self.generator.theta}

    @classmethod
    def from_dict(cls, doc: dict) -> "ParametricRadial":
        return cls(parametric.ArchGeneratorFamily(doc["family"], doc["theta"]),
                   doc["d"])


@dataclass
class UniformSimplexSpectral:
    """Direct uniform-simplex component for the Archimedean special case.

    Marks the model as symmetric: S is drawn uniformly, Z = l(S) is
    identically one, and the simplex rejection machinery is bypassed.
    """

    d: int

    def sample_s(self, count: int, seed) -> np.ndarray:
        return uniform_simplex(count, self.d, as_rng(seed))

    def stdf(self, x, seed=0):
        x = np.asarray(x, dtype=float)
        return x.sum(axis=-1)

    def to_dict(self) -> dict:
        return {"kind": "uniform-simplex", "d": self.d}

    @classmethod
    def from_dict(cls, doc: dict) -> "UniformSimplexSpectral":
        return cls(doc["d"])


def spectral_from_nsd(params: parametric.NsdStdf, pool_size: int = 10_000,
                      seed=0) -> SpectralModel:
    """Pool-backed spectral model matching an NSD tail dependence function."""
    pool = parametric.nsd_spectral_sample(params, pool_size, seed)
    return SpectralModel(d=params.d, pool=pool, eval_samples=pool_size)


def sample_gpc(spectral, seed) -> np.ndarray:
    """One generalized Pareto vector: X_j = -U / (d * W_j).

    W is a spectral draw; d * W is the unit-mean generator that makes the
    margins match the Pareto law 1 - l(|x| e_j) near the upper endpoint.
    Coordinates with W_j = 0 map to -inf sentinels.
    """
    rng = as_rng(seed)
    w = spectral.sample_w(1, rng)[0]
    u = rng.random()
    with np.errstate(divide="ignore"):
        return np.where(w > 0, -u / (w.size * w), -np.inf)


def _gpc_batch(spectral, count: int, rng) -> np.ndarray:
    d = spectral.d
    w = spectral.sample_w(count, rng)
    u = rng.random(count)
    with np.errstate(divide="ignore"):
        return np.where(w > 0, -u[:, None] / (d * w), -np.inf)


def sample_simplex(spectral, stdf_eval=None, seed=0,
                   max_attempts: int = 1_000_000):
    """Draw one accepted raw simplex candidate; returns (s, rejections)."""
    out, rej = sample_simplex_batch(spectral, 1, seed, stdf_eval=stdf_eval,
                                    max_attempts=max_attempts)
    return out[0], rej


def sample_simplex_batch(spectral, count: int, seed, stdf_eval=None,
                         max_attempts: int | None = None,
                         batch: int = 4096):
    """Rejection-sample raw simplex candidates until `count` are accepted.

    Each candidate takes coordinate-wise maxima over d-1 generalized
    Pareto vectors and is kept when the evaluated tail dependence function
    is at most one. Returns (candidates, rejection_count). Raises when the
    acceptance rate collapses or the attempt cap is exhausted.
    """
    rng = as_rng(seed)
    d = spectral.d
    if stdf_eval is None:
        # the model's canonical frozen pool, so acceptance agrees with
        # every later stdf evaluation of the same model
        pool = spectral.eval_pool(0)
        from .stdf_infer import empirical_stdf

        stdf_eval = lambda s: empirical_stdf(pool, s)
    if max_attempts is None:
        max_attempts = max(1_000_000, 200 * count)
    accepted = np.empty((count, d))
    got = 0
    attempts = 0
    while got < count:
        if attempts >= max_attempts:
            raise SamplerDegenerateError(
                f"simplex sampler exhausted {attempts} attempts for {count} draws"
            )
        block = min(batch, max_attempts - attempts)
        x = _gpc_batch(spectral, block * (d - 1), rng).reshape(block, d - 1, d)
        s = -x.max(axis=1)
        attempts += block
        finite = np.isfinite(s).all(axis=1)
        s = s[finite]
        if s.size:
            lvals = np.atleast_1d(stdf_eval(s))
            s = s[lvals <= 1.0]
        take = min(s.shape[0], count - got)
        accepted[got:got + take] = s[:take]
        got += take
        if attempts >= 100_000 and got / attempts < 1e-4:
            raise SamplerDegenerateError(
                f"simplex acceptance rate {got / attempts:.2e} below 1e-4"
            )
    return accepted, attempts - count


def correct_simplex_marginals(raw: np.ndarray) -> np.ndarray:
    """Push raw candidates onto exact Beta(1, d-1) marginals.

    Rank-normalize each coordinate, then apply the Beta quantile
    s = 1 - (1 - u)^{1/(d-1)}. Ranks are preserved exactly.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise InvalidInputError("marginal correction needs a batch of size >= 2")
    d = raw.shape[1]
    u = rank_normalize(raw).values
    return 1.0 - (1.0 - u) ** (1.0 / (d - 1))


@dataclass
class ArchimaxModel:
    """Fitted or synthetic pair of radial and spectral components."""

    radial: Any
    spectral: Any
    d: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rd = getattr(self.radial, "d", self.d)
        sd = getattr(self.spectral, "d", self.d)
        if rd != self.d or sd != self.d:
            raise InvalidInputError("component dimensions disagree")

    def to_dict(self) -> dict:
        return {
            "kind": "archimax-model",
            "d": self.d,
            "radial": self.radial.to_dict(),
            "spectral": self.spectral.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ArchimaxModel":
        if doc.get("kind") != "archimax-model":
            raise InvalidInputError("not an archimax-model document")
        radial_doc = doc["radial"]
        loaders = {
            "radial-model": RadialModel.from_dict,
            "finite-radial": FiniteRadial.from_dict,
            "parametric-radial": ParametricRadial.from_dict,
        }
        radial = loaders[radial_doc["kind"]](radial_doc)
        spectral_doc = doc["spectral"]
        if spectral_doc["kind"] == "uniform-simplex":
            spectral = UniformSimplexSpectral.from_dict(spectral_doc)
        else:
            spectral = SpectralModel.from_dict(spectral_doc)
        return cls(radial=radial, spectral=spectral, d=doc["d"],
                   metadata=doc.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ArchimaxModel":
        return cls.from_dict(json.loads(text))


def sample_archimax(model: ArchimaxModel, count: int, seed) -> np.ndarray:
    """Draw `count` observations from the model's copula.

    Radial draws scale corrected simplex candidates; the generator (the
    Williamson transform of a fresh radial pool for net-backed models)
    maps products back to the unit hypercube.
    """
    if count == 0:
        return np.empty((0, model.d))
    rng_r, rng_s, rng_phi = spawn_rngs(seed, 3)
    r = model.radial.sample_r(count, rng_r)
    if isinstance(model.spectral, UniformSimplexSpectral):
        s = model.spectral.sample_s(count, rng_s)
    else:
        raw, _ = sample_simplex_batch(model.spectral, count, rng_s)
        s = correct_simplex_marginals(raw) if count >= 2 else raw
    x = r[:, None] * s
    phi_seed = int(rng_phi.integers(2**31))
    u = model.radial.phi(x.ravel(), seed=phi_seed)
    return np.asarray(u).reshape(count, model.d)


@dataclass
class SynthResult:
    """Synthetic dataset plus the ground truth that generated it."""

    data: DataMatrix
    model: ArchimaxModel
    generator: parametric.ArchGeneratorFamily
    nsd: parametric.NsdStdf | None
    truth_stdf: Any  # callable batch evaluator of the true l
    truth_seed: int


def synth_dataset(family: str, theta: float, nsd: parametric.NsdStdf | None,
                  n: int, seed, d: int | None = None,
                  spectral_pool: int = 10_000) -> SynthResult:
    """Generate ground-truth Archimax data from a parametric pair.

    With an NSD spectral part the simplex component comes from the
    importance-resampled pool; with nsd=None the Archimedean special case
    (uniform simplex component) is used and `d` must be given.
    """
    gen = parametric.ArchGeneratorFamily(family, theta)
    rng_pool, rng_sample, rng_truth = spawn_rngs(seed, 3)
    if nsd is not None:
        d = nsd.d
        spectral = spectral_from_nsd(nsd, spectral_pool,
                                     int(rng_pool.integers(2**31)))
    else:
        if d is None:
            raise InvalidInputError("d is required for the Archimedean case")
        spectral = UniformSimplexSpectral(d)
    model = ArchimaxModel(
        radial=ParametricRadial(gen, d), spectral=spectral, d=d,
        metadata={"family": gen.family, "theta": gen.theta,
                  "nsd": None if nsd is None else
                  {"alpha": list(nsd.alpha), "rho": nsd.rho}},
    )
    values = sample_archimax(model, n, rng_sample)
    truth_seed = int(rng_truth.integers(2**31))
    if nsd is not None:
        truth = lambda X: parametric.nsd_stdf_batch(nsd, np.atleast_2d(X), truth_seed)
    else:
        truth = lambda X: np.atleast_2d(np.asarray(X, float)).sum(axis=1)
    data = DataMatrix(values) if n > 0 else DataMatrix(np.empty((0, d)))
    return SynthResult(data=data, model=model, generator=gen, nsd=nsd,
                       truth_stdf=truth, truth_seed=truth_seed)
