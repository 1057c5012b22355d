"""Reference parametric families used as synthetic ground truth.

Closed-form Archimedean generators (Clayton, Frank, Joe, Gumbel) with
inverses and higher derivatives through truncated-Taylor jets, recovery
of the radial law from the generator, and the negative scaled extremal
Dirichlet (NSD) family of stable tail dependence functions with its
simplex-valued spectral sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import InvalidInputError, NumericError
from .util import chunks

FAMILIES = ("clayton", "frank", "joe", "gumbel")


class TaylorJet:
    """Truncated Taylor expansion of a scalar function at a point.

    Coefficient k is f^(k)(x0)/k!. Coefficients may carry a trailing batch
    axis so a whole grid of expansion points is propagated at once.
    Supports +, -, *, exp, log and real powers (positive leading term).
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x, order: int) -> "TaylorJet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    def _like(self, coeffs) -> "TaylorJet":
        return TaylorJet(coeffs)

    def __add__(self, other):
        if isinstance(other, TaylorJet):
            return self._like(self.c + other.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TaylorJet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return self._like(self.c * other)
        K = self.order
        out = np.zeros_like(self.c)
        for k in range(K + 1):
            for i in range(k + 1):
                out[k] += self.c[i] * other.c[k - i]
        return self._like(out)

    __rmul__ = __mul__

    def exp(self) -> "TaylorJet":
        K = self.order
        out = np.zeros_like(self.c)
        out[0] = np.exp(self.c[0])
        for k in range(1, K + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc = acc + j * self.c[j] * out[k - j]
            out[k] = acc / k
        return self._like(out)

    def log(self) -> "TaylorJet":
        if np.any(self.c[0] <= 0):
            raise NumericError("jet log requires a positive leading coefficient")
        K = self.order
        out = np.zeros_like(self.c)
        out[0] = np.log(self.c[0])
        for k in range(1, K + 1):
            acc = self.c[k] * 1.0
            for j in range(1, k):
                acc = acc - (j / k) * out[j] * self.c[k - j]
            out[k] = acc / self.c[0]
        return self._like(out)

    def power(self, p: float) -> "TaylorJet":
        """a^p for real p via the logarithmic-derivative recurrence."""
        if np.any(self.c[0] <= 0):
            raise NumericError("jet power requires a positive leading coefficient")
        K = self.order
        out = np.zeros_like(self.c)
        out[0] = self.c[0] ** p
        for k in range(1, K + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc = acc + (p * j - (k - j)) * self.c[j] * out[k - j]
            out[k] = acc / (k * self.c[0])
        return self._like(out)

    def coefficients(self) -> np.ndarray:
        return self.c

    def derivatives(self) -> np.ndarray:
        """Values f^(k)(x0) recovered from the coefficients."""
        K = self.order
        fact = np.cumprod(np.concatenate([[1.0], np.arange(1, K + 1)]))
        shape = (K + 1,) + (1,) * (self.c.ndim - 1)
        return self.c * fact.reshape(shape)


@dataclass(frozen=True)
class ArchGeneratorFamily:
    """One-parameter Archimedean generator with closed-form inverse."""

    family: str
    theta: float

    def __post_init__(self):
        fam = self.family.lower()
        if fam == "exp":
            # exp(-x) is the Gumbel generator at theta = 1
            object.__setattr__(self, "family", "gumbel")
            object.__setattr__(self, "theta", 1.0)
            return
        if fam not in FAMILIES:
            raise InvalidInputError(f"unknown generator family {self.family!r}")
        object.__setattr__(self, "family", fam)
        t = self.theta
        ok = {
            "clayton": t > 0,
            "frank": t != 0,
            "joe": t >= 1,
            "gumbel": t >= 1,
        }[fam]
        if not ok:
            raise InvalidInputError(f"theta={t} outside valid range for {fam}")

    def phi(self, x):
        return phi(self, x)

    def phi_inverse(self, w):
        return phi_inverse(self, w)

    def phi_prime(self, x):
        return phi_prime(self, x)

    def phi_second(self, x):
        jet = phi_taylor(self, x, 2)
        return jet.derivatives()[2]


def phi(gen: ArchGeneratorFamily, x):
    """Generator value phi(x) for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidInputError("phi is defined on x >= 0")
    t = gen.theta
    if gen.family == "clayton":
        return (1.0 + x) ** (-1.0 / t)
    if gen.family == "frank":
        return -np.log1p(-(1.0 - np.exp(-t)) * np.exp(-x)) / t
    if gen.family == "joe":
        return 1.0 - (-np.expm1(-x)) ** (1.0 / t)
    # gumbel
    return np.exp(-(x ** (1.0 / t)))


def phi_inverse(gen: ArchGeneratorFamily, w):
    """Closed-form inverse with phi(phi_inverse(w)) = w on (0, 1]."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0) or np.any(w > 1):
        raise InvalidInputError("phi_inverse is defined on (0, 1]")
    t = gen.theta
    if gen.family == "clayton":
        return w ** (-t) - 1.0
    if gen.family == "frank":
        return -np.log(-np.expm1(-t * w) / -np.expm1(-t))
    if gen.family == "joe":
        return -np.log1p(-((1.0 - w) ** t))
    return (-np.log(w)) ** t


def phi_prime(gen: ArchGeneratorFamily, x):
    """First derivative of the generator (non-positive)."""
    x = np.asarray(x, dtype=float)
    t = gen.theta
    if gen.family == "clayton":
        return -(1.0 / t) * (1.0 + x) ** (-1.0 / t - 1.0)
    if gen.family == "frank":
        c = 1.0 - np.exp(-t)
        e = np.exp(-x)
        return -(1.0 / t) * c * e / (1.0 - c * e)
    if gen.family == "joe":
        e = np.exp(-x)
        return -(1.0 / t) * (-np.expm1(-x)) ** (1.0 / t - 1.0) * e
    with np.errstate(divide="ignore"):
        xp = np.where(x > 0, x, 1.0) ** (1.0 / t - 1.0)
    out = -(1.0 / t) * xp * np.exp(-(np.asarray(x) ** (1.0 / t)))
    if t != 1.0:
        out = np.where(x > 0, out, -np.inf if t > 1 else 0.0)
    return out


def phi_taylor(gen: ArchGeneratorFamily, x, order: int) -> TaylorJet:
    """Taylor jet of the generator at x > 0, order <= 32."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidInputError("phi_taylor expands at x > 0")
    if order < 0 or order > 32:
        raise InvalidInputError("jet order must be in [0, 32]")
    X = TaylorJet.variable(x, order)
    t = gen.theta
    if gen.family == "clayton":
        jet = (X + 1.0).power(-1.0 / t)
    elif gen.family == "frank":
        c = 1.0 - np.exp(-t)
        jet = ((-c) * (-X).exp() + 1.0).log() * (-1.0 / t)
    elif gen.family == "joe":
        jet = 1.0 - (1.0 - (-X).exp()).power(1.0 / t)
    else:
        if t == 1.0:
            jet = (-X).exp()
        else:
            jet = (-(X.log() * (1.0 / t)).exp()).exp()
    if not np.all(np.isfinite(jet.c)):
        raise NumericError("generator jet overflowed; theta too extreme")
    return jet


def radial_cdf(gen: ArchGeneratorFamily, d: int, r):
    """CDF of the radial variable whose Williamson transform is phi.

    F_R(r) = 1 - sum_{k<d} (-1)^k r^k phi^(k)(r) / k!, clamped to [0, 1].
    When evaluated on an increasing grid, decreases beyond 1e-8 raise; the
    result is forced monotone within that tolerance.
    """
    if d < 2:
        raise InvalidInputError("radial law needs dimension d >= 2")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    rv = np.atleast_1d(r)
    if np.any(rv <= 0):
        raise InvalidInputError("radial CDF is defined for r > 0")
    jet = phi_taylor(gen, rv, d - 1)
    coeff = jet.coefficients()  # phi^(k)(r)/k!
    powers = (-rv[None, :]) ** np.arange(d)[:, None]
    vals = 1.0 - (powers * coeff).sum(axis=0)
    order = np.argsort(rv)
    diffs = np.diff(vals[order])
    if diffs.size and diffs.min() < -1e-8:
        raise NumericError(
            f"radial CDF decreased by {-diffs.min():.3e}; derivative inaccuracy"
        )
    sorted_vals = np.maximum.accumulate(vals[order])
    vals = np.empty_like(sorted_vals)
    vals[order] = sorted_vals
    vals = np.clip(vals, 0.0, 1.0)
    return float(vals[0]) if scalar else vals


def sample_radial(gen: ArchGeneratorFamily, d: int, count: int, seed) -> np.ndarray:
    """Draw radial values by inverting the radial CDF with bisection."""
    rng = np.random.Generator(np.random.Philox(key=_philox_key(seed)))
    if count == 0:
        return np.empty(0)
    u = rng.random(count)
    lo = np.full(count, 1e-12)
    hi = np.ones(count)
    for _ in range(200):
        mask = radial_cdf(gen, d, hi) < u
        if not mask.any():
            break
        hi[mask] *= 2.0
        # Clayton radial tails decay polynomially, so the bracket can be huge
        if hi.max() > 1e18:
            raise NumericError("radial CDF bracketing failed to enclose target")
    else:
        raise NumericError("radial CDF bracketing failed to enclose target")
    f_lo = radial_cdf(gen, d, lo)
    f_hi = radial_cdf(gen, d, hi)
    for _ in range(200):
        if np.all(f_hi - f_lo <= 1e-10):
            break
        mid = 0.5 * (lo + hi)
        f_mid = radial_cdf(gen, d, mid)
        left = f_mid >= u
        hi = np.where(left, mid, hi)
        f_hi = np.where(left, f_mid, f_hi)
        lo = np.where(left, lo, mid)
        f_lo = np.where(left, f_lo, f_mid)
    return 0.5 * (lo + hi)


def _philox_key(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**63))
    return int(seed)


@dataclass(frozen=True)
class NsdStdf:
    """Negative scaled extremal Dirichlet tail dependence function."""

    alpha: tuple
    rho: float
    mc_samples: int = 100_000

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if len(alpha) < 2 or any(a <= 0 for a in alpha):
            raise InvalidInputError("alpha must be a vector of positive reals, d >= 2")
        if not 0 < self.rho < min(alpha):
            raise InvalidInputError("rho must lie in (0, min alpha)")

    @property
    def d(self) -> int:
        return len(self.alpha)


def _nsd_scaled_draws(params: NsdStdf, count: int, seed) -> np.ndarray:
    """Dirichlet draws mapped through the scaling D_j^{-rho} G(a_j)/G(a_j-rho)."""
    rng = np.random.Generator(np.random.Philox(key=_philox_key(seed)))
    alpha = np.asarray(params.alpha)
    d = rng.dirichlet(alpha, size=count)
    np.clip(d, 1e-300, None, out=d)
    scale = np.exp(gammaln(alpha) - gammaln(alpha - params.rho))
    return d ** (-params.rho) * scale


def nsd_stdf(params: NsdStdf, x, seed) -> float:
    """Monte Carlo value of the NSD tail dependence function at x.

    Evaluated with mc_samples Dirichlet(alpha) draws. The scaled sum
    enters as a control variate with exactly known mean, which keeps the
    estimator's variance finite when 2*rho exceeds the smallest alpha and
    makes margin evaluations l(e_j) = 1 exact.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidInputError("stdf argument must be finite and non-negative")
    return float(nsd_stdf_batch(params, x[None, :], seed)[0])


def nsd_stdf_batch(params: NsdStdf, X: np.ndarray, seed,
                   chunk: int = 128) -> np.ndarray:
    """nsd_stdf at many points using one shared Dirichlet pool."""
    X = np.asarray(X, dtype=float)
    v = _nsd_scaled_draws(params, params.mc_samples, seed)
    alpha_sum = sum(params.alpha)
    const = np.exp(gammaln(alpha_sum - params.rho) - gammaln(alpha_sum))
    out = np.empty(X.shape[0])
    for lo, hi in chunks(X.shape[0], chunk):
        prod = X[lo:hi, None, :] * v[None, :, :]
        # c * E[sum_j x_j V_j] = sum_j x_j exactly, so only the non-positive
        # max-minus-sum residual is estimated
        resid = prod.max(axis=2) - prod.sum(axis=2)
        out[lo:hi] = X[lo:hi].sum(axis=1) + const * resid.mean(axis=1)
    return out


def nsd_spectral_sample(params: NsdStdf, count: int, seed) -> np.ndarray:
    """Simplex spectral samples matching the NSD tail dependence function.

    Sampling-importance-resampling with weight ||V||_1 turns the Dirichlet
    expectation form into the simplex spectral representation: the induced
    d * E[max_j x_j W_j] equals the NSD function for every x.
    """
    rng = np.random.Generator(np.random.Philox(key=_philox_key(seed)))
    pool = _nsd_scaled_draws(params, params.mc_samples, int(rng.integers(2**63)))
    norms = pool.sum(axis=1)
    weights = norms / norms.sum()
    ess = 1.0 / np.sum(weights**2)
    if ess < 50:
        raise NumericError(
            f"importance weights degenerate (effective sample size {ess:.1f})"
        )
    idx = rng.choice(pool.shape[0], size=count, p=weights)
    return pool[idx] / norms[idx, None]


def tau_of_theta(gen: ArchGeneratorFamily) -> float:
    """Kendall's tau of the bivariate Archimedean copula of this generator.

    tau = 1 + 4 * integral of phi'(phi^{-1}(w)) * phi^{-1}(w) over (0,1),
    evaluated by quadrature. Serves as an independent cross-check of the
    family-specific formulas used for parameter inversion.
    """
    def lam(w):
        inv = phi_inverse(gen, w)
        return phi_prime(gen, inv) * inv

    val, _ = integrate.quad(lam, 1e-12, 1.0 - 1e-12, limit=200)
    return 1.0 + 4.0 * val


def _tau_frank(theta: float) -> float:
    # tau = 1 - (4/theta)(1 - D1(theta)) with the first Debye function
    debye, _ = integrate.quad(lambda t: t / np.expm1(t), 0.0, theta, limit=200)
    return 1.0 - (4.0 / theta) * (1.0 - debye / theta)


def _tau_joe(theta: float, terms: int = 200_000) -> float:
    k = np.arange(1, terms + 1, dtype=float)
    series = 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0))
    return 1.0 - 4.0 * float(series.sum())


def theta_from_tau(family: str, tau: float) -> float:
    """Parameter giving Kendall's tau `tau` for the named family.

    Clayton and Gumbel invert in closed form; Frank and Joe invert their
    tau(theta) relations numerically to 1e-8.
    """
    if not 0 < tau < 1:
        raise InvalidInputError("tau must lie in (0, 1)")
    family = family.lower()
    if family == "clayton":
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family == "frank":
        fn, lo, hi = _tau_frank, 1e-6, 700.0
    elif family == "joe":
        fn, lo, hi = _tau_joe, 1.0 + 1e-12, 700.0
    else:
        raise InvalidInputError(f"unknown family {family!r}")
    return float(optimize.brentq(lambda t: fn(t) - tau, lo, hi, xtol=1e-8))
