"""Input distributions and the one-dimensional sphere marginal.

Supported input laws for x in R^d: the standard Gaussian, the uniform measure
on a sphere of given radius, finite radial mixtures of uniform spheres, and
product measures with i.i.d. mean-zero unit-variance coordinates.  Samplers
are deterministic given (seed, stream): every consumer derives its generator
from ``numpy.random.default_rng`` seeded with the full key sequence, so
parallel trials with distinct stream indices never share draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from sphindex.orthopoly import marginal_log_mass

_SQRT3 = math.sqrt(3.0)


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator keyed by (seed, *stream); distinct keys give disjoint streams."""
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("cannot re-key an existing Generator")
        return seed
    key = [int(seed)] + [int(s) for s in stream]
    return np.random.default_rng(key)


# ---------------------------------------------------------------------------
# Scalar coordinate laws for product measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarLaw:
    """Mean-zero unit-variance scalar law for product-measure coordinates.

    kinds: "uniform" (U[-sqrt(3), sqrt(3)]), "rademacher", "two_point" (atoms
    sqrt((1-p)/p) with mass p and -sqrt(p/(1-p)) with mass 1-p, skewed unless
    p = 1/2), or "quantile" with a table (u_k, q_k) interpolated as the
    quantile function; quantile tables are recentred/rescaled numerically to
    zero mean and unit variance.
    """

    kind: str
    p: float = 0.5
    quantile_u: np.ndarray | None = None
    quantile_q: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "rademacher", "two_point", "quantile"):
            raise ValueError(f"unknown scalar law {self.kind!r}")
        if self.kind == "two_point" and not 0.0 < self.p < 1.0:
            raise ValueError("two_point law needs p in (0, 1)")
        if self.kind == "quantile":
            if self.quantile_u is None or self.quantile_q is None:
                raise ValueError("quantile law needs a (u, q) table")
            u = np.asarray(self.quantile_u, dtype=float)
            q = np.asarray(self.quantile_q, dtype=float)
            if u.ndim != 1 or u.shape != q.shape or u.size < 2:
                raise ValueError("quantile table must be two equal 1-d arrays")
            if np.any(np.diff(u) <= 0) or np.any(np.diff(q) < 0):
                raise ValueError("quantile table must be increasing")
            mean, var = self._raw_moments(u, q)
            object.__setattr__(self, "quantile_u", u)
            object.__setattr__(self, "quantile_q", (q - mean) / math.sqrt(var))

    @staticmethod
    def _raw_moments(u: np.ndarray, q: np.ndarray) -> tuple[float, float]:
        grid = np.linspace(0.0, 1.0, 20001)
        vals = np.interp(grid, u, q)
        mean = float(np.trapezoid(vals, grid))
        var = float(np.trapezoid((vals - mean) ** 2, grid))
        return mean, var

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("rademacher", "two_point")

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, probabilities) for discrete laws."""
        if self.kind == "rademacher":
            return np.array([1.0, -1.0]), np.array([0.5, 0.5])
        if self.kind == "two_point":
            a = math.sqrt((1.0 - self.p) / self.p)
            b = -math.sqrt(self.p / (1.0 - self.p))
            return np.array([a, b]), np.array([self.p, 1.0 - self.p])
        raise TypeError(f"{self.kind} law is not discrete")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-_SQRT3, _SQRT3, size=shape)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
        if self.kind == "two_point":
            values, _ = self.atoms()
            return np.where(rng.random(size=shape) < self.p, values[0], values[1])
        return np.interp(rng.random(size=shape), self.quantile_u, self.quantile_q)

    def moment(self, order: int, absolute: bool = False) -> float:
        """E[x^order] (or E|x|^order), closed form where available."""
        if self.kind == "uniform":
            if absolute or order % 2 == 0:
                return _SQRT3**order / (order + 1)
            return 0.0
        if self.kind == "rademacher":
            return 1.0 if (absolute or order % 2 == 0) else 0.0
        if self.kind == "two_point":
            values, probs = self.atoms()
            vals = np.abs(values) if absolute else values
            return float(probs @ vals**order)
        grid = np.linspace(0.0, 1.0, 20001)
        vals = np.interp(grid, self.quantile_u, self.quantile_q)
        if absolute:
            vals = np.abs(vals)
        return float(np.trapezoid(vals**order, grid))


# ---------------------------------------------------------------------------
# Input distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InputDistribution:
    """Descriptor of the input law; construct via the class methods below."""

    kind: str
    d: int
    radius: float | None = None
    radii: np.ndarray | None = None
    radius_weights: np.ndarray | None = None
    eta: ScalarLaw | None = None

    @classmethod
    def gaussian(cls, d: int) -> "InputDistribution":
        return cls(kind="gaussian", d=int(d))

    @classmethod
    def uniform_sphere(cls, d: int, radius: float | None = None) -> "InputDistribution":
        """Uniform on the sphere of the given radius (default sqrt(d), isotropic)."""
        r = math.sqrt(d) if radius is None else float(radius)
        if r <= 0:
            raise ValueError("radius must be positive")
        return cls(kind="uniform_sphere", d=int(d), radius=r)

    @classmethod
    def radial_mixture(cls, d: int, radii, weights) -> "InputDistribution":
        radii = np.asarray(radii, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if radii.shape != weights.shape or radii.ndim != 1 or radii.size == 0:
            raise ValueError("radii and weights must be matching 1-d arrays")
        if np.any(radii <= 0):
            raise ValueError("radii must be positive")
        if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        return cls(kind="radial_mixture", d=int(d), radii=radii, radius_weights=weights)

    @classmethod
    def product(cls, d: int, eta: ScalarLaw | str) -> "InputDistribution":
        if isinstance(eta, str):
            eta = ScalarLaw(kind=eta)
        return cls(kind="product", d=int(d), eta=eta)

    def __post_init__(self):
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got {self.d}")
        if self.kind not in ("gaussian", "uniform_sphere", "radial_mixture", "product"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @property
    def is_spherically_symmetric(self) -> bool:
        return self.kind in ("gaussian", "uniform_sphere", "radial_mixture")

    def radial_support(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite (radii, weights) support for sphere / mixture kinds."""
        if self.kind == "uniform_sphere":
            return np.array([self.radius]), np.array([1.0])
        if self.kind == "radial_mixture":
            return self.radii, self.radius_weights
        raise TypeError(f"{self.kind} has no finite radial support")

    def second_radial_moment(self) -> float:
        """E[r^2]; equals d for isotropic sphere/mixture configurations."""
        radii, weights = self.radial_support()
        return float(weights @ radii**2)

    def fourth_radial_moment(self) -> float:
        radii, weights = self.radial_support()
        return float(weights @ radii**4)

    def describe(self) -> str:
        if self.kind == "uniform_sphere":
            return f"uniform_sphere(d={self.d}, r={self.radius:g})"
        if self.kind == "radial_mixture":
            return f"radial_mixture(d={self.d}, {len(self.radii)} radii)"
        if self.kind == "product":
            return f"product(d={self.d}, eta={self.eta.kind})"
        return f"gaussian(d={self.d})"


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def sample(dist: InputDistribution, seed, n: int, *stream) -> np.ndarray:
    """Draw n inputs as an (n, d) array, deterministic given (seed, *stream)."""
    rng = make_rng(seed, *stream)
    return sample_with(dist, rng, n)


def sample_with(dist: InputDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n inputs advancing an existing generator (for sequential streams)."""
    d = dist.d
    if dist.kind == "gaussian":
        return rng.standard_normal((n, d))
    if dist.kind == "uniform_sphere":
        return dist.radius * _unit_rows(rng.standard_normal((n, d)))
    if dist.kind == "radial_mixture":
        idx = rng.choice(dist.radii.size, size=n, p=dist.radius_weights)
        return dist.radii[idx, None] * _unit_rows(rng.standard_normal((n, d)))
    return dist.eta.sample(rng, (n, d))


def sample_unit_sphere(rng: np.random.Generator, d: int, n: int | None = None) -> np.ndarray:
    """Uniform unit vectors; a single vector when n is None."""
    if n is None:
        return _unit_rows(rng.standard_normal(d))
    return _unit_rows(rng.standard_normal((n, d)))


# ---------------------------------------------------------------------------
# Sphere marginal u_d
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalDensity:
    """Law u_d of one coordinate of a uniform point on the unit sphere of R^d:
    u_d(t) = Z^{-1} (1 - t^2)^((d-3)/2) on [-1, 1], with Z held in log-space."""

    d: int
    log_z: float = field(init=False)

    def __post_init__(self):
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got {self.d}")
        object.__setattr__(self, "log_z", marginal_log_mass(self.d))

    def pdf(self, t):
        tt = np.asarray(t, dtype=float)
        out = np.zeros_like(tt)
        inside = np.abs(tt) < 1.0
        expo = (self.d - 3) / 2.0
        with np.errstate(divide="ignore"):
            out[inside] = np.exp(expo * np.log1p(-tt[inside] ** 2) - self.log_z)
        if self.d == 3:
            out[np.abs(tt) == 1.0] = math.exp(-self.log_z)
        return float(out) if np.isscalar(t) else out

    def cdf(self, t):
        tt = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
        a = (self.d - 1) / 2.0
        out = betainc(a, a, (1.0 + tt) / 2.0)
        return float(out) if np.isscalar(t) else out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        a = (self.d - 1) / 2.0
        return 2.0 * rng.beta(a, a, size=n) - 1.0

    def even_moment(self, k: int) -> float:
        """E[t^(2k)] = prod_{i<k} (2i+1)/(d+2i); e.g. 1/d for k=1."""
        val = 1.0
        for i in range(k):
            val *= (2 * i + 1) / (self.d + 2 * i)
        return val


def marginal_density(d: int, t):
    """Density value u_d(t); zero outside [-1, 1] rather than an error."""
    return MarginalDensity(d).pdf(t)


# ---------------------------------------------------------------------------
# Initialization tail probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailProbability:
    """Monte-Carlo estimate of P(theta0 . theta* >= a / sqrt(d)) with bounds.

    upper_bound = a^{-1} exp(-a^2/4); lower_bound = (delta/4) exp(-(a+delta)^2),
    the latter valid only when max(a, delta) <= sqrt(d)/4 (else NaN).
    """

    d: int
    a: float
    delta: float
    n: int
    estimate: float
    ci_low: float
    ci_high: float
    upper_bound: float
    lower_bound: float


def init_tail_probability(
    d: int,
    a: float,
    delta: float = 1.0,
    n: int = 10**6,
    seed=0,
    confidence: float = 0.95,
) -> TailProbability:
    """Estimate the chance that a uniform initialization has correlation
    at least a/sqrt(d) with the hidden direction, with the analytic bounds."""
    if a < 0 or delta <= 0:
        raise ValueError("need a >= 0 and delta > 0")
    rng = make_rng(seed, d, int(1000 * a))
    t = MarginalDensity(d).sample(rng, n)
    hits = float(np.mean(t >= a / math.sqrt(d)))
    from scipy.stats import norm

    z = float(norm.ppf(0.5 + confidence / 2.0))
    half = z * math.sqrt(max(hits * (1.0 - hits), 1e-300) / n)
    upper = math.inf if a == 0 else math.exp(-a * a / 4.0) / a
    if max(a, delta) <= math.sqrt(d) / 4.0:
        lower = delta / 4.0 * math.exp(-((a + delta) ** 2))
    else:
        lower = math.nan
    return TailProbability(
        d=d, a=a, delta=delta, n=n,
        estimate=hits, ci_low=hits - half, ci_high=hits + half,
        upper_bound=upper, lower_bound=lower,
    )
