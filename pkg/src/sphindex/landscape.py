"""Exact population-loss profiles and local polynomial growth certificates.

For spherically symmetric inputs the population squared loss of a known link
phi depends on theta only through the correlation m = theta . theta*:

    loss(m) = 2 E[phi^2] - 2 sum_j beta_j P_{j,d}(m),

where the nonnegative spectrum beta_j is computed exactly by Gauss-Jacobi
quadrature over the finite radial support (Monte Carlo enters only as a
validation path).  For Gaussian inputs the same structure holds with Hermite
coefficients and monomials m^j.  Parseval gives the energy identity
E[phi^2] = sum_j beta_j, whose residual measures the truncation tail.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from sphindex.links import LinkFunction
from sphindex.measures import InputDistribution
from sphindex.orthopoly import (
    GegenbauerBasis,
    HermiteBasis,
    get_basis,
    harmonic_dimension,
    quadrature,
)


class TruncationWarning(UserWarning):
    """Energy identity residual above the requested threshold."""


class DegenerateLinkError(ValueError):
    """All spectrum coefficients of positive degree are below tolerance."""


def sphere_area_ratio(d: int) -> float:
    """|S^{d-3}| / |S^{d-2}| = Gamma((d-1)/2) / (sqrt(pi) Gamma((d-2)/2))."""
    return math.exp(gammaln((d - 1) / 2.0) - gammaln((d - 2) / 2.0)) / math.sqrt(math.pi)


def marginal_quadrature(dist: InputDistribution, n_nodes: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """(points, weights) integrating smooth scalar functions against the
    one-dimensional marginal of dist; exact for polynomials on symmetric kinds."""
    if dist.kind == "gaussian":
        return HermiteBasis.gauss_rule(n_nodes)
    if dist.is_spherically_symmetric:
        radii, rad_w = dist.radial_support()
        rule = quadrature(dist.d, n_nodes)
        pts = np.concatenate([r * rule.nodes for r in radii])
        wts = np.concatenate([w * rule.prob_weights for w in rad_w])
        return pts, wts
    eta = dist.eta
    if eta.kind == "uniform":
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        return math.sqrt(3.0) * x, w / 2.0
    if eta.kind == "rademacher":
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    grid = np.linspace(0.0, 1.0, 4 * n_nodes + 1)
    mids = (grid[:-1] + grid[1:]) / 2.0
    return np.interp(mids, eta.quantile_u, eta.quantile_q), np.full(mids.size, 1.0 / mids.size)


# ---------------------------------------------------------------------------
# Loss profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossProfile:
    """Population-loss profile in correlation coordinates.

    ``provenance`` is "symmetric-exact" (Gegenbauer spectrum for a spherically
    symmetric input law in dimension d) or "gaussian-hermite" (squared Hermite
    coefficients, P_j replaced by m^j).  ``sq_norm`` is E[phi^2] under the
    input law, so loss(1) = 2 * (sq_norm - sum beta) = 2 * truncation tail.
    """

    provenance: str
    coeffs: np.ndarray
    sq_norm: float
    d: int | None = None
    link: LinkFunction | None = None
    dist: InputDistribution | None = None
    basis: GegenbauerBasis | None = field(default=None, repr=False)

    @property
    def max_degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def total_energy(self) -> float:
        """2 ||phi||^2, the constant term of the loss."""
        return 2.0 * self.sq_norm

    @property
    def energy_residual(self) -> float:
        """Relative gap |E[phi^2] - sum_j beta_j| / E[phi^2] (truncation tail)."""
        return abs(self.sq_norm - float(self.coeffs.sum())) / max(self.sq_norm, 1e-300)

    # -- evaluators -------------------------------------------------------

    def loss(self, m):
        scalar = np.isscalar(m)
        mm = np.atleast_1d(np.asarray(m, dtype=float))
        if self.provenance == "gaussian-hermite":
            acc = np.zeros_like(mm)
            power = np.ones_like(mm)
            for c in self.coeffs:
                acc += c * power
                power = power * mm
            out = 2.0 * (self.sq_norm - acc)
        else:
            out = 2.0 * (self.sq_norm - _clenshaw_gegenbauer(self.coeffs, self.d, mm))
        return float(out[0]) if scalar else out

    def dloss(self, m):
        scalar = np.isscalar(m)
        mm = np.atleast_1d(np.asarray(m, dtype=float))
        if self.provenance == "gaussian-hermite":
            acc = np.zeros_like(mm)
            power = np.ones_like(mm)
            for j in range(1, self.coeffs.size):
                acc += j * self.coeffs[j] * power
                power = power * mm
            out = -2.0 * acc
        else:
            d = self.d
            j = np.arange(1, self.coeffs.size, dtype=float)
            shifted = self.coeffs[1:] * j * (j + d - 2.0) / (d - 1.0)
            out = -2.0 * _clenshaw_gegenbauer(shifted, d + 2, mm)
        return float(out[0]) if scalar else out

    def projected_gradient(self, m):
        """- grad^S L . theta* = -(1 - m^2) loss'(m) at correlation m."""
        mm = np.asarray(m, dtype=float)
        return -(1.0 - mm**2) * self.dloss(m)


def _clenshaw_gegenbauer(coeffs: np.ndarray, d: int, t: np.ndarray) -> np.ndarray:
    """Clenshaw summation of sum_j coeffs[j] P_{j,d}(t) over the recurrence
    P_{k+1} = a_k t P_k + c_k P_{k-1}, a_k = (2k+d-2)/(k+d-2), c_k = -k/(k+d-2)."""
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(coeffs.size - 1, -1, -1):
        a_k = (2.0 * k + d - 2.0) / (k + d - 2.0)
        c_k1 = -(k + 1.0) / (k + 1.0 + d - 2.0)
        b1, b2 = coeffs[k] + a_k * t * b1 + c_k1 * b2, b1
    return b1


def beta_coefficients(
    link: LinkFunction,
    dist: InputDistribution,
    max_degree: int = 32,
    n_nodes: int | None = None,
    residual_warn: float = 0.01,
) -> LossProfile:
    """Exact Gegenbauer spectrum of the population loss for symmetric inputs.

    For each radius r in the (finite) radial support, the rescaled link
    phi(r t) is projected on P_{j,d} under the sphere marginal; the spectrum is
    the mixture of squared normalized coefficients.  Quadrature uses at least
    2 * max_degree + 16 nodes.  Warns when the energy-identity residual
    exceeds ``residual_warn`` (raise ``max_degree``).
    """
    if dist.kind == "gaussian":
        raise TypeError("Gaussian inputs use gaussian_profile (Hermite spectrum)")
    if not dist.is_spherically_symmetric:
        raise TypeError(f"{dist.kind} inputs are not spherically symmetric")
    d = dist.d
    n = max(2 * max_degree + 16, 64) if n_nodes is None else n_nodes
    if n < 2 * max_degree + 16:
        raise ValueError(f"need at least {2 * max_degree + 16} nodes for degree {max_degree}")
    rule = quadrature(d, n)
    basis = get_basis(d, max_degree)
    table = basis.eval_table(rule.nodes)  # (J+1, n)
    dims = np.array([harmonic_dimension(j, d) for j in range(max_degree + 1)])

    radii, rad_w = dist.radial_support()
    coeffs = np.zeros(max_degree + 1)
    sq_norm = 0.0
    for r, w in zip(radii, rad_w):
        fvals = np.asarray(link(r * rule.nodes), dtype=float)
        inner = table @ (rule.prob_weights * fvals)  # <phi^(r), P_j> under u_d
        coeffs += w * dims * inner**2  # alpha_bar^2 = N(j,d) <phi, P_j>^2
        sq_norm += w * float(rule.prob_weights @ fvals**2)

    # coefficients are mixtures of squares, hence >= 0; zero out pure
    # quadrature noise so exact orthogonality cases report exact zeros
    coeffs[coeffs < 1e-30 * max(sq_norm, 1e-300)] = 0.0
    profile = LossProfile(
        provenance="symmetric-exact", coeffs=coeffs, sq_norm=sq_norm,
        d=d, link=link, dist=dist, basis=basis,
    )
    if profile.energy_residual > residual_warn:
        warnings.warn(
            f"energy residual {profile.energy_residual:.2e} above {residual_warn:.0e}; "
            f"increase max_degree beyond {max_degree}",
            TruncationWarning,
        )
    return profile


def gaussian_profile(link: LinkFunction, max_degree: int = 32, n_nodes: int = 200) -> LossProfile:
    """Hermite-spectrum profile for standard Gaussian inputs:
    loss(m) = 2 sum_j <phi, h_j>^2 (1 - m^j)."""
    nodes, weights = HermiteBasis.gauss_rule(n_nodes)
    table = HermiteBasis(max_degree).eval_table(nodes)
    fvals = np.asarray(link(nodes), dtype=float)
    a = table @ (weights * fvals)
    sq_norm = float(weights @ fvals**2)
    return LossProfile(
        provenance="gaussian-hermite", coeffs=a**2, sq_norm=sq_norm, d=None,
        link=link, dist=None,
    )


# ---------------------------------------------------------------------------
# Information exponent
# ---------------------------------------------------------------------------


class InfoExponent(NamedTuple):
    s: int
    s_marginal: int | None  # first nonvanishing projection on the 1-d marginal basis


def information_exponent(profile: LossProfile, tol: float = 1e-8) -> InfoExponent:
    """Smallest positive degree carrying spectrum mass above tol * total
    energy (the quadrature noise floor), cross-checked against the first
    nonvanishing coefficient in the orthogonal basis of the scalar marginal
    (s <= s~)."""
    total = float(profile.coeffs.sum())
    if total <= 0.0:
        raise DegenerateLinkError("profile carries no spectrum mass")
    above = np.nonzero(profile.coeffs[1:] > tol * total)[0]
    if above.size == 0:
        raise DegenerateLinkError(f"all positive-degree coefficients below tol={tol:g}")
    s = int(above[0] + 1)
    return InfoExponent(s, s_marginal=_marginal_exponent(profile, tol, default=s))


def _marginal_exponent(profile: LossProfile, tol: float, default: int) -> int | None:
    if profile.provenance == "gaussian-hermite" or profile.link is None:
        return default if profile.provenance == "gaussian-hermite" else None
    try:
        pts, wts = marginal_quadrature(profile.dist, 2 * profile.max_degree + 16)
    except TypeError:
        return None
    qtable = stieltjes_orthonormal(pts, wts, min(profile.max_degree, 24))
    fvals = np.asarray(profile.link(pts), dtype=float)
    proj = qtable @ (wts * fvals)
    energy = float(np.sum(proj**2))
    if energy <= 0.0:
        return None
    above = np.nonzero(proj[1:] ** 2 > tol * energy)[0]
    return int(above[0] + 1) if above.size else None


def stieltjes_orthonormal(points: np.ndarray, weights: np.ndarray, max_degree: int) -> np.ndarray:
    """Orthonormal polynomials of the discrete measure sum_i w_i delta(x_i),
    tabulated at the points themselves; rows are q_0 .. q_max_degree."""
    q = np.zeros((max_degree + 1, points.size))
    norm0 = math.sqrt(float(weights.sum()))
    q[0] = 1.0 / norm0
    prev = np.zeros_like(points)
    for k in range(max_degree):
        a_k = float(weights @ (points * q[k] ** 2))
        p = (points - a_k) * q[k]
        if k > 0:
            b_k = float(weights @ (points * q[k] * prev))
            p -= b_k * prev
        # full reorthogonalization keeps high degrees usable in float64
        for i in range(k + 1):
            p -= float(weights @ (p * q[i])) * q[i]
        nrm = math.sqrt(max(float(weights @ p**2), 0.0))
        if nrm < 1e-150:
            break
        prev = q[k]
        q[k + 1] = p / nrm
    return q


# ---------------------------------------------------------------------------
# Projected gradient and LPG certification
# ---------------------------------------------------------------------------


def projected_gradient(profile: LossProfile, m):
    """- grad^S L . theta* = 2 (1 - m^2) sum_j beta_j P'_{j,d}(m)."""
    return profile.projected_gradient(m)


@dataclass(frozen=True)
class LpgCertificate:
    """Grid certificate for - grad^S L . theta* >= C (1 - m)(m - b)^{k-1} on [b, 1)."""

    order: int
    scale: float
    constant: float
    grid: np.ndarray
    margin: float
    passed: bool


def lpg_certify(
    profile: LossProfile, order: int, scale: float, grid_size: int = 512,
    min_constant: float = 1e-9,
) -> LpgCertificate:
    """Largest C >= 0 making the local-polynomial-growth inequality hold on the
    grid {scale + i (1 - scale) / grid_size}; passes iff C clears min_constant
    and the projected gradient is nonnegative on the whole grid."""
    if order < 1 or not 0.0 <= scale < 1.0:
        raise ValueError("need order >= 1 and scale in [0, 1)")
    grid = scale + (1.0 - scale) * np.arange(grid_size + 1) / grid_size
    g = profile.projected_gradient(grid)
    interior = grid[1:-1]
    rhs_unit = (1.0 - interior) * (interior - scale) ** (order - 1)
    ratios = g[1:-1] / rhs_unit
    nonneg = bool(np.min(g[:-1]) > -1e-15)  # m = 1 endpoint is identically 0
    constant = max(float(np.min(ratios)), 0.0) if nonneg else 0.0
    margin = float(np.min(g[1:-1] - constant * rhs_unit))
    return LpgCertificate(
        order=order, scale=scale, constant=constant, grid=grid,
        margin=margin, passed=nonneg and constant > min_constant,
    )


# ---------------------------------------------------------------------------
# Spectral sufficient condition diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralConditionReport:
    """Both sides of the spectral sufficient condition at exponent s:
    beta_s >= C and sum_{j>s} beta_j j (j+d-2) upsilon_{j-1,d+2} <= K d^((3-s)/2)."""

    s: int
    beta_s: float
    tail_sum: float
    bound: float
    ratio: float
    scale_estimate: float  # 2 sqrt(s / d), the certified LPG scale when s << d


def spectral_condition_check(profile: LossProfile, s: int, big_k: float = 1.0) -> SpectralConditionReport:
    if profile.provenance != "symmetric-exact":
        raise TypeError("spectral condition applies to symmetric-exact profiles")
    d = profile.d
    deriv_basis = get_basis(d + 2, max(profile.max_degree, 2))
    tail = 0.0
    for j in range(s + 1, profile.max_degree + 1):
        if profile.coeffs[j] <= 0.0:
            continue
        tail += profile.coeffs[j] * j * (j + d - 2.0) * deriv_basis.upsilon(j - 1)
    bound = big_k * d ** ((3.0 - s) / 2.0)
    return SpectralConditionReport(
        s=s, beta_s=float(profile.coeffs[s]), tail_sum=tail, bound=bound,
        ratio=tail / bound, scale_estimate=2.0 * math.sqrt(s / d),
    )


def derivative_moment_bound(profile: LossProfile, n_nodes: int = 256) -> tuple[float, float]:
    """(sum_j j^2 beta_j, area_ratio * sqrt(E_rho[r^4] E_eta[(phi')^4])).

    The left side is controlled by the right for links with fourth-moment
    derivatives; used as a numerical regularity check, never asserted inline.
    """
    if profile.provenance != "symmetric-exact":
        raise TypeError("derivative moment bound applies to symmetric-exact profiles")
    j = np.arange(profile.coeffs.size, dtype=float)
    lhs = float(np.sum(j**2 * profile.coeffs))
    r4 = profile.dist.fourth_radial_moment()
    pts, wts = marginal_quadrature(profile.dist, n_nodes)
    ed4 = float(wts @ np.asarray(profile.link.df(pts), dtype=float) ** 4)
    return lhs, sphere_area_ratio(profile.d) * math.sqrt(r4 * ed4)
