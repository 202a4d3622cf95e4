"""Deviation of a non-symmetric input law from the Gaussian reference.

Quantifies how far the population loss and its projected gradient under an
input law nu sit from the Gaussian closed forms at the same correlation:

    delta_L(theta)      = |L_nu(theta) - loss_gauss(m)|,
    delta_gradL(theta)  = |grad_S L_nu . theta* - loss_gauss'(m) (1 - m^2)|.

Both are estimated by Monte Carlo, with common-random-number Gaussian coupling
(coordinatewise quantile transform) whenever nu is a product measure.  The
companions are the sparsity functional chi = ||theta||_4^2 + ||theta*||_4^2,
an enumeration-exact Stein coupling bound check for product measures, and a
lower-bound estimator of the supremal two-dimensional projected Wasserstein
distance to the Gaussian.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from sphindex.landscape import LossProfile, gaussian_profile
from sphindex.links import LinkFunction
from sphindex.measures import InputDistribution, ScalarLaw, make_rng, sample_with


def chi(theta: np.ndarray, theta_star: np.ndarray) -> float:
    """||theta||_4^2 + ||theta*||_4^2 for unit vectors (2/sqrt(d) dense .. 2 sparse)."""
    t = np.asarray(theta, dtype=float)
    s = np.asarray(theta_star, dtype=float)
    return float(math.sqrt(np.sum(t**4)) + math.sqrt(np.sum(s**4)))


# ---------------------------------------------------------------------------
# Loss / gradient deviation estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationReport:
    """Monte-Carlo deviation of (loss, projected gradient) from the Gaussian
    reference at one (theta, theta*) pair; signed values keep the pre-folding
    mean for unbiasedness checks, the deltas fold with absolute value."""

    m: float
    chi: float
    n: int
    coupled: bool
    loss_nu: float
    loss_ref: float
    grad_nu: float
    grad_ref: float
    delta_l_signed: float
    delta_l_se: float
    delta_grad_signed: float
    delta_grad_se: float

    @property
    def delta_l(self) -> float:
        return abs(self.delta_l_signed)

    @property
    def delta_grad(self) -> float:
        return abs(self.delta_grad_signed)


def _loss_and_grad_values(link: LinkFunction, x: np.ndarray, theta: np.ndarray,
                          theta_star: np.ndarray, m: float) -> tuple[np.ndarray, np.ndarray]:
    u = x @ theta
    u_star = x @ theta_star
    e = np.asarray(link(u), dtype=float) - np.asarray(link(u_star), dtype=float)
    loss_vals = e * e
    grad_vals = 2.0 * np.asarray(link.deriv(u), dtype=float) * e * (u_star - m * u)
    return loss_vals, grad_vals


def gaussian_coupling(dist: InputDistribution, z: np.ndarray) -> np.ndarray:
    """Map standard Gaussian draws to the product law coordinatewise (quantile
    transform), giving common-random-number pairs (x, z)."""
    if dist.kind != "product":
        raise TypeError("Gaussian coupling is defined for product measures")
    eta = dist.eta
    if eta.kind == "rademacher":
        return np.where(z >= 0.0, 1.0, -1.0)
    u = ndtr(z)
    if eta.kind == "uniform":
        return math.sqrt(3.0) * (2.0 * u - 1.0)
    if eta.kind == "two_point":
        return np.where(u < eta.p, eta.atoms()[0][0], eta.atoms()[0][1])
    return np.interp(u, eta.quantile_u, eta.quantile_q)


def mc_loss_and_gradient(
    dist: InputDistribution, link: LinkFunction, theta, theta_star, n: int, seed=0,
) -> tuple[float, float, float, float]:
    """(loss mean, loss SE, projected-gradient mean, gradient SE) under dist."""
    theta = np.asarray(theta, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    m = float(theta @ theta_star)
    x = sample_with(dist, make_rng(seed, 101), n)
    lv, gv = _loss_and_grad_values(link, x, theta, theta_star, m)
    return (
        float(lv.mean()), float(lv.std(ddof=1) / math.sqrt(n)),
        float(gv.mean()), float(gv.std(ddof=1) / math.sqrt(n)),
    )


def delta_estimates(
    dist: InputDistribution,
    link: LinkFunction,
    theta,
    theta_star,
    n: int = 10**5,
    seed=0,
    profile: LossProfile | None = None,
    min_se_target: float | None = None,
) -> PerturbationReport:
    """Estimate the loss / projected-gradient deviation from the Gaussian
    reference at (theta, theta*).

    Product measures are paired with their Gaussian quantile coupling so the
    deviation is estimated from common-random-number differences; other laws
    use an independent stream against the exact Hermite reference.
    """
    theta = np.asarray(theta, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    m = float(theta @ theta_star)
    if profile is None:
        profile = gaussian_profile(link)
    loss_ref = float(profile.loss(m))
    grad_ref = float(profile.dloss(m) * (1.0 - m * m))  # grad_S L_gauss . theta*

    rng = make_rng(seed, 100)
    if dist.kind == "product":
        z = rng.standard_normal((n, dist.d))
        x = gaussian_coupling(dist, z)
        lv_nu, gv_nu = _loss_and_grad_values(link, x, theta, theta_star, m)
        lv_g, gv_g = _loss_and_grad_values(link, z, theta, theta_star, m)
        dl = lv_nu - lv_g
        dg = gv_nu - gv_g
        loss_nu = float(lv_nu.mean())
        grad_nu = float(gv_nu.mean())
        delta_l = float(dl.mean())
        delta_g = float(dg.mean())
        se_l = float(dl.std(ddof=1) / math.sqrt(n))
        se_g = float(dg.std(ddof=1) / math.sqrt(n))
        coupled = True
    else:
        x = sample_with(dist, rng, n)
        lv_nu, gv_nu = _loss_and_grad_values(link, x, theta, theta_star, m)
        loss_nu = float(lv_nu.mean())
        grad_nu = float(gv_nu.mean())
        delta_l = loss_nu - loss_ref
        delta_g = grad_nu - grad_ref
        se_l = float(lv_nu.std(ddof=1) / math.sqrt(n))
        se_g = float(gv_nu.std(ddof=1) / math.sqrt(n))
        coupled = False
    if min_se_target is not None and max(se_l, se_g) > min_se_target:
        import warnings

        warnings.warn(
            f"standard error {max(se_l, se_g):.2e} above target {min_se_target:.2e}; "
            f"increase n beyond {n}"
        )
    return PerturbationReport(
        m=m, chi=chi(theta, theta_star), n=n, coupled=coupled,
        loss_nu=loss_nu, loss_ref=loss_ref, grad_nu=grad_nu, grad_ref=grad_ref,
        delta_l_signed=delta_l, delta_l_se=se_l,
        delta_grad_signed=delta_g, delta_grad_se=se_g,
    )


def gradient_deviation_ratios(delta_grad: float, m: float, w1: float) -> tuple[float, float]:
    """delta_gradL / ((1-m^2) w log(1/w)) and the (log w)^2 variant; diagnostic
    normalizations of the projected-Wasserstein gradient bound, report-only."""
    if not 0.0 < w1 < 1.0:
        return math.nan, math.nan
    base = (1.0 - m * m) * w1
    return delta_grad / (base * math.log(1.0 / w1)), delta_grad / (base * math.log(w1) ** 2)


# ---------------------------------------------------------------------------
# Stein coupling bound checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteinTestFunction:
    """Smooth test functional with per-coordinate third-derivative sup norms.

    ``h`` maps an (n, d) batch to (n,) values; ``d3_sup[i]`` bounds
    |d^3 h / dx_i^3| over R^d; ``gaussian_mean`` is the closed-form E h(Z)
    when available (else tensor quadrature / Monte Carlo is used).
    """

    name: str
    h: Callable
    d3_sup: np.ndarray
    gaussian_mean: float | None = None


@dataclass(frozen=True)
class SteinCheck:
    name: str
    d: int
    lhs: float
    rhs: float
    se: float
    method: str
    passed: bool


def _enumerate_product_mean(eta: ScalarLaw, h: Callable, d: int) -> float:
    values, probs = eta.atoms()
    k = values.size
    if k**d > 2**21:
        raise ValueError(f"enumeration too large: {k}^{d} atoms")
    grids = np.array(list(itertools.product(values, repeat=d)), dtype=float)
    pmat = np.array(list(itertools.product(probs, repeat=d)), dtype=float)
    return float(np.prod(pmat, axis=1) @ np.asarray(h(grids), dtype=float))


def _tensor_quadrature_mean(points: np.ndarray, weights: np.ndarray, h: Callable, d: int) -> float:
    if points.size**d > 2**22:
        raise ValueError("tensor quadrature too large")
    grids = np.array(list(itertools.product(points, repeat=d)), dtype=float)
    wmat = np.array(list(itertools.product(weights, repeat=d)), dtype=float)
    return float(np.prod(wmat, axis=1) @ np.asarray(h(grids), dtype=float))


def stein_bound_check(
    eta: ScalarLaw, test: SteinTestFunction, d: int, n: int = 10**6, seed=0,
) -> SteinCheck:
    """Check |E h(X) - E h(Z)| <= (5/6) sum_i tau_i^3 ||d^3_i h||_inf for
    X with i.i.d. eta coordinates and Z standard Gaussian.

    Discrete coordinate laws are enumerated exactly; continuous ones use
    tensor quadrature at d <= 4 and Monte Carlo (n >= 10^6) above, with the
    pass margin widened by three standard errors.
    """
    if test.d3_sup.size != d:
        raise ValueError("third-derivative sup norms must have one entry per coordinate")
    tau3 = eta.moment(3, absolute=True)
    rhs = (5.0 / 6.0) * tau3 * float(np.sum(test.d3_sup))
    se = 0.0
    if eta.is_discrete:
        mean_nu = _enumerate_product_mean(eta, test.h, d)
        method = "enumeration"
    elif d <= 4:
        x, w = np.polynomial.legendre.leggauss(64)
        if eta.kind == "uniform":
            mean_nu = _tensor_quadrature_mean(math.sqrt(3.0) * x, w / 2.0, test.h, d)
        else:
            grid = np.linspace(0.0, 1.0, 2049)
            mids = (grid[:-1] + grid[1:]) / 2.0
            pts = np.interp(mids, eta.quantile_u, eta.quantile_q)
            mean_nu = _tensor_quadrature_mean(pts, np.full(mids.size, 1.0 / mids.size), test.h, d)
        method = "tensor-quadrature"
    else:
        rng = make_rng(seed, 7)
        x = eta.sample(rng, (n, d))
        vals = np.asarray(test.h(x), dtype=float)
        mean_nu = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n))
        method = "monte-carlo"
    if test.gaussian_mean is not None:
        mean_gauss = test.gaussian_mean
    elif d <= 4:
        nodes, weights = np.polynomial.hermite_e.hermegauss(64)
        mean_gauss = _tensor_quadrature_mean(nodes, weights / weights.sum(), test.h, d)
    else:
        rng = make_rng(seed, 8)
        vals = np.asarray(test.h(rng.standard_normal((n, d))), dtype=float)
        mean_gauss = float(vals.mean())
        se = math.hypot(se, float(vals.std(ddof=1) / math.sqrt(n)))
    lhs = abs(mean_nu - mean_gauss)
    return SteinCheck(
        name=test.name, d=d, lhs=lhs, rhs=rhs, se=se, method=method,
        passed=lhs <= rhs + 3.0 * se,
    )


def cosine_test(v, shift: float = 0.0) -> SteinTestFunction:
    """h(x) = cos(v . x + shift); E h(Z) = exp(-|v|^2/2) cos(shift),
    |d^3_i h| <= |v_i|^3."""
    v = np.asarray(v, dtype=float)
    return SteinTestFunction(
        name=f"cos(v.x{'+%g' % shift if shift else ''})",
        h=lambda x: np.cos(x @ v + shift),
        d3_sup=np.abs(v) ** 3,
        gaussian_mean=math.exp(-float(v @ v) / 2.0) * math.cos(shift),
    )


def sine_test(v) -> SteinTestFunction:
    v = np.asarray(v, dtype=float)
    return SteinTestFunction(
        name="sin(v.x)", h=lambda x: np.sin(x @ v), d3_sup=np.abs(v) ** 3,
        gaussian_mean=0.0,
    )


def cubic_test(v) -> SteinTestFunction:
    """h(x) = (v . x)^3: constant third derivatives 6 v_i^3, E h(Z) = 0, and
    E h(X) = sum_i v_i^3 E X_i^3 (third-cumulant expression)."""
    v = np.asarray(v, dtype=float)
    return SteinTestFunction(
        name="(v.x)^3", h=lambda x: (x @ v) ** 3, d3_sup=6.0 * np.abs(v) ** 3,
        gaussian_mean=0.0,
    )


def gaussian_bump_test(v) -> SteinTestFunction:
    """h(x) = exp(-(v . x)^2); E h(Z) = (1 + 2|v|^2)^(-1/2).

    |f'''| for f(u) = exp(-u^2) is maximized at u^2 = (3 - sqrt(6))/2 with
    value (12u - 8u^3) exp(-u^2); coordinate sups scale by |v_i|^3.
    """
    v = np.asarray(v, dtype=float)
    u_sq = (3.0 - math.sqrt(6.0)) / 2.0
    u = math.sqrt(u_sq)
    f3_sup = abs(12.0 * u - 8.0 * u**3) * math.exp(-u_sq)
    return SteinTestFunction(
        name="exp(-(v.x)^2)",
        h=lambda x: np.exp(-((x @ v) ** 2)),
        d3_sup=f3_sup * np.abs(v) ** 3,
        gaussian_mean=1.0 / math.sqrt(1.0 + 2.0 * float(v @ v)),
    )


def default_stein_suite() -> list[tuple[ScalarLaw, SteinTestFunction, int]]:
    """The enumeration-exact (eta, h, d) combinations used by the acceptance
    suite; all coordinate laws are discrete so the left side is exact."""
    rademacher = ScalarLaw(kind="rademacher")
    skewed_02 = ScalarLaw(kind="two_point", p=0.2)
    skewed_03 = ScalarLaw(kind="two_point", p=0.3)
    cases = [
        (rademacher, cosine_test(np.full(4, 0.5)), 4),
        (rademacher, cosine_test(np.array([0.8, 0.4, 0.3, 0.2, 0.2, 0.1, 0.1, 0.1])), 8),
        (skewed_02, cubic_test(np.array([0.7, 0.5, 0.4, 0.3])), 4),
        (skewed_03, cosine_test(np.array([0.6, 0.5, 0.4, 0.3, 0.2, 0.2]), shift=0.7), 6),
        (rademacher, sine_test(np.array([0.9, 0.5, 0.4, 0.3, 0.2, 0.1])), 6),
        (skewed_02, gaussian_bump_test(np.array([0.6, 0.5, 0.3, 0.2])), 4),
    ]
    return cases


# ---------------------------------------------------------------------------
# Projected Wasserstein lower-bound estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class W1Estimate:
    """Lower-bound estimate of sup over 2-planes of W1(plane law, Gaussian)."""

    value: float
    per_plane: np.ndarray
    best_plane: np.ndarray
    n_per_subspace: int
    method: str


def w1_exact_pairing(a: np.ndarray, b: np.ndarray) -> float:
    """Exact empirical W1 between equal-size point clouds (optimal assignment)."""
    if a.shape != b.shape:
        raise ValueError("point clouds must have matching shapes")
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def w1_max_sliced(a: np.ndarray, b: np.ndarray, n_dirs: int = 64) -> float:
    """Max over fixed circle directions of the 1-d W1 of the projections;
    a lower bound of the 2-d W1 (projections are 1-Lipschitz)."""
    angles = np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.stack([np.cos(angles), np.sin(angles)])
    pa = np.sort(a @ dirs, axis=0)
    pb = np.sort(b @ dirs, axis=0)
    return float(np.max(np.mean(np.abs(pa - pb), axis=0)))


def w1_atoms_vs_sample(atoms: np.ndarray, probs: np.ndarray, sample: np.ndarray) -> float:
    """Empirical W1 between a small discrete law and a sample, by replicating
    atoms to their rounded capacities and solving the assignment exactly."""
    n = sample.shape[0]
    counts = np.floor(probs * n).astype(int)
    while counts.sum() < n:
        counts[int(np.argmax(probs * n - counts))] += 1
    rep = np.repeat(atoms, counts, axis=0)
    return w1_exact_pairing(rep, sample)


def projected_w1_estimate(
    dist: InputDistribution,
    n_subspaces: int = 16,
    n_per_subspace: int = 512,
    seed=0,
    include_coordinate_planes: bool = True,
    exact_threshold: int = 1024,
    n_slices: int = 64,
) -> W1Estimate:
    """Maximize the per-plane empirical W1 to the 2-d standard Gaussian over
    random and coordinate-aligned 2-planes.  The result is a lower bound of
    the supremal projected distance: planes are a finite subset and sliced
    fallbacks only shrink the per-plane value.
    """
    d = dist.d
    rng = make_rng(seed, 11)
    planes = []
    for _ in range(n_subspaces):
        q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
        planes.append(q)
    if include_coordinate_planes:
        for (i, j) in [(0, 1), (0, d - 1), (d // 2, d // 2 + 1)]:
            if i == j:
                continue
            p = np.zeros((d, 2))
            p[i, 0] = 1.0
            p[j, 1] = 1.0
            planes.append(p)
    exact = n_per_subspace <= exact_threshold
    values = np.empty(len(planes))
    for k, plane in enumerate(planes):
        x = sample_with(dist, make_rng(seed, 12, k), n_per_subspace) @ plane
        z = make_rng(seed, 13, k).standard_normal((n_per_subspace, 2))
        values[k] = w1_exact_pairing(x, z) if exact else w1_max_sliced(x, z, n_slices)
    best = int(np.argmax(values))
    return W1Estimate(
        value=float(values[best]), per_plane=values, best_plane=planes[best],
        n_per_subspace=n_per_subspace, method="assignment" if exact else "max-sliced",
    )
