"""Gegenbauer and Hermite polynomial engine.

Gegenbauer polynomials ``P_{j,d}`` are indexed by degree ``j`` and an ambient
dimension ``d >= 3`` and normalized so that ``P_{j,d}(1) = 1``.  They are
orthogonal on ``[-1, 1]`` for the weight ``(1 - t^2)^((d-3)/2)``, the law of a
single coordinate of a uniform point on the unit sphere of R^d.  In this
normalization the three-term recurrence reads

    P_{j+1}(t) = ((2j + d - 2) * t * P_j(t) - j * P_{j-1}(t)) / (j + d - 2)

with P_0 = 1 and P_1 = t.  All recurrence coefficients are ratios bounded by 2,
so evaluation never overflows even for large ``j + d``.

Roots are obtained from the symmetric tridiagonal Jacobi matrix of the
recurrence (Golub-Welsch) followed by one guarded Newton step; the same
machinery yields Gauss-Jacobi quadrature rules with alpha = beta = (d-3)/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln


class DegreeError(ValueError):
    """Requested degree outside the basis range."""


class DomainError(ValueError):
    """Evaluation point outside the polynomial's natural domain."""


class RootFindingError(RuntimeError):
    """Eigenvalue extraction or Newton refinement failed."""


def harmonic_dimension(j: int, d: int) -> float:
    """Dimension N(j, d) of degree-j spherical harmonics on the sphere of R^d.

    N(0, d) = 1 and for j >= 1,  N(j, d) = (2j + d - 2)/j * C(j + d - 3, j - 1).
    The squared norm of P_{j,d} under the probability marginal is 1/N(j, d).
    """
    if j < 0:
        raise DegreeError(f"degree must be >= 0, got {j}")
    if j == 0:
        return 1.0
    return (2 * j + d - 2) * math.comb(j + d - 3, j - 1) / j


def marginal_log_mass(d: int) -> float:
    """log of Z_d = int_{-1}^{1} (1 - t^2)^((d-3)/2) dt."""
    return 0.5 * math.log(math.pi) + gammaln((d - 1) / 2.0) - gammaln(d / 2.0)


def _check_dimension(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or d < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {d!r}")


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Jacobi rule for the weight (1 - t^2)^((d-3)/2) on [-1, 1].

    ``weights`` integrate against the *unnormalized* weight (they sum to the
    weight-measure mass Z_d, computed in log-space); ``prob_weights`` sum to 1
    and integrate against the probability marginal.
    """

    d: int
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    log_mass: float

    @property
    def prob_weights(self) -> np.ndarray:
        return self.weights / math.exp(self.log_mass)

    def integrate(self, values: np.ndarray) -> float:
        """Integrate tabulated values against the unnormalized weight."""
        return float(self.weights @ np.asarray(values, dtype=float))

    def expect(self, values: np.ndarray) -> float:
        """Expectation of tabulated values under the probability marginal."""
        return float(self.prob_weights @ np.asarray(values, dtype=float))


@dataclass(frozen=True)
class RootReport:
    """All real roots of P_{j,d} plus the certified bracket for the largest one.

    ``bracket`` combines the closed-form upper bound on the largest root with
    the closed-form lower bound (both in terms of j and lambda = d/2 - 1), each
    padded by a relative 1e-12 so exactly-tight cases (j = 2) stay inside.
    ``upsilon`` is the magnitude of the deepest negative value of P_{j,d} on
    (0, 1), attained at ``argmin`` = largest root of P_{j-1,d+2}.
    """

    j: int
    d: int
    roots: np.ndarray
    residuals: np.ndarray
    bracket: tuple[float, float]
    upsilon: float
    argmin: float

    @property
    def largest_root(self) -> float:
        return float(self.roots[-1])


class GegenbauerBasis:
    """Evaluator for P_{j,d}, j <= max_degree, with the P(1)=1 normalization."""

    def __init__(self, d: int, max_degree: int):
        _check_dimension(d)
        if max_degree < 0:
            raise DegreeError(f"max_degree must be >= 0, got {max_degree}")
        self.d = int(d)
        self.max_degree = int(max_degree)
        self.lam = self.d / 2.0 - 1.0
        # P_{j+1} = (a_j * t + b_j) P_j + c_j P_{j-1}, j = 0..max_degree-1
        j = np.arange(max(self.max_degree, 1), dtype=float)
        self.rec_a = (2.0 * j + self.d - 2.0) / (j + self.d - 2.0)
        self.rec_b = np.zeros_like(j)
        self.rec_c = -j / (j + self.d - 2.0)
        self._deriv_basis: GegenbauerBasis | None = None

    def __repr__(self) -> str:
        return f"GegenbauerBasis(d={self.d}, max_degree={self.max_degree})"

    # -- bookkeeping ------------------------------------------------------

    def _check_degree(self, j: int, minimum: int = 0) -> None:
        if j < minimum or j > self.max_degree:
            raise DegreeError(
                f"degree {j} outside [{minimum}, {self.max_degree}] for {self!r}"
            )

    @staticmethod
    def _check_domain(t: np.ndarray) -> None:
        if np.any(np.abs(t) > 1.0 + 1e-14):
            raise DomainError("evaluation point outside [-1, 1]")

    def recurrence_coefficients(self) -> np.ndarray:
        """Per-degree triples (a_j, b_j, c_j); row j maps (P_j, P_{j-1}) -> P_{j+1}."""
        return np.column_stack([self.rec_a, self.rec_b, self.rec_c])

    def derivative_basis(self) -> "GegenbauerBasis":
        """Basis of dimension d+2 carrying the derivatives (P'_{j,d} is a
        multiple of P_{j-1,d+2})."""
        if self._deriv_basis is None:
            self._deriv_basis = GegenbauerBasis(self.d + 2, max(self.max_degree - 1, 0))
        return self._deriv_basis

    def norm_sq(self, j: int) -> float:
        """Squared norm of P_{j,d} under the probability marginal: 1/N(j,d)."""
        self._check_degree(j)
        return 1.0 / harmonic_dimension(j, self.d)

    # -- evaluation -------------------------------------------------------

    def eval(self, j: int, t, check_domain: bool = True):
        """Evaluate P_{j,d}(t) by forward recurrence (scalar or array t)."""
        self._check_degree(j)
        scalar = np.isscalar(t)
        tt = np.asarray(t, dtype=float)
        if check_domain:
            self._check_domain(tt)
        p_prev = np.ones_like(tt)
        if j == 0:
            return float(p_prev) if scalar else p_prev
        p = tt.copy()
        for k in range(1, j):
            p, p_prev = self.rec_a[k] * tt * p + self.rec_c[k] * p_prev, p
        return float(p) if scalar else p

    def eval_table(self, t, degrees_up_to: int | None = None) -> np.ndarray:
        """Table of P_{j,d}(t) for j = 0..degrees_up_to, shape (J+1, len(t))."""
        J = self.max_degree if degrees_up_to is None else degrees_up_to
        self._check_degree(J)
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        table = np.empty((J + 1, tt.size))
        table[0] = 1.0
        if J >= 1:
            table[1] = tt
        for k in range(1, J):
            table[k + 1] = self.rec_a[k] * tt * table[k] + self.rec_c[k] * table[k - 1]
        return table

    def eval_derivative(self, j: int, t, check_domain: bool = True):
        """P'_{j,d}(t) = j (j + d - 2) / (d - 1) * P_{j-1,d+2}(t)."""
        self._check_degree(j)
        if j == 0:
            tt = np.asarray(t, dtype=float)
            return 0.0 if np.isscalar(t) else np.zeros_like(tt)
        factor = j * (j + self.d - 2.0) / (self.d - 1.0)
        return factor * self.derivative_basis().eval(j - 1, t, check_domain=check_domain)

    # -- roots and quadrature ---------------------------------------------

    def jacobi_offdiag(self, n: int) -> np.ndarray:
        """Off-diagonal of the n x n symmetric Jacobi matrix.

        From t P_j = A_j P_{j+1} + C_j P_{j-1} with A_j = (j+d-2)/(2j+d-2) and
        C_j = j/(2j+d-2), the orthonormalized off-diagonal entries are
        sqrt(A_j * C_{j+1}).  The diagonal vanishes (even weight).
        """
        j = np.arange(n - 1, dtype=float)
        big_a = (j + self.d - 2.0) / (2.0 * j + self.d - 2.0)
        big_c = (j + 1.0) / (2.0 * (j + 1.0) + self.d - 2.0)
        return np.sqrt(big_a * big_c)

    def roots(self, j: int) -> np.ndarray:
        """All j roots of P_{j,d}, ascending, Newton-refined."""
        self._check_degree(j, minimum=1)
        if j == 1:
            return np.zeros(1)
        try:
            nodes = eigh_tridiagonal(np.zeros(j), self.jacobi_offdiag(j), eigvals_only=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise RootFindingError(f"eigensolve failed for j={j}, d={self.d}: {exc}") from exc
        nodes = np.sort(nodes)
        # one guarded Newton step per root, kept inside the eigenvalue gaps
        lo = np.concatenate([[-1.0], (nodes[:-1] + nodes[1:]) / 2.0])
        hi = np.concatenate([(nodes[:-1] + nodes[1:]) / 2.0, [1.0]])
        pv = self.eval(j, nodes)
        dv = self.eval_derivative(j, nodes)
        step = np.where(dv != 0.0, pv / np.where(dv == 0.0, 1.0, dv), 0.0)
        refined = np.clip(nodes - step, lo, hi)
        improved = np.abs(self.eval(j, refined)) <= np.abs(pv)
        return np.where(improved, refined, nodes)

    def largest_root_bounds(self, j: int) -> tuple[float, float]:
        """Certified [lower, upper] bracket for the largest root of P_{j,d}.

        Upper: z <= sqrt((j-1)(j+d-4) / ((j+d/2-3)(j+d/2-2))) * cos(pi/(j+1)).
        Lower: z^2 > 1 - (2L+1)(2L+3) / ((j-1)(j+2L+1) + (2L+1)(2L+3)) with
        L = d/2 - 1.  Both are padded by a relative 1e-12 (the j = 2 case is an
        exact equality on both sides).
        """
        if j < 2:
            raise DegreeError(f"largest-root bounds need j >= 2, got {j}")
        d, lam = self.d, self.lam
        upper_sq = (j - 1.0) * (j + d - 4.0) / ((j + d / 2.0 - 3.0) * (j + d / 2.0 - 2.0))
        upper = math.sqrt(max(upper_sq, 0.0)) * math.cos(math.pi / (j + 1.0))
        g = (2.0 * lam + 1.0) * (2.0 * lam + 3.0)
        h = (j - 1.0) * (j + 2.0 * lam + 1.0) + g
        lower = math.sqrt(max(1.0 - g / h, 0.0))
        pad = 1e-12
        return lower * (1.0 - pad), upper * (1.0 + pad)

    def all_roots_sq_bounds(self, j: int) -> tuple[float, float]:
        """Two-sided bound on z^2 valid for every root of P_{j,d}:
        (b - (j-2) sqrt(c)) / a <= z^2 <= (b + (j-2) sqrt(c)) / a."""
        lam = self.lam
        b = j**3 + 2.0 * (lam - 1.0) * j**2 - (3.0 * lam - 5.0) * j + 4.0 * (lam - 1.0)
        a = 2.0 * (j + lam - 1.0) * (j**2 + j * (lam - 1.0) + 4.0 * (lam + 1.0))
        c = j**2 * (j + 2.0 * lam) ** 2 + (2.0 * lam + 1.0) * (
            j**2 + 2.0 * (lam + 3.0) * j + 8.0 * (lam - 1.0)
        )
        spread = (j - 2.0) * math.sqrt(max(c, 0.0))
        return (b - spread) / a, (b + spread) / a

    def root_report(self, j: int, residual_tol: float = 1e-10) -> RootReport:
        self._check_degree(j, minimum=2)
        roots = self.roots(j)
        residuals = np.abs(self.eval(j, roots))
        if residuals.max() > residual_tol:
            raise RootFindingError(
                f"root residual {residuals.max():.3e} above {residual_tol:.1e} "
                f"for j={j}, d={self.d}"
            )
        argmin = float(self.derivative_basis().roots(j - 1)[-1])
        ups = -self.eval(j, argmin)
        return RootReport(
            j=j,
            d=self.d,
            roots=roots,
            residuals=residuals,
            bracket=self.largest_root_bounds(j),
            upsilon=float(ups),
            argmin=argmin,
        )

    def upsilon(self, j: int) -> float:
        """Magnitude of the deepest negative value of P_{j,d} on (0, 1).

        Equals -P_{j,d}(z) at z = largest root of P_{j-1,d+2}; the local maxima
        of |P_{j,d}| increase toward the endpoints so this is the global dip.
        Degrees 0 and 1 have no interior dip: upsilon is 0 there by convention.
        """
        self._check_degree(j)
        if j < 2:
            return 0.0
        argmin = float(self.derivative_basis().roots(j - 1)[-1])
        return float(-self.eval(j, argmin))

    def upsilon_decay_bound(self, j: int) -> float:
        """Closed-form decay envelope [1 - (L/(j+L))^2]^(j/2), L = d/2 - 1."""
        ratio = self.lam / (j + self.lam)
        return (1.0 - ratio * ratio) ** (j / 2.0)


# ---------------------------------------------------------------------------
# Hermite basis (probabilists', orthonormal under the standard Gaussian)
# ---------------------------------------------------------------------------


class HermiteBasis:
    """Orthonormal probabilists' Hermite polynomials h_j, E_gamma[h_i h_j] = delta."""

    def __init__(self, max_degree: int):
        if max_degree < 0:
            raise DegreeError(f"max_degree must be >= 0, got {max_degree}")
        self.max_degree = int(max_degree)
        self._inv_sqrt_fact = np.array(
            [1.0 / math.sqrt(math.factorial(k)) for k in range(self.max_degree + 1)]
        )

    def eval(self, j: int, t):
        """h_j(t) = He_j(t) / sqrt(j!) with He monic probabilists' Hermite."""
        if j < 0 or j > self.max_degree:
            raise DegreeError(f"degree {j} outside [0, {self.max_degree}]")
        scalar = np.isscalar(t)
        tt = np.asarray(t, dtype=float)
        he_prev = np.ones_like(tt)
        if j == 0:
            return 1.0 if scalar else he_prev
        he = tt.copy()
        for k in range(1, j):
            he, he_prev = tt * he - k * he_prev, he
        out = he * self._inv_sqrt_fact[j]
        return float(out) if scalar else out

    def eval_table(self, t, degrees_up_to: int | None = None) -> np.ndarray:
        J = self.max_degree if degrees_up_to is None else degrees_up_to
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        he = np.empty((J + 1, tt.size))
        he[0] = 1.0
        if J >= 1:
            he[1] = tt
        for k in range(1, J):
            he[k + 1] = tt * he[k] - k * he[k - 1]
        return he * self._inv_sqrt_fact[: J + 1, None]

    def eval_derivative(self, j: int, t):
        """h_j'(t) = sqrt(j) h_{j-1}(t)."""
        if j == 0:
            tt = np.asarray(t, dtype=float)
            return 0.0 if np.isscalar(t) else np.zeros_like(tt)
        return math.sqrt(j) * self.eval(j - 1, t)

    @staticmethod
    def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Hermite nodes and probability weights for the standard Gaussian."""
        nodes, weights = np.polynomial.hermite_e.hermegauss(n)
        return nodes, weights / weights.sum()


# ---------------------------------------------------------------------------
# Module-level operations (thin wrappers over the basis classes)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=128)
def _cached_basis(d: int, max_degree: int) -> GegenbauerBasis:
    return GegenbauerBasis(d, max_degree)


def get_basis(d: int, max_degree: int) -> GegenbauerBasis:
    """Shared immutable basis instance (bases are safe to cache and share)."""
    return _cached_basis(int(d), int(max_degree))


def eval_gegenbauer(basis: GegenbauerBasis, j: int, t):
    return basis.eval(j, t)


def eval_gegenbauer_derivative(basis: GegenbauerBasis, j: int, t):
    return basis.eval_derivative(j, t)


def gegenbauer_roots(basis: GegenbauerBasis, j: int) -> RootReport:
    return basis.root_report(j)


def upsilon(basis: GegenbauerBasis, j: int) -> float:
    return basis.upsilon(j)


def eval_hermite(basis: HermiteBasis, j: int, t):
    return basis.eval(j, t)


def taylor_lower_bound_check(basis: GegenbauerBasis, j: int, t: float) -> bool:
    """Check P_{j,d}(t) >= (t - z_{j,d})^j for t at or beyond the largest root."""
    z = basis.root_report(j).largest_root
    if t < z - 1e-12:
        raise DomainError(f"t={t} below the largest root {z:.6f} of P_{{{j},{basis.d}}}")
    return bool(basis.eval(j, min(t, 1.0)) >= (t - z) ** j - 1e-12)


def quadrature(d: int, n: int) -> QuadratureRule:
    """Gauss-Jacobi rule with alpha = beta = (d-3)/2 via Golub-Welsch.

    Nodes are the roots of P_{n,d}; weights come from the squared first
    components of the Jacobi-matrix eigenvectors, scaled by the weight-measure
    mass Z_d (held in log-space to stay safe at extreme d).
    """
    _check_dimension(d)
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if n == 1:
        nodes, first_sq = np.zeros(1), np.ones(1)
    else:
        basis = get_basis(d, n)
        try:
            nodes, vecs = eigh_tridiagonal(np.zeros(n), basis.jacobi_offdiag(n))
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise RootFindingError(f"quadrature eigensolve failed for d={d}, n={n}: {exc}") from exc
        order = np.argsort(nodes)
        nodes = nodes[order]
        first_sq = vecs[0, order] ** 2
    log_mass = marginal_log_mass(d)
    return QuadratureRule(
        d=int(d), n=int(n), nodes=nodes, weights=first_sq * math.exp(log_mass), log_mass=log_mass
    )


# ---------------------------------------------------------------------------
# CSV dumps
# ---------------------------------------------------------------------------


def dump_recurrence_csv(basis: GegenbauerBasis, path) -> None:
    """Write the per-degree recurrence triples (a_j, b_j, c_j)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "d", "a", "b", "c"])
        for j, (a, b, c) in enumerate(basis.recurrence_coefficients()):
            writer.writerow([j, basis.d, repr(float(a)), repr(float(b)), repr(float(c))])


def dump_roots_csv(reports: list[RootReport], path) -> None:
    """Write root reports, one row per root: (j, d, k, root, residual)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "d", "k", "root", "residual"])
        for report in reports:
            for k, (root, res) in enumerate(zip(report.roots, report.residuals)):
                writer.writerow([report.j, report.d, k, repr(float(root)), repr(float(res))])
