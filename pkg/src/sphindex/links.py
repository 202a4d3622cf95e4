"""Scalar link functions with derivatives.

A link is the known nonlinearity applied to the one-dimensional projection of
the input.  Links carry a vectorized evaluator and first derivative (second
and third derivatives optional, used by perturbation diagnostics); they are
built from Hermite coefficient vectors, pure Gegenbauer harmonics rescaled to
the sphere radius, monotone built-ins, or custom closures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sphindex.orthopoly import harmonic_dimension


def _poly_eval(coeffs: np.ndarray):
    """Horner evaluator for ascending monomial coefficients."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        c = np.zeros(1)

    def ev(t):
        tt = np.asarray(t, dtype=float)
        out = np.full_like(tt, c[-1], dtype=float)
        for k in range(c.size - 2, -1, -1):
            out = out * tt + c[k]
        return float(out) if np.isscalar(t) else out

    return ev


def _hermite_to_monomial(coeffs: np.ndarray) -> np.ndarray:
    """Monomial coefficients of sum_j coeffs[j] h_j (orthonormal probabilists')."""
    if coeffs.size == 0:
        return np.zeros(1)
    he = np.polynomial.hermite_e.herme2poly(coeffs / np.sqrt(
        np.array([math.factorial(k) for k in range(coeffs.size)], dtype=float)
    ))
    return np.asarray(he, dtype=float)


def _gegenbauer_to_monomial(degree: int, d: int) -> np.ndarray:
    """Monomial coefficients of P_{degree,d} via the P(1)=1 recurrence."""
    prev = np.zeros(degree + 1)
    prev[0] = 1.0
    if degree == 0:
        return prev
    cur = np.zeros(degree + 1)
    cur[1] = 1.0
    for j in range(1, degree):
        nxt = ((2.0 * j + d - 2.0) * np.roll(cur, 1) - j * prev) / (j + d - 2.0)
        nxt[0] = -j * prev[0] / (j + d - 2.0)
        prev, cur = cur, nxt
    return cur


@dataclass(frozen=True)
class LinkFunction:
    """Scalar link with derivative(s); evaluators accept scalars or arrays."""

    f: Callable
    df: Callable
    d2f: Callable | None = None
    d3f: Callable | None = None
    descriptor: str = "custom"

    def __call__(self, t):
        return self.f(t)

    def deriv(self, t):
        return self.df(t)

    def __repr__(self) -> str:
        return f"LinkFunction({self.descriptor})"

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_hermite(cls, coeffs) -> "LinkFunction":
        """phi = sum_j c_j h_j in the orthonormal probabilists' Hermite basis.

        Derivatives use h_j' = sqrt(j) h_{j-1}, so they are exact; evaluation
        compiles to monomial coefficients once (degrees are small) and runs
        through Horner's rule.
        """
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d array")

        def shift(vec):  # coefficients of the derivative in the same basis
            return (vec * np.sqrt(np.arange(vec.size)))[1:]

        c1 = shift(c)
        c2 = shift(c1) if c1.size else np.zeros(0)
        c3 = shift(c2) if c2.size else np.zeros(0)
        label = "hermite[" + ",".join(f"{v:g}" for v in c) + "]"
        return cls(
            f=_poly_eval(_hermite_to_monomial(c)),
            df=_poly_eval(_hermite_to_monomial(c1)),
            d2f=_poly_eval(_hermite_to_monomial(c2)),
            d3f=_poly_eval(_hermite_to_monomial(c3)),
            descriptor=label,
        )

    @classmethod
    def gegenbauer_pure(
        cls, degree: int, d: int, radius: float | None = None, normalize: bool = True
    ) -> "LinkFunction":
        """phi(t) = P_{s,d}(t / radius), optionally scaled by sqrt(N(s, d)).

        On inputs uniform over the radius-r sphere of R^d the rescaled harmonic
        is a pure degree-s component; the sqrt(N) scaling gives it unit second
        moment there, which keeps the loss landscape dimension-free.
        """
        r = math.sqrt(d) if radius is None else float(radius)
        scale = math.sqrt(harmonic_dimension(degree, d)) if normalize else 1.0
        mono = scale * _gegenbauer_to_monomial(degree, d)
        rescale = mono / r ** np.arange(degree + 1)
        label = f"gegenbauer[s={degree},d={d},r={r:g},unit={normalize}]"
        return cls(
            f=_poly_eval(rescale),
            df=_poly_eval(np.polynomial.polynomial.polyder(rescale)),
            descriptor=label,
        )

    @classmethod
    def identity(cls) -> "LinkFunction":
        return cls(
            f=lambda t: np.asarray(t, dtype=float) + 0.0,
            df=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            d2f=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            d3f=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            descriptor="identity",
        )

    @classmethod
    def monotone_sine(cls, wiggle: float = 0.1) -> "LinkFunction":
        """phi(t) = t + wiggle * sin(t); strictly increasing for wiggle < 1."""
        return cls(
            f=lambda t: np.asarray(t, dtype=float) + wiggle * np.sin(t),
            df=lambda t: 1.0 + wiggle * np.cos(t),
            d2f=lambda t: -wiggle * np.sin(t),
            d3f=lambda t: -wiggle * np.cos(t),
            descriptor=f"monotone_sine[{wiggle:g}]",
        )

    @classmethod
    def custom(cls, f, df, d2f=None, d3f=None, descriptor: str = "custom") -> "LinkFunction":
        return cls(f=f, df=df, d2f=d2f, d3f=d3f, descriptor=descriptor)

    # -- diagnostics ---------------------------------------------------------

    def sobolev_check(self, dist, n_nodes: int = 256) -> tuple[float, float]:
        """(E[phi^4], E[(phi')^4]) under the scalar marginal of dist.

        Both must be finite for the dynamics' moment assumptions; computed by
        quadrature for sphere-supported laws and by scalar-law quadrature or a
        Gauss-Hermite rule otherwise.
        """
        from sphindex.landscape import marginal_quadrature

        points, weights = marginal_quadrature(dist, n_nodes)
        e4 = float(weights @ np.asarray(self.f(points), dtype=float) ** 4)
        ed4 = float(weights @ np.asarray(self.df(points), dtype=float) ** 4)
        return e4, ed4

    def finite_difference_gap(self, t, h: float = 1e-5) -> float:
        """Max relative gap between df and a central difference of f at t."""
        tt = np.asarray(t, dtype=float)
        fd = (np.asarray(self.f(tt + h)) - np.asarray(self.f(tt - h))) / (2 * h)
        exact = np.asarray(self.df(tt), dtype=float)
        scale = np.maximum(np.abs(exact), 1.0)
        return float(np.max(np.abs(fd - exact) / scale))


def hermite_half_combination() -> LinkFunction:
    """The non-monotone information-exponent-2 benchmark (h2 - h3 - h4 + h5)/2."""
    return LinkFunction.from_hermite([0.0, 0.0, 0.5, -0.5, -0.5, 0.5])
