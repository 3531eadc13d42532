"""Shared domain types: boxes, monomial bases, certificates, problems, verdicts.

Everything here is immutable after construction and safe to share across
workers; the evaluation helpers are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Sequence

import numpy as np

LAMBDA_MARGIN = 1e-6  # lam > 1 is encoded as lam >= 1 + LAMBDA_MARGIN in the LP


class InputError(ValueError):
    """Rejected input: wrong dimension, non-finite value, or out-of-range parameter."""


def _as_vector(x, dim: int, what: str = "state") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (dim,):
        raise InputError(f"{what} has dimension {v.shape}, expected ({dim},)")
    return v


@dataclass(frozen=True)
class Region:
    """Axis-aligned closed box. Membership on the boundary counts as inside."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise InputError("lower and upper must have the same dimension")
        if any(l > u for l, u in zip(lo, hi)):
            raise InputError("every lower bound must be <= its upper bound")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x) -> bool:
        v = _as_vector(x, self.dimension)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def contains_all(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (m, n) array of points."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs[:, None]
        if xs.shape[1] != self.dimension:
            raise InputError(f"points have dimension {xs.shape[1]}, expected {self.dimension}")
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((xs >= lo) & (xs <= hi), axis=1)

    def encloses(self, other: "Region") -> bool:
        return all(a <= b for a, b in zip(self.lower, other.lower)) and all(
            a >= b for a, b in zip(self.upper, other.upper)
        )

    def disjoint(self, other: "Region") -> bool:
        return any(
            ol > u or oh < l
            for l, u, ol, oh in zip(self.lower, self.upper, other.lower, other.upper)
        )


def region_contains(region: Region, x) -> bool:
    return region.contains(x)


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of total degree <= ``degree`` in ``dimension`` variables.

    Tuples are ordered by total degree descending, then lexicographically
    descending, so for one variable of degree 2 the basis reads (x^2, x, 1).
    The order is part of the on-disk and LP-column contract.
    """

    dimension: int
    degree: int
    exponents: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        if self.dimension < 1 or self.degree < 0:
            raise InputError("basis needs dimension >= 1 and degree >= 0")
        tuples = [
            t
            for t in product(range(self.degree + 1), repeat=self.dimension)
            if sum(t) <= self.degree
        ]
        tuples.sort(key=lambda t: (-sum(t), tuple(-e for e in t)))
        object.__setattr__(self, "exponents", tuple(tuples))

    def __len__(self) -> int:
        return len(self.exponents)

    @property
    def count(self) -> int:
        """Number of basis monomials, binomial(n + k, k)."""
        return len(self.exponents)

    def features(self, x) -> np.ndarray:
        """Monomial values at one point, in basis order."""
        v = _as_vector(x, self.dimension)
        out = np.empty(len(self.exponents))
        for idx, exps in enumerate(self.exponents):
            out[idx] = math.prod(v[j] ** e for j, e in enumerate(exps))
        return out

    def features_matrix(self, xs: np.ndarray) -> np.ndarray:
        """(m, Q) feature matrix for an (m, n) array of points."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs[:, None]
        if xs.shape[1] != self.dimension:
            raise InputError(f"points have dimension {xs.shape[1]}, expected {self.dimension}")
        cols = []
        for exps in self.exponents:
            col = np.ones(xs.shape[0])
            for j, e in enumerate(exps):
                if e:
                    col = col * xs[:, j] ** e
            cols.append(col)
        return np.stack(cols, axis=1)


def monomial_features(basis: MonomialBasis, x) -> np.ndarray:
    return basis.features(x)


@dataclass(frozen=True)
class BarrierCertificate:
    """Polynomial certificate B(x) = <features(x), coefficients>.

    ``lam`` is the level the certificate must clear on the unsafe set, ``c``
    the allowed expected one-step growth, ``kappa`` the slack the optimizer
    achieved (negative means strictly feasible).
    """

    basis: MonomialBasis
    coefficients: tuple[float, ...]
    lam: float
    c: float
    kappa: float

    def __post_init__(self):
        coeffs = tuple(float(v) for v in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != self.basis.count:
            raise InputError(
                f"{len(coeffs)} coefficients for a basis of {self.basis.count} monomials"
            )
        if not self.lam > 1.0:
            raise InputError("lam must be > 1")
        if self.c < 0.0:
            raise InputError("c must be >= 0")

    def coefficient_vector(self) -> np.ndarray:
        return np.asarray(self.coefficients)

    def evaluate(self, x) -> float:
        return float(self.basis.features(x) @ self.coefficient_vector())

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        return self.basis.features_matrix(xs) @ self.coefficient_vector()


def evaluate_barrier(cert: BarrierCertificate, x) -> float:
    return cert.evaluate(x)


@dataclass(frozen=True)
class VerificationProblem:
    """A safety query plus every constant the sample-size bounds need.

    ``rho`` is the acceptable unsafety probability (the claim is P >= 1-rho),
    ``beta``/``beta_s`` the two confidence budgets, ``delta`` the empirical
    expectation margin, ``epsilon`` the robustness margin (must not exceed
    ``lipschitz_bound``), ``variance_bound`` the certified bound on
    Var(B(f(x,w))), and ``mu`` the (small, negative) slack constant in the
    probability-consistency constraint. ``p_max``, when set, caps the largest
    eigenvalue of the quadratic-form view of the certificate; ``b_max`` is a
    plain coefficient box used only when ``p_max`` is unset.
    """

    state_region: Region
    initial_region: Region
    unsafe_region: Region
    horizon: int
    rho: float
    beta: float
    beta_s: float
    delta: float
    epsilon: float
    lipschitz_bound: float
    variance_bound: float
    mu: float = -1e-3
    p_max: float | None = None
    b_max: float | None = 1e3

    def __post_init__(self):
        n = self.state_region.dimension
        if self.initial_region.dimension != n or self.unsafe_region.dimension != n:
            raise InputError("all regions must share the state dimension")
        if not self.state_region.encloses(self.initial_region):
            raise InputError("initial region must lie inside the state region")
        if not self.state_region.encloses(self.unsafe_region):
            raise InputError("unsafe region must lie inside the state region")
        if not self.initial_region.disjoint(self.unsafe_region):
            raise InputError("initial and unsafe regions must be disjoint")
        if self.horizon < 0:
            raise InputError("horizon must be a nonnegative integer")
        if not 0.0 < self.rho <= 1.0:
            raise InputError("rho must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise InputError("beta must lie in [0, 1]")
        if not 0.0 < self.beta_s <= 1.0:
            raise InputError("beta_s must lie in (0, 1]")
        if self.delta <= 0.0:
            raise InputError("delta must be > 0")
        if self.mu >= 0.0:
            raise InputError("mu must be < 0")
        if not 0.0 <= self.epsilon <= 1.0 or self.epsilon > self.lipschitz_bound:
            raise InputError("epsilon must lie in [0, 1] and not exceed lipschitz_bound")
        if self.lipschitz_bound <= 0.0:
            raise InputError("lipschitz_bound must be > 0")
        if self.variance_bound <= 0.0:
            raise InputError("variance_bound must be > 0")

    @property
    def dimension(self) -> int:
        return self.state_region.dimension

    @property
    def epsilon_bar(self) -> float:
        return (self.epsilon / self.lipschitz_bound) ** self.dimension


class VerdictStatus(str, Enum):
    CERTIFIED = "Certified"
    INCONCLUSIVE = "Inconclusive"


def decision_rule(kappa_star: float, epsilon: float) -> VerdictStatus:
    """The bare optimum-plus-margin test: certified iff kappa* + epsilon <= 0."""
    return (
        VerdictStatus.CERTIFIED
        if kappa_star + epsilon <= 0.0
        else VerdictStatus.INCONCLUSIVE
    )


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    probability_lower_bound: float
    confidence: float
    kappa_star: float
    epsilon: float

    @property
    def decision_margin(self) -> float:
        """kappa* + epsilon; certification requires this to be <= 0."""
        return self.kappa_star + self.epsilon
