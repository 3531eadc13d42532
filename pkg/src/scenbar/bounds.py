"""Closed-form counts and constants used to size a verification run.

All of these are pure arithmetic: the scenario count from a binomial tail
condition, the per-sample realization count from a Chebyshev argument, a
moment-based bound on the certificate's one-step variance, and Lipschitz
constants for quadratic certificates over norm-bounded dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import InputError


@dataclass(frozen=True)
class SampleComplexityInputs:
    """Inputs of the minimal scenario count.

    ``epsilon_bar`` is the normalized margin (epsilon / lipschitz_bound)**n;
    ``q_dim`` is the binomial summation limit, two more than the number of
    certificate coefficients.
    """

    epsilon_bar: float
    beta: float
    q_dim: int

    def __post_init__(self):
        if not 0.0 < self.epsilon_bar <= 1.0:
            raise InputError("epsilon_bar must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise InputError("beta must lie in [0, 1]")
        if self.q_dim < 0:
            raise InputError("q_dim must be >= 0")


def log_binomial_tail(n: int, limit: int, epsilon_bar: float) -> float:
    """log of sum_{i=0}^{limit} C(n,i) e^i (1-e)^(n-i), evaluated in log space."""
    if n <= limit:
        return 0.0
    if epsilon_bar == 1.0:
        return -math.inf
    i = np.arange(0, limit + 1)
    log_comb = gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
    terms = log_comb + i * math.log(epsilon_bar) + (n - i) * math.log1p(-epsilon_bar)
    return float(logsumexp(terms))


def binomial_tail(n: int, limit: int, epsilon_bar: float) -> float:
    return math.exp(log_binomial_tail(n, limit, epsilon_bar))


def minimal_scenario_count(inputs: SampleComplexityInputs) -> int:
    """Least N whose lower binomial tail at ``q_dim`` drops to ``beta``.

    The tail is 1 for N <= q_dim and strictly decreasing beyond, so the
    search brackets by doubling and then bisects; minimality is re-verified
    explicitly at N-1 rather than assumed from monotonicity.
    """
    eps, beta, limit = inputs.epsilon_bar, inputs.beta, inputs.q_dim
    if beta >= 1.0:
        return 1
    if beta <= 0.0:
        if eps < 1.0:
            raise InputError("beta = 0 is unattainable for epsilon_bar < 1")
        return limit + 1
    log_beta = math.log(beta)

    lo = limit + 1
    if log_binomial_tail(lo, limit, eps) <= log_beta:
        return lo
    hi = 2 * lo
    while log_binomial_tail(hi, limit, eps) > log_beta:
        lo = hi
        hi *= 2
        if hi > 1 << 62:
            raise InputError("scenario count search exceeded 2**62")
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if log_binomial_tail(mid, limit, eps) <= log_beta:
            hi = mid
        else:
            lo = mid
    n = hi
    if log_binomial_tail(n, limit, eps) > log_beta:
        raise InputError("tail condition not met at bracketing endpoint")
    if n > limit + 1 and log_binomial_tail(n - 1, limit, eps) <= log_beta:
        raise InputError("scenario count search returned a non-minimal N")
    return n


def empirical_count(m_hat: float, delta: float, beta_s: float) -> int:
    """ceil(m_hat / (delta^2 beta_s)), taken in exact rational arithmetic."""
    if m_hat <= 0.0 or delta <= 0.0 or not 0.0 < beta_s <= 1.0:
        raise InputError("empirical_count needs m_hat > 0, delta > 0, beta_s in (0, 1]")
    ratio = Fraction(m_hat) / (Fraction(delta) ** 2 * Fraction(beta_s))
    return int(math.ceil(ratio))


def variance_bound_additive_1d(
    barrier_coeff_bounds, fa_bound: float, noise_moments
) -> float:
    """Upper bound on Var(B(f(x, w))) for scalar additive-noise dynamics.

    Expanding B(f_a(x) + w) in powers of w gives weight functions
    g_j(x) = sum_{p >= j} b_p C(p, j) f_a(x)^(p-j); the variance is
    sum_{j,z >= 1} g_j g_z (E[w^(j+z)] - E[w^j] E[w^z]). Each |g_j| is bounded
    through the triangle inequality with |b_p| <= barrier_coeff_bounds[p] and
    |f_a(x)| <= fa_bound, and the moment differences are taken in absolute
    value.

    ``barrier_coeff_bounds[p]`` bounds the coefficient of x**p (so its length
    is degree + 1); ``noise_moments[j - 1]`` must hold the raw moment E[w**j]
    for j = 1 .. 2 * degree.
    """
    b = [float(v) for v in barrier_coeff_bounds]
    if not b:
        raise InputError("barrier_coeff_bounds must be nonempty")
    if any(v < 0 for v in b):
        raise InputError("coefficient bounds must be nonnegative")
    if fa_bound < 0:
        raise InputError("fa_bound must be nonnegative")
    k = len(b) - 1
    moments = [float(v) for v in noise_moments]
    if len(moments) < 2 * k:
        raise InputError(f"need raw moments up to order {2 * k}, got {len(moments)}")

    def moment(j: int) -> float:
        return moments[j - 1]

    g_hat = [
        sum(b[p] * math.comb(p, j) * fa_bound ** (p - j) for p in range(j, k + 1))
        for j in range(1, k + 1)
    ]
    total = 0.0
    for j in range(1, k + 1):
        for z in range(1, k + 1):
            cov = moment(j + z) - moment(j) * moment(z)
            total += g_hat[j - 1] * g_hat[z - 1] * abs(cov)
    return total


def lipschitz_quadratic(m: float, lambda_max_p: float, l: float, l_hat: float) -> float:
    """2 m lambda_max (L L_hat + 1): quadratic certificate over ||f_a(x)|| <= L ||x||."""
    return 2.0 * m * lambda_max_p * (l * l_hat + 1.0)


def lipschitz_linear(m: float, lambda_max_p: float, frobenius_bound: float) -> float:
    """2 m lambda_max (F^2 + 1): linear dynamics with Frobenius norm at most F."""
    return 2.0 * m * lambda_max_p * (frobenius_bound ** 2 + 1.0)


def gaussian_raw_moments(sigma: float, max_order: int) -> list[float]:
    """Raw moments E[w^j], j = 1..max_order, of a centered normal with std sigma."""
    out = []
    for j in range(1, max_order + 1):
        if j % 2 == 1:
            out.append(0.0)
        else:
            out.append(sigma ** j * math.prod(range(j - 1, 0, -2)))
    return out
