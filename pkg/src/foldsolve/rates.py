"""Theoretical per-iteration contraction constants for the two single-penalty
reductions, the admissible penalty-weight ranges they imply, restricted
isometry estimation, and empirical rate fitting from iterate traces.

Once support and signs have stabilized at a stationary point with support I
and smallest nonzero magnitude d_min, the augmented iteration contracts with

    rho = (1 - mu * (1 + ||A||^2/beta)^(-1) * floor)
          / (1 - mu * alpha * (1-q) * (d_min/2)^(q-2)),

where ``floor`` is lambda_min(A_I^T A_I) (exact form) or (1 - delta_s)^2
(isometry form).  The infimal-convolution iteration contracts with

    rho = sqrt( ||P_I - mu*A_I^T A||^2 / den^2
                + ||P_Ic - mu*A_Ic^T A||^2 / (1 + mu*beta)^2 ),

with the same curvature denominator ``den`` on the support block.  Both
bounds are meaningful only when den > 0 and rho < 1, which is what the
``admissible`` flag reports.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .validation import as_matrix, check_exponent, check_positive, check_support

__all__ = [
    "RateBound",
    "AlphaRange",
    "RipEstimate",
    "UndefinedRateError",
    "rate_augmented",
    "alpha_star_augmented",
    "rate_infconv",
    "alpha_star_infconv",
    "rip_bruteforce",
    "rip_gaussian_order",
    "empirical_rate",
]

RIP_ENUMERATION_GUARD = 1_000_000


class UndefinedRateError(ValueError):
    """Raised when a trace has too short a usable tail to fit a rate."""


@dataclass(frozen=True)
class RateBound:
    constant: float
    admissible: bool
    components: dict


@dataclass(frozen=True)
class AlphaRange:
    """Open admissible interval (0, alpha_star) for linear convergence."""
    alpha_star: float


@dataclass(frozen=True)
class RipEstimate:
    s: int
    delta: float
    method: str  # "brute-force" (exact for the matrix) or "gaussian-order"


def _curvature_denominator(mu, alpha, q, d_min):
    if q == 1.0:
        return 1.0
    return 1.0 - mu * alpha * (1.0 - q) * (d_min / 2.0) ** (q - 2.0)


def rate_augmented(spec_norm_a, beta, mu, alpha, q, d_min, *, delta=None,
                   lambda_min=None) -> RateBound:
    """Contraction constant of the augmented iteration near its limit.

    Exactly one of ``delta`` (isometry form, floor = (1-delta)^2) or
    ``lambda_min`` (exact form, floor = lambda_min(A_I^T A_I)) must be given.
    """
    if (delta is None) == (lambda_min is None):
        raise ValueError("give exactly one of delta or lambda_min")
    beta = check_positive(beta, "beta")
    mu = check_positive(mu, "mu")
    q = check_exponent(q)
    d_min = check_positive(d_min, "d_min")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    floor = (1.0 - delta) ** 2 if delta is not None else float(lambda_min)
    damping = 1.0 / (1.0 + spec_norm_a ** 2 / beta)
    numerator = 1.0 - mu * damping * floor
    denominator = _curvature_denominator(mu, alpha, q, d_min)
    mu_ok = mu < spec_norm_a ** -2 + 1.0 / beta if spec_norm_a > 0 else True
    components = {
        "numerator": numerator,
        "denominator": denominator,
        "floor": floor,
        "damping": damping,
        "mu_admissible": mu_ok,
    }
    if denominator <= 0.0:
        components["diagnostic"] = (
            "curvature term mu*alpha*(1-q)*(d_min/2)^(q-2) >= 1; "
            "alpha exceeds the admissible range")
        return RateBound(constant=math.inf, admissible=False, components=components)
    constant = max(numerator, 0.0) / denominator
    return RateBound(constant=constant,
                     admissible=bool(mu_ok and constant < 1.0),
                     components=components)


def alpha_star_augmented(spec_norm_a, beta, q, d_min, *, delta=None,
                         lambda_min=None) -> AlphaRange:
    """Largest penalty weight with a positive curvature denominator, i.e. with
    a meaningful augmented rate; infinite at q = 1."""
    if (delta is None) == (lambda_min is None):
        raise ValueError("give exactly one of delta or lambda_min")
    beta = check_positive(beta, "beta")
    q = check_exponent(q)
    d_min = check_positive(d_min, "d_min")
    if q == 1.0:
        return AlphaRange(alpha_star=math.inf)
    floor = (1.0 - delta) ** 2 if delta is not None else float(lambda_min)
    damping = 1.0 / (1.0 + spec_norm_a ** 2 / beta)
    star = damping * floor / (1.0 - q) * (d_min / 2.0) ** (2.0 - q)
    return AlphaRange(alpha_star=star)


def rate_infconv(a_matrix, support, mu, alpha, beta, q, d_min) -> RateBound:
    """Contraction constant of the infimal-convolution iteration near its
    limit, assembled from the two projected operator norms."""
    a = as_matrix(a_matrix)
    n = a.shape[1]
    idx = check_support(support, n)
    if idx.size >= n:
        raise ValueError("support must be a proper subset of the columns")
    mu = check_positive(mu, "mu")
    beta = check_positive(beta, "beta")
    q = check_exponent(q)
    d_min = check_positive(d_min, "d_min")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    g_mat = -mu * (a.T @ a)
    g_mat[np.diag_indices_from(g_mat)] += 1.0
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    on_norm = float(scipy.linalg.svdvals(g_mat[mask])[0])
    off_norm = float(scipy.linalg.svdvals(g_mat[~mask])[0])
    denominator = _curvature_denominator(mu, alpha, q, d_min)
    off_term = off_norm / (1.0 + mu * beta)
    smax = float(scipy.linalg.svdvals(a)[0])
    components = {
        "on_support_norm": on_norm,
        "off_support_norm": off_norm,
        "denominator": denominator,
        "off_term": off_term,
        "mu_admissible": mu < smax ** -2 if smax > 0 else True,
    }
    if denominator <= 0.0:
        components["diagnostic"] = (
            "curvature term mu*alpha*(1-q)*(d_min/2)^(q-2) >= 1; "
            "alpha exceeds the admissible range")
        return RateBound(constant=math.inf, admissible=False, components=components)
    constant = math.sqrt((on_norm / denominator) ** 2 + off_term ** 2)
    return RateBound(constant=constant,
                     admissible=bool(components["mu_admissible"] and constant < 1.0),
                     components=components)


def alpha_star_infconv(a_matrix, support, mu, q, d_min) -> AlphaRange:
    """Penalty-weight bound under which the support block of the
    infimal-convolution rate stays contractive; infinite at q = 1."""
    a = as_matrix(a_matrix)
    idx = check_support(support, a.shape[1])
    mu = check_positive(mu, "mu")
    q = check_exponent(q)
    d_min = check_positive(d_min, "d_min")
    if q == 1.0:
        return AlphaRange(alpha_star=math.inf)
    g_mat = -mu * (a.T @ a)
    g_mat[np.diag_indices_from(g_mat)] += 1.0
    on_norm = float(scipy.linalg.svdvals(g_mat[idx])[0])
    star = (1.0 - on_norm) / (mu * (1.0 - q)) * (d_min / 2.0) ** (2.0 - q)
    return AlphaRange(alpha_star=star)


def rip_bruteforce(a_matrix, s) -> RipEstimate:
    """Exact restricted-isometry constant of order s by enumerating every
    s-column submatrix:  delta_s = max_I max(sigma_max(A_I) - 1,
    1 - sigma_min(A_I)), floored at 0.

    The isometry inequalities compare norms, not squared norms, so the
    deviation is measured on singular values directly.  A value >= 1 means
    the matrix fails the isometry property at this order.  Guarded to at
    most 10^6 supports.
    """
    a = as_matrix(a_matrix)
    n = a.shape[1]
    s = int(s)
    if not 1 <= s <= n:
        raise ValueError(f"order s must lie in [1, {n}]")
    count = math.comb(n, s)
    if count > RIP_ENUMERATION_GUARD:
        raise ValueError(
            f"enumeration of C({n},{s}) = {count} supports exceeds the "
            f"guard of {RIP_ENUMERATION_GUARD}")
    delta = 0.0
    for idx in combinations(range(n), s):
        svals = scipy.linalg.svdvals(a[:, idx])
        smin = svals[-1] if a.shape[0] >= s else 0.0
        delta = max(delta, float(svals[0]) - 1.0, 1.0 - float(smin))
    return RipEstimate(s=s, delta=max(delta, 0.0), method="brute-force")


def rip_gaussian_order(m, n, s, constant=1.0) -> RipEstimate:
    """Asymptotic order of the isometry constant for a matrix with iid
    zero-mean variance-1/m entries:  constant * sqrt(s*log(e*n/s) / m).

    An order-of-magnitude estimate (flagged as such), not a certificate; the
    absolute constant is problem-dependent and defaults to 1.
    """
    m, n, s = int(m), int(n), int(s)
    if min(m, n, s) < 1 or s > n:
        raise ValueError("need m, n, s >= 1 and s <= n")
    value = constant * math.sqrt(s * math.log(math.e * n / s) / m)
    return RipEstimate(s=s, delta=value, method="gaussian-order")


def empirical_rate(trace, tail_fraction=0.3):
    """Per-iteration contraction ratio fitted to the tail of an error trace.

    Restricts to iterations after the support/sign pattern has stabilized
    (the regime the theoretical constants cover), drops errors at the
    1e-13 noise floor, least-squares fits log(error) against the iteration
    index over the trailing ``tail_fraction``, and exponentiates the slope.

    Raises :class:`UndefinedRateError` when fewer than 10 usable tail points
    remain.
    """
    if not getattr(trace, "has_reference", False):
        raise UndefinedRateError("trace has no reference errors")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    errors = np.asarray(trace.errors, dtype=float)
    start = trace.stabilization_index()
    idx = np.flatnonzero(errors > 1e-13)
    idx = idx[idx >= start]
    if idx.size:
        take = max(int(math.ceil(tail_fraction * idx.size)), 10)
        idx = idx[-take:]
    if idx.size < 10:
        raise UndefinedRateError(
            f"only {idx.size} usable tail points (need >= 10)")
    slope = np.polyfit(idx.astype(float), np.log(errors[idx]), 1)[0]
    return float(np.exp(slope))
