"""Proximal (thresholding) operators for lq penalties, 0 < q <= 1, and for
their quadratic infimal convolution.

All operators here evaluate, componentwise,

    prox_{mu, nu*|.|^q}(u) = argmin_z  (1/(2*mu)) * (z - u)^2 + nu * |z|^q .

For q = 1 this is plain soft thresholding with level mu*nu.  For q < 1 the
operator is a jump-discontinuous interpolant between soft and hard
thresholding: it returns 0 for |u| <= tau and otherwise the largest root of

    z + nu*mu*q * z^(q-1) = |u|,    z in [lam, |u|],

carried back with the sign of u.  The jump threshold tau and the smallest
nonzero output magnitude lam (the operator's range is
(-inf, -lam] u {0} u [lam, inf)) are

    tau = (2-q)/(2-2q) * (2*nu*mu*(1-q))^(1/(2-q)),
    lam = (2*mu*nu*(1-q))^(1/(2-q)).

At |u| == tau exactly both 0 and lam minimize; we return 0 so the map stays
single-valued.

The root is found by a safeguarded Newton iteration, which is the source of
truth for every q; the q = 1/2 closed form is provided separately as an
optional cross-check.
"""

from typing import NamedTuple

import numpy as np

from .validation import check_exponent, check_positive

__all__ = [
    "ThresholdProfile",
    "threshold_profile",
    "prox_lq",
    "prox_lq_scalar",
    "prox_half_closed",
    "prox_moreau",
    "prox_infconv_g",
    "infconv_value_and_argmin",
    "lq_power_sum",
]

_NEWTON_RTOL = 1e-13
_NEWTON_MAXIT = 200


class ThresholdProfile(NamedTuple):
    tau: float   # jump threshold: output is 0 for |u| <= tau
    lam: float   # smallest nonzero output magnitude


def threshold_profile(q, nu, mu) -> ThresholdProfile:
    """Jump threshold and range gap of prox_{mu, nu*|.|^q}.

    For q = 1 the operator is continuous and both quantities collapse to the
    soft-threshold kink mu*nu.
    """
    q = check_exponent(q)
    nu = check_positive(nu, "nu")
    mu = check_positive(mu, "mu")
    if q == 1.0:
        t = mu * nu
        return ThresholdProfile(tau=t, lam=t)
    lam = (2.0 * mu * nu * (1.0 - q)) ** (1.0 / (2.0 - q))
    tau = (2.0 - q) / (2.0 - 2.0 * q) * lam
    return ThresholdProfile(tau=tau, lam=lam)


def _branch_root(a, q, c, lam):
    """Largest root of f(z) = z + c*z^(q-1) - a on [lam, a], elementwise.

    f is strictly increasing and convex there with f(lam) <= 0 <= f(a), so
    Newton started at z = a descends monotonically onto the root; a bisection
    bracket guards against any numerical slip.
    """
    z = a.copy()
    lo = np.full_like(a, lam)
    hi = a.copy()
    for _ in range(_NEWTON_MAXIT):
        f = z + c * z ** (q - 1.0) - a
        lo = np.where(f < 0.0, z, lo)
        hi = np.where(f > 0.0, z, hi)
        fp = 1.0 + c * (q - 1.0) * z ** (q - 2.0)
        z_new = z - f / fp
        bad = ~np.isfinite(z_new) | (z_new < lo) | (z_new > hi)
        z_new = np.where(bad, 0.5 * (lo + hi), z_new)
        done = np.abs(z_new - z) <= _NEWTON_RTOL * np.maximum(1.0, np.abs(z_new))
        z = z_new
        if done.all():
            return z
    worst = float(np.max(np.abs(z + c * z ** (q - 1.0) - a)))
    raise RuntimeError(
        f"prox root-finder failed to converge (q={q}, c={c}, residual {worst:.3e}); "
        "this indicates a bug in the bracket setup"
    )


def prox_lq(u, q, nu, mu):
    """Componentwise prox of nu*|.|^q with step mu (see module docstring)."""
    q = check_exponent(q)
    nu = check_positive(nu, "nu")
    mu = check_positive(mu, "mu")
    u = np.asarray(u, dtype=float)
    if q == 1.0:
        return np.sign(u) * np.maximum(np.abs(u) - mu * nu, 0.0)
    tau, lam = threshold_profile(q, nu, mu)
    a = np.abs(u)
    out = np.zeros_like(a)
    active = a > tau
    if np.any(active):
        roots = _branch_root(a[active], q, nu * mu * q, lam)
        out[active] = np.sign(u[active]) * roots
    return out


def prox_lq_scalar(u, q, nu, mu) -> float:
    """Scalar convenience wrapper around :func:`prox_lq`."""
    return float(prox_lq(np.asarray([u], dtype=float), q, nu, mu)[0])


def prox_half_closed(u, nu, mu):
    """Closed form of prox_{mu, nu*|.|^(1/2)} (half thresholding).

    With a = mu*nu the nonzero branch, valid for |u| > 1.5 * a^(2/3), is

        (2/3) * u * (1 + cos((2/3) * arccos(-(3*sqrt(3)/4) * a * |u|^(-3/2)))).

    Optional acceleration only; :func:`prox_lq` is the reference path and the
    two are required to agree to 1e-10.
    """
    nu = check_positive(nu, "nu")
    mu = check_positive(mu, "mu")
    a = mu * nu
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    active = np.abs(u) > 1.5 * a ** (2.0 / 3.0)
    if np.any(active):
        ua = u[active]
        phi = np.arccos(-(3.0 ** 1.5 / 4.0) * a * np.abs(ua) ** -1.5)
        out[active] = (2.0 / 3.0) * ua * (1.0 + np.cos((2.0 / 3.0) * phi))
    return out


def prox_moreau(x, t, q, nu, mu, lam):
    """Prox of the scaled quadratic envelope of the lq penalty.

    Let f(z) = nu * sum |z_i|^q and let M_{t,f} denote its envelope
    inf_z f(z) + (1/(2t)) ||. - z||^2.  Because f is lower semicontinuous
    with f(0) = min f, the prox of lam * M_{t,f} with step mu reduces to a
    convex combination with the prox of f itself at the enlarged step t+mu*lam:

        prox_{mu, lam*M}(x) = t/(t+mu*lam) * x
                              + (mu*lam)/(t+mu*lam) * prox_{t+mu*lam, f}(x).
    """
    t = check_positive(t, "t")
    mu = check_positive(mu, "mu")
    lam = check_positive(lam, "lam")
    x = np.asarray(x, dtype=float)
    s = t + mu * lam
    return (t / s) * x + (mu * lam / s) * prox_lq(x, q, nu, s)


def prox_infconv_g(w, alpha, beta, q, mu):
    """Prox with step mu of g = (alpha/q)*||.||_q^q convolved with (beta/2)*||.||^2.

    g is the envelope M_{t,f} with t = 1/beta and f = (alpha/q)*||.||_q^q, so
    this is :func:`prox_moreau` with lam = 1.
    """
    alpha = check_positive(alpha, "alpha")
    beta = check_positive(beta, "beta")
    return prox_moreau(w, 1.0 / beta, q, alpha / q, mu, 1.0)


def lq_power_sum(u, q):
    """sum_i |u_i|^q (the penalty raised to its own power, not a norm for q<1)."""
    return float(np.sum(np.abs(np.asarray(u, dtype=float)) ** q))


def infconv_value_and_argmin(w, alpha, beta, q):
    """Value of g(w) = inf_u (alpha/q)*||u||_q^q + (beta/2)*||w-u||^2 and the
    attaining u, which is the lq prox of w at step 1/beta."""
    alpha = check_positive(alpha, "alpha")
    beta = check_positive(beta, "beta")
    w = np.asarray(w, dtype=float)
    u = prox_lq(w, q, alpha / q, 1.0 / beta)
    value = (alpha / q) * lq_power_sum(u, q) + 0.5 * beta * float(np.sum((w - u) ** 2))
    return value, u
