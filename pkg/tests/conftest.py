"""Shared brute-force oracles.

These deliberately avoid the library's own solution paths: thresholding
outputs are checked against adaptive grid minimization of the defining
objective, and envelope proxes against nested grids.  Each refinement stage
shrinks the search window around the incumbent by two coarse steps, and 0 is
always kept as an explicit candidate because the penalty kinks there.
"""

import numpy as np


def scalar_prox_objective(z, u, q, nu, mu):
    return (z - u) ** 2 / (2.0 * mu) + nu * np.abs(z) ** q


def prox_grid_oracle(u, q, nu, mu, stages=3, points=4001):
    """(argmin, min value) of the scalar prox objective by refined grids over
    [-2|u|, 2|u|]."""
    if u == 0.0:
        return 0.0, 0.0
    lo, hi = -2.0 * abs(u), 2.0 * abs(u)
    best = 0.0
    for _ in range(stages):
        grid = np.linspace(lo, hi, points)
        vals = scalar_prox_objective(grid, u, q, nu, mu)
        i = int(np.argmin(vals))
        best = grid[i]
        step = (hi - lo) / (points - 1)
        lo, hi = best - 2 * step, best + 2 * step
    candidates = np.array([best, 0.0])
    vals = scalar_prox_objective(candidates, u, q, nu, mu)
    j = int(np.argmin(vals))
    return float(candidates[j]), float(vals[j])


def envelope_values(z, t, q, nu, stages=3, points=201):
    """M(z) = min_w nu*|w|^q + (z-w)^2/(2t), elementwise over the array z,
    by per-point refined inner grids."""
    z = np.asarray(z, dtype=float)
    span = np.maximum(2.0 * np.abs(z), 1.0)
    lo, hi = -span, span

    def inner_vals(w):
        return nu * np.abs(w) ** q + (z[:, None] - w) ** 2 / (2.0 * t)

    best = np.zeros_like(z)
    for _ in range(stages):
        frac = np.linspace(0.0, 1.0, points)
        w = lo[:, None] + (hi - lo)[:, None] * frac
        vals = inner_vals(w)
        i = np.argmin(vals, axis=1)
        best = np.take_along_axis(w, i[:, None], axis=1)[:, 0]
        step = (hi - lo) / (points - 1)
        lo, hi = best - 2 * step, best + 2 * step
    with_zero = np.minimum(
        nu * np.abs(best) ** q + (z - best) ** 2 / (2.0 * t),
        z ** 2 / (2.0 * t),
    )
    return with_zero


def prox_envelope_oracle(x, t, q, nu, mu, lam, stages=3, points=2001):
    """argmin_z (z-x)^2/(2mu) + lam*M(z) with M evaluated by inner grids."""
    span = 2.0 * abs(x) + 1.0
    lo, hi = -span, span
    best = 0.0
    for _ in range(stages):
        grid = np.linspace(lo, hi, points)
        vals = (grid - x) ** 2 / (2.0 * mu) + lam * envelope_values(grid, t, q, nu)
        i = int(np.argmin(vals))
        best = grid[i]
        step = (hi - lo) / (points - 1)
        lo, hi = best - 2 * step, best + 2 * step
    cands = np.array([best, 0.0])
    vals = (cands - x) ** 2 / (2.0 * mu) + lam * envelope_values(cands, t, q, nu)
    return float(cands[int(np.argmin(vals))])
