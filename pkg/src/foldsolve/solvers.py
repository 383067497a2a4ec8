"""Solvers for the multi-penalty recovery problem

    min_{u,v}  0.5*||A(u+v) - y||^2 + (alpha/q)*||u||_q^q + (beta/2)*||v||^2

exposed as sklearn-style estimators:

* :class:`AlternatingMinimization` - block descent alternating inner
  iterative thresholding on u with a closed-form ridge update of v,
* :class:`AugmentedThresholding` - proximal gradient descent on the
  equivalent single-penalty problem with operator B = Q^(-1/2) A,
* :class:`InfimalConvolution` - proximal gradient descent on
  0.5*||A w - y||^2 + g(w), where g is the lq penalty convolved with a
  quadratic; the iterate w plays the role of u + v and needs no
  precomputation on A.

All three minimize the same objective; they differ in per-iteration cost and
in setup cost, which is what the benchmark experiments compare.
"""

import csv
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin, clone

from .augmented import build_augmented, v_of_u
from .linalg import compute_svd
from .prox import (
    infconv_value_and_argmin,
    lq_power_sum,
    prox_infconv_g,
    prox_lq,
    threshold_profile,
)
from .validation import as_matrix, as_vector, check_exponent, check_positive

__all__ = [
    "IterationTrace",
    "multipenalty_objective",
    "augmented_objective",
    "infconv_objective",
    "am_prox_step",
    "kkt_residual_augmented",
    "kkt_residual_infconv",
    "AlternatingMinimization",
    "AugmentedThresholding",
    "InfimalConvolution",
    "SOLVER_CLASSES",
    "fit_reference",
]

TRACE_COLUMNS = ("iter", "err_to_ref", "step_norm", "objective",
                 "support_size", "prox_calls", "elapsed_seconds")


def multipenalty_objective(u, v, a_matrix, y, alpha, beta, q):
    """0.5*||A(u+v) - y||^2 + (alpha/q)*sum|u_i|^q + (beta/2)*||v||^2."""
    resid = a_matrix @ (u + v) - y
    return (0.5 * float(resid @ resid)
            + (alpha / q) * lq_power_sum(u, q)
            + 0.5 * beta * float(np.dot(v, v)))


def augmented_objective(u, aug, alpha, q):
    """0.5*||B u - y_beta||^2 + (alpha/q)*sum|u_i|^q."""
    resid = aug.b_matrix @ u - aug.y_beta
    return 0.5 * float(resid @ resid) + (alpha / q) * lq_power_sum(u, q)


def infconv_objective(w, a_matrix, y, alpha, beta, q):
    """0.5*||A w - y||^2 + g(w) with g the infimal convolution penalty."""
    resid = a_matrix @ w - y
    g_val, _ = infconv_value_and_argmin(w, alpha, beta, q)
    return 0.5 * float(resid @ resid) + g_val


def am_prox_step(u, a_matrix, y, alpha, beta, q, mu, svd=None):
    """One proximal gradient step of the u-block of alternating minimization,
    taken at the exact ridge back-map v(u):

        prox_{mu,(alpha/q)||.||_q^q}( u - mu * A^T (A u + A v(u) - y) ).

    By the Woodbury identity this coincides with one iteration of the
    augmented solver; the two are implemented on independent paths so the
    equivalence is testable.
    """
    a = as_matrix(a_matrix)
    u = as_vector(u, length=a.shape[1], name="u")
    v = v_of_u(a, y, u, beta, svd=svd)
    grad = a.T @ (a @ u + a @ v - y)
    return prox_lq(u - mu * grad, q, alpha / q, mu)


def kkt_residual_augmented(u, aug, alpha, q, mu):
    """Max stationarity violation of u for the augmented problem.

    On the support: |alpha*sign(u_i)*|u_i|^(q-1) + (B^T(B u - y_beta))_i|.
    Off the support, u_i = 0 must survive the prox of a gradient step, i.e.
    |(u - mu*grad)_i| <= tau; the excess over tau is the violation.
    """
    u = as_vector(u, length=aug.b_matrix.shape[1], name="u")
    grad = aug.b_matrix.T @ (aug.b_matrix @ u - aug.y_beta)
    on = u != 0.0
    res = 0.0
    if np.any(on):
        stat = alpha * np.sign(u[on]) * np.abs(u[on]) ** (q - 1.0) + grad[on]
        res = float(np.max(np.abs(stat)))
    if np.any(~on):
        tau = threshold_profile(q, alpha / q, mu).tau
        excess = np.abs(u[~on] - mu * grad[~on]) - tau
        res = max(res, float(np.max(excess)), 0.0)
    return res


def kkt_residual_infconv(w, a_matrix, y, alpha, beta, q, mu):
    """Max stationarity violation of w for the infimal-convolution problem,
    split over the support of the attaining sparse component u:

        i in supp(u):  |alpha*mu*sign(u_i)*|u_i|^(q-1) + mu*(A^T(A w - y))_i|
        i not in supp: |beta*mu*w_i + mu*(A^T(A w - y))_i|
    """
    a = as_matrix(a_matrix)
    w = as_vector(w, length=a.shape[1], name="w")
    _, u = infconv_value_and_argmin(w, alpha, beta, q)
    grad = a.T @ (a @ w - y)
    on = u != 0.0
    res = 0.0
    if np.any(on):
        stat = mu * (alpha * np.sign(u[on]) * np.abs(u[on]) ** (q - 1.0) + grad[on])
        res = float(np.max(np.abs(stat)))
    if np.any(~on):
        stat = mu * (beta * w[~on] + grad[~on])
        res = max(res, float(np.max(np.abs(stat))))
    return res


@dataclass
class IterationTrace:
    """Per-iteration solver record.

    One row per proximal-operator call: relative error to the reference point
    (when one was supplied), successive-iterate norm, the solver's own
    objective value, exact support and sign pattern of the sparse component,
    cumulative prox calls and cumulative wall time (for the augmented solver
    the operator construction is included in the clock).
    """

    errors: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    supports: list = field(default_factory=list)
    signs: list = field(default_factory=list)
    prox_calls: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    has_reference: bool = False

    def __len__(self):
        return len(self.step_norms)

    def stabilization_index(self):
        """First index from which support and sign pattern stay constant."""
        if not self.supports:
            return 0
        final = (self.supports[-1], self.signs[-1])
        idx = len(self.supports)
        for k in range(len(self.supports) - 1, -1, -1):
            if (self.supports[k], self.signs[k]) == final:
                idx = k
            else:
                break
        return idx

    def rows(self):
        for k in range(len(self)):
            err = self.errors[k] if self.has_reference else ""
            yield (k, err, self.step_norms[k], self.objectives[k],
                   len(self.supports[k]), self.prox_calls[k], self.elapsed[k])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows():
                writer.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return x


def _pattern(x):
    sup = np.flatnonzero(x)
    return tuple(int(i) for i in sup), tuple(int(s) for s in np.sign(x[sup]))


def _power_norm_sq(a):
    """Power-iteration estimate of ||A||^2 (deterministic start, O(m*n))."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(0x5EC7)))
    x = rng.normal(size=a.shape[1])
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return 0.0
    x /= nrm
    est = 0.0
    for _ in range(40):
        x = a.T @ (a @ x)
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            return 0.0
        est = nrm
        x /= nrm
    return est


def _spectral_norm_sq(a):
    """||A||^2; exact for small matrices, power-iteration estimate (inflated
    for safety) for large ones.  Only used to pick default steps."""
    if a.size <= 2_000_000:
        return float(scipy.linalg.svdvals(a)[0]) ** 2
    return 1.05 * _power_norm_sq(a)


class _BaseSolver(RegressorMixin, BaseEstimator):
    """Shared plumbing for the three solvers.

    Parameters
    ----------
    alpha : float
        Weight of the sparsity penalty (alpha/q)*||u||_q^q.
    beta : float
        Weight of the quadratic penalty (beta/2)*||v||^2.
    q : float
        Penalty exponent in (0, 1].
    mu : float or None
        Step size of the thresholded gradient iteration.  ``None`` picks
        0.99 times the solver's safe bound (the reciprocal gradient
        Lipschitz constant of its smooth term).
    max_iter : int
        Iteration budget; for :class:`AlternatingMinimization` this caps the
        total number of proximal calls across all inner loops.
    tol : float
        Stop when the successive-iterate norm drops to this value.
    init : array or None
        Starting iterate; ``None`` starts from zero.
    reference : array or None
        Known stationary point; when given, the trace records the relative
        error of each iterate against it.
    record : bool
        Disable to skip trace accumulation (cheaper long reference runs).
    """

    _iterate_kind = "u"

    def __init__(self, alpha=0.02, beta=0.2, q=0.5, mu=None, max_iter=100_000,
                 tol=1e-10, init=None, reference=None, record=True):
        self.alpha = alpha
        self.beta = beta
        self.q = q
        self.mu = mu
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.reference = reference
        self.record = record

    def fit(self, X, y):
        a = as_matrix(X, name="X")
        yv = as_vector(y, length=a.shape[0], name="y")
        check_positive(self.alpha, "alpha")
        check_positive(self.beta, "beta")
        check_exponent(self.q)
        if self.mu is not None:
            check_positive(self.mu, "mu")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if float(self.tol) < 0.0:
            raise ValueError("tol must be >= 0")
        self._ref = (None if self.reference is None
                     else as_vector(self.reference, length=a.shape[1], name="reference"))
        self._run(a, yv)
        self.coef_ = self.w_
        self.n_features_in_ = a.shape[1]
        return self

    def predict(self, X):
        a = as_matrix(X, name="X")
        return a @ self.w_

    # -- helpers shared by the concrete loops --------------------------------

    def _initial(self, n):
        if self.init is None:
            return np.zeros(n)
        return as_vector(self.init, length=n, name="init").copy()

    def _new_trace(self):
        if not self.record:
            return None
        return IterationTrace(has_reference=self._ref is not None)

    def _record(self, trace, err_vec, pattern_vec, step, objective, calls, elapsed):
        if self._ref is not None:
            denom = float(np.linalg.norm(self._ref))
            err = float(np.linalg.norm(err_vec - self._ref))
            trace.errors.append(err / denom if denom > 0 else err)
        trace.step_norms.append(step)
        trace.objectives.append(objective)
        sup, sgn = _pattern(pattern_vec)
        trace.supports.append(sup)
        trace.signs.append(sgn)
        trace.prox_calls.append(calls)
        trace.elapsed.append(elapsed)


class AugmentedThresholding(_BaseSolver):
    """Iterative thresholding on the augmented single-penalty reduction.

    Builds B = Q^(-1/2) A and y_beta = Q^(-1/2) y once (the m x m setup this
    method pays for), then iterates

        u_{k+1} = prox_{mu,(alpha/q)||.||_q^q}( u_k - mu * B^T (B u_k - y_beta) )

    and finally recovers v from u in closed form.  Fitted attributes:
    ``u_``, ``v_``, ``w_`` (= u_ + v_), ``coef_`` (alias of ``w_``),
    ``trace_``, ``status_``, ``n_iter_``, ``prox_calls_``, ``mu_``, ``aug_``.
    """

    _iterate_kind = "u"

    def _run(self, a, y):
        t0 = time.perf_counter()
        aug = build_augmented(a, y, self.beta)
        lip = aug.lipschitz
        mu = self.mu if self.mu is not None else 0.99 / lip
        if self.mu is not None and lip > 0 and self.mu >= 1.0 / lip:
            warnings.warn(
                f"step mu={self.mu:.3g} is at or above the safe bound "
                f"{1.0 / lip:.3g} = ||A||^-2 + beta^-1; descent is not guaranteed",
                stacklevel=2)
        b, yb = aug.b_matrix, aug.y_beta
        nu = self.alpha / self.q
        u = self._initial(a.shape[1])
        trace = self._new_trace()
        r = b @ u - yb
        status = "max-iters"
        calls = 0
        n_iter = 0
        for _ in range(int(self.max_iter)):
            g = b.T @ r
            u_next = prox_lq(u - mu * g, self.q, nu, mu)
            calls += 1
            n_iter += 1
            step = float(np.linalg.norm(u_next - u))
            if not np.all(np.isfinite(u_next)):
                u = u_next
                status = "diverged"
                break
            r = b @ u_next - yb
            if trace is not None:
                obj = 0.5 * float(r @ r) + nu * lq_power_sum(u_next, self.q)
                self._record(trace, u_next, u_next, step, obj, calls,
                             time.perf_counter() - t0)
            u = u_next
            if step <= self.tol:
                status = "converged"
                break
        v = aug.v_from_u(a, y, u)
        self.u_, self.v_, self.w_ = u, v, u + v
        self.trace_, self.status_ = trace, status
        self.n_iter_, self.prox_calls_, self.mu_ = n_iter, calls, mu
        self.aug_ = aug


class InfimalConvolution(_BaseSolver):
    """Proximal gradient descent on the infimal-convolution reduction.

    Iterates on w (the combined signal u + v)

        w_{k+1} = prox_{mu,g}( w_k - mu * A^T (A w_k - y) )

    where the prox of g reduces to a convex combination with a single lq
    prox at an enlarged step.  No precomputation on A is needed, so the
    per-iteration cost is a pair of matvecs.  Support and signs in the trace
    are those of the attaining sparse component u_k.  ``error_on`` selects
    what the trace errors compare against the reference: the natural iterate
    w ("iterate", default) or the sparse component u_k ("sparse", matching
    the error metric of the u-iterating solvers in cross-method benchmarks).
    Fitted attributes as in :class:`AugmentedThresholding` (minus ``aug_``).
    """

    _iterate_kind = "w"

    def __init__(self, alpha=0.02, beta=0.2, q=0.5, mu=None, max_iter=100_000,
                 tol=1e-10, init=None, reference=None, record=True,
                 error_on="iterate"):
        super().__init__(alpha=alpha, beta=beta, q=q, mu=mu, max_iter=max_iter,
                         tol=tol, init=init, reference=reference, record=record)
        self.error_on = error_on

    def _run(self, a, y):
        t0 = time.perf_counter()
        if self.mu is None:
            smax_sq = _spectral_norm_sq(a)
            mu = 0.99 / smax_sq if smax_sq > 0 else 1.0
        else:
            # warning check only; the power estimate keeps this O(m*n) so an
            # explicit step never triggers a superlinear factorization here
            mu = self.mu
            smax_sq = _power_norm_sq(a)
            if smax_sq > 0 and mu >= 1.0 / smax_sq:
                warnings.warn(
                    f"step mu={mu:.3g} is at or above the safe bound "
                    f"{1.0 / smax_sq:.3g} = ||A||^-2; descent is not guaranteed",
                    stacklevel=2)
        if self.error_on not in ("iterate", "sparse"):
            raise ValueError("error_on must be 'iterate' or 'sparse'")
        nu = self.alpha / self.q
        t_beta = 1.0 / self.beta
        w = self._initial(a.shape[1])
        trace = self._new_trace()
        r = a @ w - y
        status = "max-iters"
        calls = 0
        n_iter = 0
        for _ in range(int(self.max_iter)):
            g = a.T @ r
            w_next = prox_infconv_g(w - mu * g, self.alpha, self.beta, self.q, mu)
            calls += 1
            n_iter += 1
            step = float(np.linalg.norm(w_next - w))
            if not np.all(np.isfinite(w_next)):
                w = w_next
                status = "diverged"
                break
            r = a @ w_next - y
            if trace is not None:
                u_k = prox_lq(w_next, self.q, nu, t_beta)
                obj = (0.5 * float(r @ r) + nu * lq_power_sum(u_k, self.q)
                       + 0.5 * self.beta * float(np.sum((w_next - u_k) ** 2)))
                err_vec = w_next if self.error_on == "iterate" else u_k
                self._record(trace, err_vec, u_k, step, obj, calls,
                             time.perf_counter() - t0)
            w = w_next
            if step <= self.tol:
                status = "converged"
                break
        u = prox_lq(w, self.q, nu, t_beta)
        self.u_, self.v_, self.w_ = u, w - u, w
        self.trace_, self.status_ = trace, status
        self.n_iter_, self.prox_calls_, self.mu_ = n_iter, calls, mu


class AlternatingMinimization(_BaseSolver):
    """Block descent on (u, v): inner iterative thresholding on u at fixed v,
    then the closed-form ridge update of v.

    The inner loop runs until its successive-iterate norm falls to
    ``inner_tol``; every inner thresholding step counts as one proximal
    call, which is the cost unit the benchmarks compare.  ``max_iter`` caps
    the total proximal calls.  The outer loop stops when both block updates
    fall below ``tol``.
    """

    _iterate_kind = "u"

    def __init__(self, alpha=0.02, beta=0.2, q=0.5, mu=None, max_iter=100_000,
                 tol=1e-10, init=None, reference=None, record=True,
                 inner_tol=1e-8):
        super().__init__(alpha=alpha, beta=beta, q=q, mu=mu, max_iter=max_iter,
                         tol=tol, init=init, reference=reference, record=record)
        self.inner_tol = inner_tol

    def _run(self, a, y):
        t0 = time.perf_counter()
        check_positive(self.inner_tol, "inner_tol")
        svd = compute_svd(a)
        smax_sq = float(svd.singular_values[0]) ** 2
        mu = self.mu if self.mu is not None else (0.99 / smax_sq if smax_sq > 0 else 1.0)
        if self.mu is not None and smax_sq > 0 and self.mu >= 1.0 / smax_sq:
            warnings.warn(
                f"inner step mu={self.mu:.3g} is at or above the safe bound "
                f"{1.0 / smax_sq:.3g} = ||A||^-2; descent is not guaranteed",
                stacklevel=2)
        nu = self.alpha / self.q
        n = a.shape[1]
        u = self._initial(n)
        v = np.zeros(n)
        trace = self._new_trace()
        status = "max-iters"
        calls = 0
        outer = 0
        budget = int(self.max_iter)
        while calls < budget:
            outer += 1
            y_eff = y - a @ v
            u_outer_prev = u.copy()
            pen_v = 0.5 * self.beta * float(np.dot(v, v))
            r = a @ u - y_eff
            while True:
                g = a.T @ r
                u_next = prox_lq(u - mu * g, self.q, nu, mu)
                calls += 1
                inner_step = float(np.linalg.norm(u_next - u))
                if not np.all(np.isfinite(u_next)):
                    self._finish(u_next, v, trace, "diverged", calls, outer, mu)
                    return
                r = a @ u_next - y_eff
                if trace is not None:
                    obj = 0.5 * float(r @ r) + nu * lq_power_sum(u_next, self.q) + pen_v
                    self._record(trace, u_next, u_next, inner_step, obj, calls,
                                 time.perf_counter() - t0)
                u = u_next
                if inner_step <= self.inner_tol or calls >= budget:
                    break
            v_next = v_of_u(a, y, u, self.beta, svd=svd)
            outer_u = float(np.linalg.norm(u - u_outer_prev))
            outer_v = float(np.linalg.norm(v_next - v))
            v = v_next
            if outer_u <= self.tol and outer_v <= self.tol:
                status = "converged"
                break
        self._finish(u, v, trace, status, calls, outer, mu)

    def _finish(self, u, v, trace, status, calls, outer, mu):
        self.u_, self.v_, self.w_ = u, v, u + v
        self.trace_, self.status_ = trace, status
        self.n_iter_, self.prox_calls_, self.mu_ = outer, calls, mu


SOLVER_CLASSES = {
    "alternating": AlternatingMinimization,
    "augmented": AugmentedThresholding,
    "infconv": InfimalConvolution,
}


def fit_reference(estimator, X, y, tol=1e-14, max_iter=None):
    """Fit a high-accuracy clone of ``estimator`` to serve as the stationary
    reference point for error traces.

    Returns the fitted clone; read ``u_`` (or ``w_`` for the
    infimal-convolution solver) off it.  For alternating minimization the
    inner tolerance is tightened along with the outer one, since the outer
    iterates cannot settle below the inner accuracy.
    """
    ref = clone(estimator)
    params = {"tol": tol, "reference": None, "record": False}
    if max_iter is None:
        max_iter = max(10 * int(estimator.max_iter), 1_000_000)
    params["max_iter"] = max_iter
    if isinstance(ref, AlternatingMinimization):
        params["inner_tol"] = min(float(estimator.inner_tol), tol)
    ref.set_params(**params)
    ref.fit(X, y)
    if ref.status_ != "converged":
        warnings.warn(f"reference run did not converge (status={ref.status_})",
                      stacklevel=2)
    return ref
