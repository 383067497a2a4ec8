"""Problem generators and the four benchmark experiment drivers.

Randomness is drawn from Philox, a counter-based 64-bit generator, through
named streams: every draw site derives its generator from
``SeedSequence(entropy=seed, spawn_key=(...))`` where the spawn key encodes
(grid index, trial, component).  Components are MATRIX=0, SIGNAL=1,
PRE_NOISE=2, POST_NOISE=3.  Trials are therefore reproducible individually
and independent of execution order, so they may run concurrently; the env
var FOLDSOLVE_THREADS caps that concurrency (default: serial).  Timing
trials always run serially, pinned to one BLAS thread, to avoid contention
skew.
"""

import hashlib
import json
import math
import os
import statistics
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import clone
from threadpoolctl import threadpool_limits

from .linalg import ProblemInstance
from .solvers import (
    SOLVER_CLASSES,
    AlternatingMinimization,
    AugmentedThresholding,
    InfimalConvolution,
    fit_reference,
)
from .rates import UndefinedRateError, empirical_rate
from .validation import check_exponent

__all__ = [
    "MATRIX", "SIGNAL", "PRE_NOISE", "POST_NOISE",
    "MatrixEnsemble", "NoiseSpec", "TuningResult",
    "ExperimentSpec", "RunRecord",
    "gen_matrix", "gen_sparse_signal", "make_problem",
    "tune_alpha_for_support",
    "experiment_vary_beta", "experiment_vary_m",
    "experiment_iteration_count", "experiment_timing",
    "run_experiment", "EXPERIMENT_NAMES",
]

MATRIX, SIGNAL, PRE_NOISE, POST_NOISE = 0, 1, 2, 3

EXPERIMENT_NAMES = ("vary-beta", "vary-m", "iteration-count", "timing")


def _stream(seed, *key):
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _child_seed(seed, *key):
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class MatrixEnsemble:
    """Random measurement-matrix family.

    ``gaussian`` draws iid entries; the partial kinds draw one generator row
    (circulant) or diagonal profile (Toeplitz), form the structured n x n
    matrix, and keep m rows sampled uniformly without replacement.  Entries
    are scaled by 1/sqrt(m) so columns have unit norm in expectation (for the
    iid Gaussian kind this is exactly variance 1/m).
    """

    kind: str            # gaussian | partial-circulant | partial-toeplitz
    m: int
    n: int
    entry_law: str = "gaussian"    # gaussian | rademacher
    seed: int | None = None


@dataclass(frozen=True)
class NoiseSpec:
    """Target ratios ||v||/||u|| (pre) and ||xi||/||u|| (post); the generated
    noise vectors are rescaled so the realized ratios are exact."""

    pre_level: float = 0.0
    post_level: float = 0.0

    def __post_init__(self):
        if self.pre_level < 0 or self.post_level < 0:
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class TuningResult:
    alpha: float | None
    support_size: int | None
    matched: bool
    probes_used: int


def _draw(rng, law, shape):
    if law == "gaussian":
        return rng.normal(0.0, 1.0, shape)
    if law == "rademacher":
        return rng.integers(0, 2, shape).astype(float) * 2.0 - 1.0
    raise ValueError(f"unknown entry law {law!r}")


def gen_matrix(ensemble: MatrixEnsemble):
    """Draw a matrix from the ensemble; deterministic for a fixed seed."""
    if ensemble.seed is None:
        raise ValueError("ensemble.seed must be set to generate a matrix")
    m, n = int(ensemble.m), int(ensemble.n)
    if m < 1 or n < 1:
        raise ValueError("ensemble dimensions must be positive")
    rng = _stream(ensemble.seed, MATRIX)
    scale = 1.0 / math.sqrt(m)
    if ensemble.kind == "gaussian":
        return _draw(rng, ensemble.entry_law, (m, n)) * scale
    if ensemble.kind not in ("partial-circulant", "partial-toeplitz"):
        raise ValueError(f"unknown ensemble kind {ensemble.kind!r}")
    if m > n:
        raise ValueError("partial ensembles need m <= n (rows come from an n x n matrix)")
    cols = np.arange(n)
    if ensemble.kind == "partial-circulant":
        gen_row = _draw(rng, ensemble.entry_law, n)
        rows = np.sort(rng.choice(n, size=m, replace=False))
        idx = (cols[None, :] - rows[:, None]) % n
        return gen_row[idx] * scale
    diag_profile = _draw(rng, ensemble.entry_law, 2 * n - 1)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    idx = (n - 1) + cols[None, :] - rows[:, None]
    return diag_profile[idx] * scale


def gen_sparse_signal(n, s, seed, magnitude_law="uniform"):
    """Exactly s nonzeros on a uniform random support.

    ``uniform`` magnitudes are drawn on [0.5, 1.5] with random signs, which
    keeps the smallest nonzero entry bounded away from zero;
    ``rademacher`` uses unit magnitudes.
    """
    n, s = int(n), int(s)
    if not 0 <= s <= n:
        raise ValueError(f"sparsity s must lie in [0, {n}]")
    u = np.zeros(n)
    if s == 0:
        return u
    rng = _stream(seed, SIGNAL)
    support = np.sort(rng.choice(n, size=s, replace=False))
    signs = rng.choice([-1.0, 1.0], size=s)
    if magnitude_law == "uniform":
        mags = rng.uniform(0.5, 1.5, size=s)
    elif magnitude_law == "rademacher":
        mags = np.ones(s)
    else:
        raise ValueError(f"unknown magnitude law {magnitude_law!r}")
    u[support] = signs * mags
    return u


def make_problem(ensemble, s, noise, seed, magnitude_law="uniform") -> ProblemInstance:
    """Generate y = A (u + v) + xi with exact noise-to-signal ratios."""
    if ensemble.seed is None:
        ensemble = replace(ensemble, seed=_child_seed(seed, MATRIX))
    a = gen_matrix(ensemble)
    u = gen_sparse_signal(ensemble.n, s, _child_seed(seed, SIGNAL), magnitude_law)
    u_norm = float(np.linalg.norm(u))
    v = np.zeros(ensemble.n)
    if noise.pre_level > 0 and u_norm > 0:
        d = _stream(seed, PRE_NOISE).normal(size=ensemble.n)
        v = d * (noise.pre_level * u_norm / float(np.linalg.norm(d)))
    xi = np.zeros(ensemble.m)
    if noise.post_level > 0 and u_norm > 0:
        d = _stream(seed, POST_NOISE).normal(size=ensemble.m)
        xi = d * (noise.post_level * u_norm / float(np.linalg.norm(d)))
    y = a @ (u + v) + xi
    return ProblemInstance(matrix=a, observation=y, ground_truth=u,
                           pre_noise=v, post_noise=xi)


def tune_alpha_for_support(problem, estimator, target_support, *, probes=60,
                           probe_tol=1e-8, probe_max_iter=20000):
    """Largest penalty weight whose converged solution has exactly
    ``target_support`` nonzeros, found by bisection in log(alpha).

    The support size of the solution is a nonincreasing staircase in alpha,
    so the search brackets the target level by exponential scaling from the
    soft-thresholding scale ||A^T y||_inf and then bisects, remembering the
    largest tested alpha that hits the target exactly.  Returns a
    :class:`TuningResult` with ``matched=False`` when no tested weight
    matches (not an error: some targets are unattainable).
    """
    target = int(target_support)
    a, y = problem.matrix, problem.observation
    used = 0

    def support_size(alpha):
        nonlocal used
        used += 1
        est = clone(estimator)
        est.set_params(alpha=alpha, tol=probe_tol, max_iter=probe_max_iter,
                       record=False, reference=None)
        est.fit(a, y)
        return int(np.count_nonzero(est.u_))

    scale = float(np.max(np.abs(a.T @ y)))
    if scale == 0.0:
        scale = 1.0
    best = None
    best_size = None

    hi = scale
    size_hi = support_size(hi)
    while size_hi > target and hi < scale * 1e9:
        hi *= 8.0
        size_hi = support_size(hi)
    lo = min(scale, hi) / 8.0
    size_lo = support_size(lo)
    while size_lo < target and lo > scale * 1e-12:
        lo /= 8.0
        size_lo = support_size(lo)
    for size, alpha in ((size_hi, hi), (size_lo, lo)):
        if size == target and (best is None or alpha > best):
            best, best_size = alpha, size
    while used < probes and hi / lo > 1.0 + 1e-6:
        mid = math.sqrt(lo * hi)
        size = support_size(mid)
        if size == target and (best is None or mid > best):
            best, best_size = mid, size
        if size < target:
            hi = mid
        else:
            lo = mid
    return TuningResult(alpha=best, support_size=best_size,
                        matched=best is not None, probes_used=used)


# ---------------------------------------------------------------------------
# experiment specs and records
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "vary-beta": dict(m=200, n=600, s=20, trials=1, target_err=1e-6,
                      beta_grid=(0.05, 0.2, 1.0, 5.0)),
    "vary-m": dict(n=600, s=20, trials=5, m_grid=(100, 200, 300, 400)),
    "iteration-count": dict(m=100, n=500, s=14, trials=1, target_support=13,
                            target_err=1e-4),
    "timing": dict(n=1000, s=20, trials=5, m_grid=(250, 500, 1000, 2000),
                   alpha=0.02, mu=0.1, iterations=50),
}

_TIMING_FULL_SCALE = dict(n=5000, s=100, trials=20,
                           m_grid=(1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000))


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment run.

    Unset dimension/grid fields are filled with the experiment's canonical
    defaults; ``alpha=None`` means "tune for the target support size".
    For the timing experiment ``full_scale=True`` switches from the scaled
    grid (n=1000, m up to 2000) to the full-size benchmark grid (n=5000,
    m up to 8000), which takes hours and whose scaling exponents are
    hardware dependent.
    """

    name: str
    seed: int = 0
    trials: int | None = None
    m: int | None = None
    n: int | None = None
    s: int | None = None
    q: float = 0.5
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(0.1, 0.1))
    ensemble_kind: str = "gaussian"
    entry_law: str = "gaussian"
    magnitude_law: str = "uniform"
    alpha: float | None = None
    beta: float = 0.2
    beta_grid: tuple | None = None
    m_grid: tuple | None = None
    mu: float | None = None
    target_support: int | None = None
    target_err: float | None = None
    iterations: int = 50
    full_scale: bool = False
    stop_tol: float = 1e-10
    reference_tol: float = 1e-14
    tail_fraction: float = 0.3

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise ValueError(f"unknown experiment {self.name!r}; "
                             f"expected one of {EXPERIMENT_NAMES}")
        if isinstance(self.noise, (list, tuple)):
            self.noise = NoiseSpec(*self.noise)
        elif isinstance(self.noise, dict):
            self.noise = NoiseSpec(**self.noise)
        defaults = dict(_DEFAULTS[self.name])
        if self.name == "timing" and self.full_scale:
            defaults.update(_TIMING_FULL_SCALE)
        for key, value in defaults.items():
            if getattr(self, key, None) is None:
                setattr(self, key, value)
        check_exponent(self.q)
        if self.trials is None:
            self.trials = 1
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        for grid_name in ("beta_grid", "m_grid"):
            grid = getattr(self, grid_name)
            if grid is not None:
                grid = tuple(grid)
                if not grid:
                    raise ValueError(f"{grid_name} must be nonempty")
                setattr(self, grid_name, grid)
        if self.target_support is None and self.s is not None:
            self.target_support = self.s

    def to_dict(self):
        d = asdict(self)
        d["noise"] = asdict(self.noise)
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment spec keys: {sorted(unknown)}")
        return cls(**data)


def _spec_hash(spec_dict):
    canon = json.dumps(spec_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _fmt_cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def atomic_write_text(path, text):
    """Write via a temp file in the target directory plus rename, so no
    reader ever sees a half-written file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunRecord:
    """Raw per-trial rows plus aggregates; aggregates are always recomputable
    from the rows."""

    spec: dict
    columns: tuple
    rows: list
    aggregates: dict

    @property
    def spec_hash(self):
        return _spec_hash(self.spec)

    def csv_text(self):
        lines = [f"# spec_hash={self.spec_hash}", ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt_cell(row.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        atomic_write_text(path, self.csv_text())

    def write_json(self, path):
        payload = {"spec": self.spec, "spec_hash": self.spec_hash,
                   "aggregates": self.aggregates, "n_rows": len(self.rows)}
        atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _max_workers():
    raw = os.environ.get("FOLDSOLVE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    workers = _max_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _ensemble_for(spec, m):
    return MatrixEnsemble(kind=spec.ensemble_kind, m=m, n=spec.n,
                          entry_law=spec.entry_law, seed=None)


def _calls_to_error(trace, target):
    """First cumulative prox-call count whose error reaches target."""
    if not trace.has_reference:
        return None
    for err, calls in zip(trace.errors, trace.prox_calls):
        if err <= target:
            return calls
    return None


def _tuned_alpha(problem, template, target, **tune_kwargs):
    result = tune_alpha_for_support(problem, template, target, **tune_kwargs)
    if not result.matched:
        raise RuntimeError(
            f"could not tune alpha to a support of size {target}; "
            f"closest size found: {result.support_size}")
    return result.alpha


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def experiment_vary_beta(spec: ExperimentSpec) -> RunRecord:
    """Error-versus-prox-call curves of the augmented solver across the beta
    grid on one fixed problem instance, each run at its own largest safe step
    0.99 * (||A||^-2 + beta^-1); smaller beta admits larger steps."""
    problem = make_problem(_ensemble_for(spec, spec.m), spec.s, spec.noise,
                           seed=spec.seed, magnitude_law=spec.magnitude_law)
    a, y = problem.matrix, problem.observation
    rows, per_beta = [], []

    def one_beta(b):
        template = AugmentedThresholding(beta=b, q=spec.q, mu=spec.mu,
                                         tol=spec.stop_tol)
        alpha = spec.alpha if spec.alpha is not None else _tuned_alpha(
            problem, template, spec.target_support)
        est = clone(template).set_params(alpha=alpha)
        ref = fit_reference(est, a, y, tol=spec.reference_tol)
        run = clone(est).set_params(reference=ref.u_).fit(a, y)
        return b, alpha, run

    for b, alpha, run in _map_ordered(one_beta, list(spec.beta_grid)):
        tr = run.trace_
        for k, (err, calls) in enumerate(zip(tr.errors, tr.prox_calls)):
            rows.append({"beta": b, "iter": k, "prox_calls": calls, "err": err,
                         "step_norm": tr.step_norms[k],
                         "objective": tr.objectives[k],
                         "support_size": len(tr.supports[k])})
        per_beta.append({"beta": b, "alpha": alpha, "mu": run.mu_,
                         "iterations": len(tr), "status": run.status_,
                         "calls_to_target": _calls_to_error(tr, spec.target_err)})
    aggregates = {"per_beta": per_beta, "target_err": spec.target_err}
    return RunRecord(spec=spec.to_dict(),
                     columns=("beta", "iter", "prox_calls", "err", "step_norm",
                              "objective", "support_size"),
                     rows=rows, aggregates=aggregates)


def experiment_vary_m(spec: ExperimentSpec) -> RunRecord:
    """Empirical tail contraction rates of the augmented solver as the number
    of measurements grows (fresh instances per trial)."""
    items = [(mi, m, trial)
             for mi, m in enumerate(spec.m_grid)
             for trial in range(spec.trials)]

    def one(item):
        mi, m, trial = item
        problem = make_problem(_ensemble_for(spec, m), spec.s, spec.noise,
                               seed=_child_seed(spec.seed, mi, trial),
                               magnitude_law=spec.magnitude_law)
        a, y = problem.matrix, problem.observation
        template = AugmentedThresholding(beta=spec.beta, q=spec.q, mu=spec.mu,
                                         tol=spec.stop_tol)
        alpha = spec.alpha if spec.alpha is not None else _tuned_alpha(
            problem, template, spec.target_support)
        est = clone(template).set_params(alpha=alpha)
        ref = fit_reference(est, a, y, tol=spec.reference_tol)
        run = clone(est).set_params(reference=ref.u_).fit(a, y)
        try:
            rate = empirical_rate(run.trace_, spec.tail_fraction)
        except UndefinedRateError:
            rate = None
        return {"m": m, "trial": trial, "alpha": alpha, "mu": run.mu_,
                "tail_rate": rate, "support_size": int(np.count_nonzero(run.u_)),
                "status": run.status_}

    rows = _map_ordered(one, items)
    per_m = []
    for m in spec.m_grid:
        rates = [r["tail_rate"] for r in rows if r["m"] == m and r["tail_rate"] is not None]
        per_m.append({"m": m,
                      "median_tail_rate": statistics.median(rates) if rates else None,
                      "trials_with_rate": len(rates)})
    return RunRecord(spec=spec.to_dict(),
                     columns=("m", "trial", "alpha", "mu", "tail_rate",
                              "support_size", "status"),
                     rows=rows, aggregates={"per_m": per_m})


def experiment_iteration_count(spec: ExperimentSpec) -> RunRecord:
    """Error decay against cumulative prox calls for all three solvers on one
    instance, each tuned to return a solution of the target support size.

    The three formulations share one objective, so the weight is tuned once
    on the cheap augmented solver and re-tuned per method only if a method's
    stationary point (support certified on the converged reference, not on
    the probe) lands on a different support size.  Errors are relative errors
    of the sparse iterates u_k against u_star for every method, which is the
    comparable cross-method metric; for the infimal-convolution solver u_k is
    its attaining sparse component.
    """
    problem = make_problem(_ensemble_for(spec, spec.m), spec.s, spec.noise,
                           seed=spec.seed, magnitude_law=spec.magnitude_law)
    a, y = problem.matrix, problem.observation
    target = spec.target_support

    # augmented anchor: tune the shared weight and certify the support on
    # the converged reference, retuning once if the probe misjudged it
    base = AugmentedThresholding(beta=spec.beta, q=spec.q, tol=spec.stop_tol,
                                 mu=spec.mu)
    alpha = spec.alpha if spec.alpha is not None else _tuned_alpha(
        problem, base, target, probe_tol=1e-9, probe_max_iter=30_000)
    est_aug = clone(base).set_params(alpha=alpha)
    ref_aug = fit_reference(est_aug, a, y, tol=spec.reference_tol)
    if int(np.count_nonzero(ref_aug.u_)) != target:
        alpha = _tuned_alpha(problem, base, target, probe_tol=1e-10,
                             probe_max_iter=60_000)
        est_aug = clone(base).set_params(alpha=alpha)
        ref_aug = fit_reference(est_aug, a, y, tol=spec.reference_tol)
    u_star = ref_aug.u_

    results = {}
    run_aug = clone(est_aug).set_params(reference=u_star).fit(a, y)
    results["augmented"] = (alpha, int(np.count_nonzero(ref_aug.u_)),
                            run_aug, "own")

    est_ic = InfimalConvolution(alpha=alpha, beta=spec.beta, q=spec.q,
                                tol=spec.stop_tol, mu=spec.mu,
                                error_on="sparse")
    ref_ic = fit_reference(est_ic, a, y, tol=spec.reference_tol)
    alpha_ic, size_ic = alpha, int(np.count_nonzero(ref_ic.u_))
    if size_ic != target:
        alpha_ic = _tuned_alpha(problem, est_ic, target, probe_tol=1e-9,
                                probe_max_iter=30_000)
        est_ic = clone(est_ic).set_params(alpha=alpha_ic)
        ref_ic = fit_reference(est_ic, a, y, tol=spec.reference_tol)
        size_ic = int(np.count_nonzero(ref_ic.u_))
    run_ic = clone(est_ic).set_params(reference=ref_ic.u_).fit(a, y)
    results["infconv"] = (alpha_ic, size_ic, run_ic, "own")

    # alternating minimization approaches the same stationary point as the
    # augmented anchor on benign instances; running it against the anchor
    # reference and verifying the coincidence afterwards avoids an inner
    # loop driven to reference accuracy.  When verification fails, fall back
    # to its own (expensive) reference.
    est_am = AlternatingMinimization(alpha=alpha, beta=spec.beta, q=spec.q,
                                     tol=spec.stop_tol, mu=spec.mu,
                                     max_iter=400_000)
    run_am = clone(est_am).set_params(reference=u_star).fit(a, y)
    deviation = float(np.linalg.norm(run_am.u_ - u_star)
                      / np.linalg.norm(u_star))
    am_kind = "augmented-anchor"
    alpha_am, size_am = alpha, int(np.count_nonzero(run_am.u_))
    if deviation > 1e-5 or size_am != target:
        am_kind = "own"
        if size_am != target:
            alpha_am = _tuned_alpha(problem, est_am, target, probe_tol=1e-9,
                                    probe_max_iter=60_000)
            est_am = clone(est_am).set_params(alpha=alpha_am)
        ref_am = fit_reference(est_am, a, y,
                               tol=max(spec.reference_tol, 1e-12),
                               max_iter=2_000_000)
        size_am = int(np.count_nonzero(ref_am.u_))
        run_am = clone(est_am).set_params(reference=ref_am.u_).fit(a, y)
    results["alternating"] = (alpha_am, size_am, run_am, am_kind)

    rows, per_method = [], []
    for method in ("alternating", "augmented", "infconv"):
        m_alpha, size, run, ref_kind = results[method]
        tr = run.trace_
        for k, (err, calls) in enumerate(zip(tr.errors, tr.prox_calls)):
            rows.append({"method": method, "iter": k, "prox_calls": calls,
                         "err": err})
        per_method.append({"method": method, "alpha": m_alpha,
                           "support_size": size, "status": run.status_,
                           "reference": ref_kind,
                           "calls_to_target": _calls_to_error(tr, spec.target_err)})
    aggregates = {"per_method": per_method, "target_err": spec.target_err}
    return RunRecord(spec=spec.to_dict(),
                     columns=("method", "iter", "prox_calls", "err"),
                     rows=rows, aggregates=aggregates)


def experiment_timing(spec: ExperimentSpec) -> RunRecord:
    """Wall time of a fixed iteration budget for the augmented and
    infimal-convolution solvers across the measurement grid.

    The augmented time includes constructing its operator, which is the
    superlinear-in-m cost under study; the infimal-convolution solver has no
    setup and scales with the matvec cost.  Each (trial, solver) cell is the
    median of 3 repetitions on one BLAS thread (a single repetition at full
    scale, where cells run minutes and repetition noise is negligible);
    times are the only nondeterministic CSV content.
    """
    reps_per_cell = 1 if spec.full_scale else 3
    rows = []
    for mi, m in enumerate(spec.m_grid):
        for trial in range(spec.trials):
            problem = make_problem(_ensemble_for(spec, m), spec.s, spec.noise,
                                   seed=_child_seed(spec.seed, mi, trial),
                                   magnitude_law=spec.magnitude_law)
            a, y = problem.matrix, problem.observation
            for solver in ("augmented", "infconv"):
                est = SOLVER_CLASSES[solver](alpha=spec.alpha, beta=spec.beta,
                                      q=spec.q, mu=spec.mu,
                                      max_iter=spec.iterations, tol=0.0,
                                      record=False)
                reps = []
                with threadpool_limits(limits=1):
                    for _ in range(reps_per_cell):
                        runner = clone(est)
                        t0 = time.perf_counter()
                        runner.fit(a, y)
                        reps.append(time.perf_counter() - t0)
                rows.append({"solver": solver, "m": m, "trial": trial,
                             "seconds": statistics.median(reps)})
    per_cell, slopes = [], {}
    for solver in ("augmented", "infconv"):
        means = []
        for m in spec.m_grid:
            secs = [r["seconds"] for r in rows
                    if r["solver"] == solver and r["m"] == m]
            per_cell.append({"solver": solver, "m": m,
                             "mean_seconds": statistics.fmean(secs),
                             "min_seconds": min(secs), "max_seconds": max(secs)})
            means.append(statistics.fmean(secs))
        slope = float(np.polyfit(np.log(np.asarray(spec.m_grid, float)),
                                 np.log(np.asarray(means)), 1)[0])
        slopes[solver] = slope
    return RunRecord(spec=spec.to_dict(),
                     columns=("solver", "m", "trial", "seconds"),
                     rows=rows,
                     aggregates={"per_solver_m": per_cell, "loglog_slopes": slopes})


_RUNNERS = {
    "vary-beta": experiment_vary_beta,
    "vary-m": experiment_vary_m,
    "iteration-count": experiment_iteration_count,
    "timing": experiment_timing,
}


def run_experiment(spec: ExperimentSpec) -> RunRecord:
    return _RUNNERS[spec.name](spec)
