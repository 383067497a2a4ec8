"""Command-line interface.

Subcommands (each takes a JSON config validated against a schema before any
computation starts; exit codes: 0 success, 2 config error, 1 runtime error):

* ``solve``       - run one solver on an explicit or generated problem,
                    writing ``solve_result.json`` (and optionally the trace CSV).
* ``prox-table``  - sample thresholding curves to ``prox_table.csv``.
* ``analyze``     - fit an empirical rate from a trace CSV and compare it with
                    the theoretical contraction constant, writing ``analysis.json``.
* ``experiment``  - run a named benchmark experiment, writing ``<name>.csv``
                    plus a JSON sidecar with the spec and aggregates.
* ``rip``         - restricted-isometry constant of a matrix, writing ``rip.json``.

All file writes are atomic (temp file + rename).  CSV floats carry 17
significant digits; JSON floats use shortest round-trip encoding.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np
import jsonschema

from . import __version__
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentSpec,
    MatrixEnsemble,
    NoiseSpec,
    atomic_write_text,
    gen_matrix,
    make_problem,
    run_experiment,
)
from .prox import prox_lq
from .rates import (
    UndefinedRateError,
    alpha_star_augmented,
    alpha_star_infconv,
    empirical_rate,
    rate_augmented,
    rate_infconv,
    rip_bruteforce,
    rip_gaussian_order,
)
from .solvers import SOLVER_CLASSES, IterationTrace

log = logging.getLogger("foldsolve")


class ConfigError(Exception):
    """Invalid configuration file; maps to exit code 2."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_Q = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_INT1 = {"type": "integer", "minimum": 1}

_ENSEMBLE_SCHEMA = {
    "type": "object",
    "required": ["kind", "m", "n"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["gaussian", "partial-circulant", "partial-toeplitz"]},
        "m": _INT1,
        "n": _INT1,
        "entry_law": {"enum": ["gaussian", "rademacher"]},
        "seed": {"type": "integer"},
    },
}

_NOISE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"pre_level": _NONNEG, "post_level": _NONNEG},
}

_PROBLEM_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["matrix", "observation"],
            "additionalProperties": False,
            "properties": {
                "matrix": {"type": "array", "items": {"type": "array", "items": _NUM}},
                "observation": {"type": "array", "items": _NUM},
            },
        },
        {
            "type": "object",
            "required": ["ensemble", "sparsity"],
            "additionalProperties": False,
            "properties": {
                "ensemble": _ENSEMBLE_SCHEMA,
                "sparsity": {"type": "integer", "minimum": 0},
                "noise": _NOISE_SCHEMA,
                "seed": {"type": "integer"},
                "magnitude_law": {"enum": ["uniform", "rademacher"]},
            },
        },
    ]
}

SOLVE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "solver", "problem"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "solver": {"enum": sorted(SOLVER_CLASSES)},
        "problem": _PROBLEM_SCHEMA,
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _POS, "beta": _POS, "q": _Q, "mu": _POS,
                "max_iter": _INT1, "tol": _NONNEG, "inner_tol": _POS,
                "init": {"type": "array", "items": _NUM},
            },
        },
        "trace_csv": {"type": "boolean"},
    },
}

PROX_TABLE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "u_min", "u_max", "num_points", "nu", "mu"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "u_min": _NUM, "u_max": _NUM,
        "num_points": {"type": "integer", "minimum": 2},
        "q": {"anyOf": [_Q, {"type": "array", "items": _Q, "minItems": 1}]},
        "nu": _POS, "mu": _POS,
    },
}

ANALYZE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "trace_csv", "solver", "alpha", "beta",
                 "q", "mu", "d_min"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "trace_csv": {"type": "string"},
        "solver": {"enum": ["augmented", "infconv"]},
        "alpha": _NONNEG, "beta": _POS, "q": _Q, "mu": _POS, "d_min": _POS,
        "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "spec_norm_a": _POS,
        "lambda_min": _NONNEG,
        "delta": _NONNEG,
        "matrix_csv": {"type": "string"},
        "support": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}

RIP_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "s", "method"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "s": _INT1,
        "method": {"enum": ["brute-force", "gaussian-order"]},
        "constant": _POS,
        "m": _INT1,
        "n": _INT1,
        "matrix_csv": {"type": "string"},
        "ensemble": _ENSEMBLE_SCHEMA,
        "seed": {"type": "integer"},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "name"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "name": {"enum": list(EXPERIMENT_NAMES)},
        "seed": {"type": "integer"},
        "trials": _INT1,
        "m": _INT1, "n": _INT1, "s": {"type": "integer", "minimum": 0},
        "q": _Q,
        "noise": _NOISE_SCHEMA,
        "ensemble_kind": {"enum": ["gaussian", "partial-circulant", "partial-toeplitz"]},
        "entry_law": {"enum": ["gaussian", "rademacher"]},
        "magnitude_law": {"enum": ["uniform", "rademacher"]},
        "alpha": _POS, "beta": _POS,
        "beta_grid": {"type": "array", "items": _POS, "minItems": 1},
        "m_grid": {"type": "array", "items": _INT1, "minItems": 1},
        "mu": _POS,
        "target_support": {"type": "integer", "minimum": 0},
        "target_err": _POS,
        "iterations": _INT1,
        "full_scale": {"type": "boolean"},
        "stop_tol": _NONNEG,
        "reference_tol": _POS,
        "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
}


def _load_config(path, schema):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "$" + "".join(f".{p}" if isinstance(p, str) else f"[{p}]"
                              for p in exc.absolute_path)
        raise ConfigError(f"{path}: config error at {where}: {exc.message}")
    return data


def _json_text(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_text(columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, float):
                cells.append(f"{x:.17g}")
            elif x is None:
                cells.append("")
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _problem_from_config(cfg, seed_override=None):
    if "matrix" in cfg:
        a = np.asarray(cfg["matrix"], dtype=float)
        y = np.asarray(cfg["observation"], dtype=float)
        from .linalg import ProblemInstance
        return ProblemInstance(matrix=a, observation=y)
    ens_cfg = dict(cfg["ensemble"])
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    ensemble = MatrixEnsemble(kind=ens_cfg["kind"], m=ens_cfg["m"], n=ens_cfg["n"],
                              entry_law=ens_cfg.get("entry_law", "gaussian"),
                              seed=ens_cfg.get("seed"))
    noise = NoiseSpec(**cfg.get("noise", {}))
    return make_problem(ensemble, cfg["sparsity"], noise, seed=seed,
                        magnitude_law=cfg.get("magnitude_law", "uniform"))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_solve(args):
    cfg = _load_config(args.config, SOLVE_SCHEMA)
    problem = _problem_from_config(cfg["problem"], seed_override=args.seed)
    params = dict(cfg.get("params", {}))
    cls = SOLVER_CLASSES[cfg["solver"]]
    if cls is not SOLVER_CLASSES["alternating"]:
        params.pop("inner_tol", None)
    est = cls(**params)
    est.fit(problem.matrix, problem.observation)
    from .solvers import multipenalty_objective
    objective = multipenalty_objective(est.u_, est.v_, problem.matrix,
                                       problem.observation, est.alpha,
                                       est.beta, est.q)
    result = {
        "solver": cfg["solver"],
        "status": est.status_,
        "n_iter": est.n_iter_,
        "prox_calls": est.prox_calls_,
        "mu": est.mu_,
        "objective": objective,
        "u": est.u_.tolist(),
        "v": est.v_.tolist(),
        "w": est.w_.tolist(),
    }
    out = os.path.join(args.output_dir, "solve_result.json")
    atomic_write_text(out, _json_text(result))
    log.info("wrote %s", out)
    if cfg.get("trace_csv") and est.trace_ is not None:
        trace_path = os.path.join(args.output_dir, "solve_trace.csv")
        from .solvers import TRACE_COLUMNS
        atomic_write_text(trace_path, _csv_text(TRACE_COLUMNS, est.trace_.rows()))
        log.info("wrote %s", trace_path)


def _cmd_prox_table(args):
    cfg = _load_config(args.config, PROX_TABLE_SCHEMA)
    qs = cfg.get("q", 0.5)
    if not isinstance(qs, list):
        qs = [qs]
    grid = np.linspace(cfg["u_min"], cfg["u_max"], cfg["num_points"])
    rows = []
    for q in qs:
        values = prox_lq(grid, q, cfg["nu"], cfg["mu"])
        rows.extend((float(u), float(q), float(cfg["nu"]), float(cfg["mu"]), float(p))
                    for u, p in zip(grid, values))
    out = os.path.join(args.output_dir, "prox_table.csv")
    atomic_write_text(out, _csv_text(("u", "q", "nu", "mu", "prox"), rows))
    log.info("wrote %s", out)


def _trace_from_csv(path):
    """Rebuild a trace from its CSV export.

    The CSV keeps only support sizes, so stabilization detection degrades to
    size constancy; errors/steps/objectives round-trip in full precision.
    """
    trace = IterationTrace()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            err = row.get("err_to_ref", "")
            if err:
                trace.errors.append(float(err))
            trace.step_norms.append(float(row["step_norm"]))
            trace.objectives.append(float(row["objective"]))
            size = int(row["support_size"])
            trace.supports.append((size,))
            trace.signs.append(())
            trace.prox_calls.append(int(row["prox_calls"]))
            elapsed = row.get("elapsed_seconds", "")
            trace.elapsed.append(float(elapsed) if elapsed else 0.0)
    trace.has_reference = len(trace.errors) == len(trace.step_norms) and len(trace) > 0
    return trace


def _cmd_analyze(args):
    cfg = _load_config(args.config, ANALYZE_SCHEMA)
    trace = _trace_from_csv(cfg["trace_csv"])
    tail = cfg.get("tail_fraction", 0.3)
    try:
        measured = empirical_rate(trace, tail)
    except UndefinedRateError as exc:
        raise ConfigError(f"trace unusable for rate fitting: {exc}")
    if cfg["solver"] == "augmented":
        if "spec_norm_a" not in cfg:
            raise ConfigError("augmented analysis needs spec_norm_a")
        if ("lambda_min" in cfg) == ("delta" in cfg):
            raise ConfigError("give exactly one of lambda_min or delta")
        kw = ({"lambda_min": cfg["lambda_min"]} if "lambda_min" in cfg
              else {"delta": cfg["delta"]})
        bound = rate_augmented(cfg["spec_norm_a"], cfg["beta"], cfg["mu"],
                               cfg["alpha"], cfg["q"], cfg["d_min"], **kw)
        star = alpha_star_augmented(cfg["spec_norm_a"], cfg["beta"], cfg["q"],
                                    cfg["d_min"], **kw).alpha_star
    else:
        if "matrix_csv" not in cfg or "support" not in cfg:
            raise ConfigError("infconv analysis needs matrix_csv and support")
        a = np.loadtxt(cfg["matrix_csv"], delimiter=",", ndmin=2)
        bound = rate_infconv(a, cfg["support"], cfg["mu"], cfg["alpha"],
                             cfg["beta"], cfg["q"], cfg["d_min"])
        star = alpha_star_infconv(a, cfg["support"], cfg["mu"], cfg["q"],
                                  cfg["d_min"]).alpha_star
    payload = {
        "empirical_rate": measured,
        "theoretical_rate": None if math.isinf(bound.constant) else bound.constant,
        "admissible": bound.admissible,
        "alpha_star": None if math.isinf(star) else star,
    }
    out = os.path.join(args.output_dir, "analysis.json")
    atomic_write_text(out, _json_text(payload))
    log.info("wrote %s", out)


def _cmd_rip(args):
    cfg = _load_config(args.config, RIP_SCHEMA)
    if cfg["method"] == "gaussian-order":
        if "m" not in cfg or "n" not in cfg:
            raise ConfigError("gaussian-order needs m and n")
        est = rip_gaussian_order(cfg["m"], cfg["n"], cfg["s"],
                                 cfg.get("constant", 1.0))
    else:
        if "matrix_csv" in cfg:
            a = np.loadtxt(cfg["matrix_csv"], delimiter=",", ndmin=2)
        elif "ensemble" in cfg:
            ens = dict(cfg["ensemble"])
            if ens.get("seed") is None:
                ens["seed"] = cfg.get("seed", 0)
            a = gen_matrix(MatrixEnsemble(kind=ens["kind"], m=ens["m"], n=ens["n"],
                                          entry_law=ens.get("entry_law", "gaussian"),
                                          seed=ens["seed"]))
        else:
            raise ConfigError("brute-force needs matrix_csv or ensemble")
        est = rip_bruteforce(a, cfg["s"])
    payload = {"s": est.s, "delta": est.delta, "method": est.method}
    out = os.path.join(args.output_dir, "rip.json")
    atomic_write_text(out, _json_text(payload))
    log.info("wrote %s", out)


def _cmd_experiment(args):
    cfg = _load_config(args.config, EXPERIMENT_SCHEMA)
    cfg.pop("schema_version")
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        spec = ExperimentSpec.from_dict(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc))
    record = run_experiment(spec)
    base = os.path.join(args.output_dir, spec.name)
    record.write_csv(base + ".csv")
    record.write_json(base + ".json")
    log.info("wrote %s.csv and %s.json", base, base)


_CONFIG_DOCS = {
    "solve": """\
config keys:
  schema_version  (required) must be 1
  solver          (required) one of: alternating, augmented, infconv
  problem         (required) either {matrix: [[...]], observation: [...]} or
                  {ensemble: {kind, m, n, entry_law?, seed?}, sparsity,
                   noise?: {pre_level, post_level}, seed?, magnitude_law?}
  params          optional solver parameters: alpha, beta, q, mu, max_iter,
                  tol, inner_tol (alternating only), init
  trace_csv       optional bool; also write the per-iteration trace CSV""",
    "prox-table": """\
config keys:
  schema_version  (required) must be 1
  u_min, u_max    (required) sampling interval for the input u
  num_points      (required) number of grid points (>= 2)
  nu, mu          (required) penalty weight and step size
  q               exponent in (0, 1], or a list of them (default 0.5)""",
    "analyze": """\
config keys:
  schema_version  (required) must be 1
  trace_csv       (required) path to a trace CSV with an err_to_ref column
  solver          (required) augmented | infconv
  alpha, beta, q, mu, d_min  (required) run parameters and the smallest
                  nonzero magnitude of the stationary point
  tail_fraction   trailing fraction of iterations to fit (default 0.3)
  spec_norm_a     ||A|| (augmented form, required there)
  lambda_min | delta  exactly one: support eigenvalue floor or isometry
                  constant (augmented form)
  matrix_csv      path to A as CSV (infconv form, required there)
  support         stationary support indices (infconv form, required there)""",
    "rip": """\
config keys:
  schema_version  (required) must be 1
  s               (required) isometry order
  method          (required) brute-force | gaussian-order
  constant        leading constant for gaussian-order (default 1.0)
  m, n            dimensions (gaussian-order)
  matrix_csv      path to the matrix as CSV (brute-force)
  ensemble        generator spec {kind, m, n, entry_law?, seed?} (brute-force)
  seed            generator seed when the ensemble carries none""",
    "experiment": """\
config keys (all except schema_version and name optional; unset dimensions
use the experiment's canonical defaults):
  schema_version  (required) must be 1
  name            (required) vary-beta | vary-m | iteration-count | timing
  seed, trials    master seed and number of independent trials
  m, n, s         problem dimensions and signal sparsity
  q               penalty exponent in (0, 1]
  noise           {pre_level, post_level} target noise-to-signal ratios
  ensemble_kind   gaussian | partial-circulant | partial-toeplitz
  entry_law       gaussian | rademacher
  magnitude_law   uniform | rademacher signal magnitudes
  alpha           penalty weight; omit to tune for the target support
  beta            quadratic penalty weight
  beta_grid       betas to sweep (vary-beta)
  m_grid          measurement counts to sweep (vary-m, timing)
  mu              step size; omit for the solver's safe default
  target_support  support size the tuner aims for
  target_err      error level used for calls-to-target aggregates
  iterations      fixed iteration budget (timing)
  full_scale      timing only: full-size grid n=5000, m up to 8000 (hours)
  stop_tol        successive-iterate stopping tolerance
  reference_tol   tolerance of the high-accuracy reference runs
  tail_fraction   trailing fraction for empirical rate fits

Environment: FOLDSOLVE_THREADS caps trial-level parallelism (default 1);
timing trials always run serially.""",
}

_HANDLERS = {
    "solve": (_cmd_solve, "run one solver on a problem instance"),
    "prox-table": (_cmd_prox_table, "sample thresholding curves to CSV"),
    "analyze": (_cmd_analyze, "empirical vs. theoretical contraction rate"),
    "experiment": (_cmd_experiment, "run a named benchmark experiment"),
    "rip": (_cmd_rip, "restricted isometry constant of a matrix"),
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="foldsolve",
        description="Multi-penalty sparse recovery under noise folding.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _HANDLERS.items():
        p = sub.add_parser(
            name, help=help_text, epilog=_CONFIG_DOCS[name],
            formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--output-dir", default=".",
                       help="directory for output files (default: current)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
        p.add_argument("--log-level", default="INFO",
                       choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    os.makedirs(args.output_dir, exist_ok=True)
    handler = _HANDLERS[args.command][0]
    try:
        handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: no partial outputs remain
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
