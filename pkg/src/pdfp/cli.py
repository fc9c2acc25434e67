"""Command-line front end.

Usage::

    pdfp solve    run.cfg
    pdfp compare  run.cfg
    pdfp sweep    run.cfg
    pdfp validate run.cfg

Config files are flat ``section.key = value`` lines; ``#`` starts a comment.
Sections: ``problem``, ``solver`` (``compare`` also reads every
``solver_<label>`` section), ``output`` and ``sweep``.  ``PDFP_OUTPUT_DIR``
overrides ``output.directory``.

Exit codes: 0 success, 1 config or step-size error, 2 non-convergence or
runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import emit_history_csv
from .problems import (FusedLassoSpec, TvRestorationSpec, build_fused_lasso,
                       build_tv_restoration, kkt_residual, read_pgm, synthesize_fused_lasso,
                       synthesize_tv_restoration, write_pgm, write_vector_csv)
from .prox import SmoothFn
from .solvers import (ALGORITHMS, ProblemSpec, SolverConfig, StepSizeError, solve, step_bounds,
                      validate_config)

OUTPUT_ENV = "PDFP_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_FUSED_KEYS = {"r": int, "n": int, "mu1": float, "mu2": float, "noise_sigma": float,
               "sparsity": int, "block_length": int}
_TV_KEYS = {"height": int, "width": int, "kernel": str, "kernel_size": int,
            "kernel_sigma": float, "mu": float, "noise_sigma": float, "nonneg": "bool",
            "tile": int, "image": str}
_COMMON_PROBLEM_KEYS = {"type": str, "seed": int, "f1": str}
_SOLVER_KEYS = {"algorithm": str, "gamma": "auto", "lambda": "auto", "max_iter": int,
                "fp_tol": float, "record_every": int}
_OUTPUT_KEYS = {"directory": str, "emit_history": "bool", "emit_solution": "bool",
                "timing": "bool"}
_SWEEP_KEYS = {"gamma": "list", "lambda": "list", "gamma_scale": "list",
               "lambda_scale": "list", "workers": int}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: dict
    solvers: dict  # label -> dict of solver keys (raw strings resolved later)
    output: dict
    sweep: dict = field(default_factory=dict)
    source: Optional[Path] = None


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _convert(kind, raw: str, where: str):
    try:
        if kind == "bool":
            return _parse_bool(raw)
        if kind == "auto":
            return "auto" if raw.strip().lower() == "auto" else float(raw)
        if kind == "list":
            return [x.strip() for x in raw.split(",") if x.strip()]
        return kind(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}: {exc}") from None


def parse_config_text(text: str, source: Optional[Path] = None) -> RunConfig:
    raw: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} has no section")
        section, name = key.rsplit(".", 1)
        if name in raw.setdefault(section, {}):
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[section][name] = value

    problem_raw = raw.pop("problem", {})
    ptype = problem_raw.get("type", "fused_lasso")
    allowed = dict(_COMMON_PROBLEM_KEYS)
    if ptype == "fused_lasso":
        allowed.update(_FUSED_KEYS)
    elif ptype == "tv_restoration":
        allowed.update(_TV_KEYS)
    else:
        raise ConfigError(f"problem.type must be fused_lasso or tv_restoration, got {ptype!r}")
    problem = _typed(problem_raw, allowed, "problem")

    solvers = {}
    for sec in [s for s in raw if s == "solver" or s.startswith("solver_")]:
        label = "default" if sec == "solver" else sec[len("solver_"):]
        solvers[label] = _typed(raw.pop(sec), _SOLVER_KEYS, sec)
    output = _typed(raw.pop("output", {}), _OUTPUT_KEYS, "output")
    sweep = _typed(raw.pop("sweep", {}), _SWEEP_KEYS, "sweep")
    if raw:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(raw))}")
    if not solvers:
        raise ConfigError("config has no [solver] section")
    for label, s in solvers.items():
        alg = s.get("algorithm", "pdfp")
        if alg not in ALGORITHMS:
            raise ConfigError(f"solver {label}: unknown algorithm {alg!r}")
    return RunConfig(problem, solvers, output, sweep, source)


def _typed(raw: dict, allowed: dict, section: str) -> dict:
    unknown = set(raw) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")
    return {k: _convert(allowed[k], v, f"{section}.{k}") for k, v in raw.items()}


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, path)


# ------------------------------------------------------------------ building


@dataclass
class BuiltProblem:
    problem: ProblemSpec
    x_true: Optional[np.ndarray]
    shape: Optional[tuple[int, int]] = None


def build_problem(cfg: RunConfig) -> BuiltProblem:
    p = dict(cfg.problem)
    ptype = p.pop("type", "fused_lasso")
    smooth = p.pop("f1", "least_squares")
    if smooth not in ("least_squares", "zero"):
        raise ConfigError(f"problem.f1 must be least_squares or zero, got {smooth!r}")
    try:
        if ptype == "fused_lasso":
            spec = FusedLassoSpec(**p)
            A, a, x_true = synthesize_fused_lasso(spec)
            problem = build_fused_lasso(A, a, spec.mu1, spec.mu2)
            shape = None
        else:
            image_path = p.pop("image", None)
            spec = TvRestorationSpec(**p)
            image = None
            if image_path is not None:
                ip = Path(image_path)
                if not ip.is_absolute() and cfg.source is not None:
                    ip = cfg.source.parent / ip
                image = read_pgm(ip)
            A, a, x_true = synthesize_tv_restoration(spec, image)
            shape = (spec.height, spec.width)
            problem = build_tv_restoration(A, a, spec.mu, spec.nonneg, *shape)
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    if smooth == "zero":
        problem = ProblemSpec(SmoothFn.zero(), problem.f2, problem.B, problem.f3)
    return BuiltProblem(problem, x_true, shape)


def auto_steps(problem: ProblemSpec, algorithm: str) -> tuple[float, float]:
    """Default ``(gamma, lambda)`` near the edge of each scheme's admissible region."""
    L = problem.opnorm.value
    beta = problem.beta
    inv = 1.0 if L == 0 else 1.0 / L
    if algorithm == "condat":
        gamma = 1.0 if math.isinf(beta) else beta
        lam = (0.99 if math.isinf(beta) else 0.49) * inv
        return gamma, lam
    gamma = 1.0 if math.isinf(beta) else 1.99 * beta
    if algorithm == "pdfp":
        return gamma, 0.99 * inv
    if algorithm == "pdfp2o":
        return gamma, inv
    return gamma, 1.0 / (L + 1.0)


def resolve_solver(problem: ProblemSpec, raw: dict) -> SolverConfig:
    alg = raw.get("algorithm", "pdfp")
    g_auto, l_auto = auto_steps(problem, alg)
    gamma = raw.get("gamma", "auto")
    lam = raw.get("lambda", "auto")
    try:
        return SolverConfig(
            algorithm=alg,
            gamma=g_auto if gamma == "auto" else gamma,
            lam=l_auto if lam == "auto" else lam,
            max_iter=raw.get("max_iter", 1000),
            fp_tol=raw.get("fp_tol", 1e-8),
            record_every=raw.get("record_every", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def output_dir(cfg: RunConfig) -> Path:
    d = os.environ.get(OUTPUT_ENV) or cfg.output.get("directory", "out")
    d = Path(d)
    if not d.is_absolute() and cfg.source is not None and OUTPUT_ENV not in os.environ:
        d = cfg.source.parent / d
    d.mkdir(parents=True, exist_ok=True)
    return d


def effective_config_text(cfg: RunConfig, resolved: dict) -> str:
    """Echo of the config with every "auto" replaced by its resolved value."""
    lines = [f"problem.{k} = {_fmt(v)}" for k, v in cfg.problem.items()]
    for label, sc in resolved.items():
        sec = "solver" if label == "default" else f"solver_{label}"
        lines += [f"{sec}.algorithm = {sc.algorithm}", f"{sec}.gamma = {sc.gamma!r}",
                  f"{sec}.lambda = {sc.lam!r}", f"{sec}.max_iter = {sc.max_iter}",
                  f"{sec}.fp_tol = {sc.fp_tol!r}", f"{sec}.record_every = {sc.record_every}"]
    lines += [f"output.{k} = {_fmt(v)}" for k, v in cfg.output.items()]
    lines += [f"sweep.{k} = {_fmt(v)}" for k, v in cfg.sweep.items()]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(v)
    return str(v)


def _write_solution(out: Path, built: BuiltProblem, x: np.ndarray, name: str = "solution") -> None:
    cols = {"x": x}
    if built.x_true is not None:
        cols["x_true"] = built.x_true
    write_vector_csv(out / f"{name}.csv", cols)
    if built.shape is not None:
        write_pgm(out / f"{name}.pgm", x.reshape(built.shape))


def _err(msg: str) -> None:
    print(f"pdfp: {msg}", file=sys.stderr)


# ------------------------------------------------------------------ commands


def run_solve(path) -> int:
    try:
        cfg = load_config(path)
        built = build_problem(cfg)
        if len(cfg.solvers) != 1:
            raise ConfigError("solve expects exactly one solver section")
        (label, raw), = cfg.solvers.items()
        sc = resolve_solver(built.problem, raw)
        validate_config(built.problem, sc)
        out = output_dir(cfg)
    except (ConfigError, StepSizeError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        timing = cfg.output.get("timing", True)
        state, hist = solve(built.problem, sc, validate=False, timing=timing)
        if cfg.output.get("emit_history", True):
            emit_history_csv(hist, out / "history.csv")
        if cfg.output.get("emit_solution", True):
            _write_solution(out, built, state.x)
        (out / "effective.cfg").write_text(effective_config_text(cfg, {label: sc}))
    except (OSError, ValueError, FloatingPointError) as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    last = hist.records[-1]
    print(f"{sc.algorithm}: {'converged' if hist.converged else 'max_iter reached'} after "
          f"{hist.iterations} iterations, objective {last.objective:.10g}, "
          f"fp residual {last.fp_residual_lambda:.3g}")
    if not hist.converged:
        _err(f"fp residual {hist.fp_residual:.3g} above fp_tol {sc.fp_tol:g} "
             f"after {hist.iterations} iterations")
        return EXIT_RUNTIME
    return EXIT_OK


COMPARE_HEADER = ("label", "algorithm", "gamma", "lambda", "iterations", "converged",
                  "final_objective", "final_fp_residual", "wall_time_ms")


def run_compare(path) -> int:
    try:
        cfg = load_config(path)
        if len(cfg.solvers) < 2:
            raise ConfigError("compare needs at least two solver sections")
        built = build_problem(cfg)
        resolved = {}
        for label, raw in cfg.solvers.items():
            sc = resolve_solver(built.problem, raw)
            try:
                validate_config(built.problem, sc)
            except StepSizeError as exc:
                raise ConfigError(f"solver {label}: {exc}") from None
            resolved[label] = sc
        out = output_dir(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    timing = cfg.output.get("timing", True)
    rows = []
    ok = True
    try:
        for label, sc in resolved.items():
            t0 = time.perf_counter()
            state, hist = solve(built.problem, sc, validate=False, timing=timing)
            wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
            ok &= hist.converged
            if cfg.output.get("emit_history", True):
                emit_history_csv(hist, out / f"history_{label}.csv")
            if cfg.output.get("emit_solution", True):
                _write_solution(out, built, state.x, f"solution_{label}")
            rows.append([label, sc.algorithm, repr(sc.gamma), repr(sc.lam), hist.iterations,
                         str(hist.converged).lower(), repr(hist.records[-1].objective),
                         repr(hist.fp_residual), repr(wall)])
            print(f"{label} ({sc.algorithm}): {hist.iterations} iterations, objective "
                  f"{hist.records[-1].objective:.12g}, "
                  f"{'converged' if hist.converged else 'NOT converged'}")
        with open(out / "compare.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COMPARE_HEADER)
            w.writerows(rows)
        (out / "effective.cfg").write_text(effective_config_text(cfg, resolved))
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    if not ok:
        _err("at least one solver did not reach fp_tol")
        return EXIT_RUNTIME
    return EXIT_OK


SWEEP_HEADER = ("index", "gamma", "lambda", "status", "iters_to_tol", "final_objective",
                "message")


def _sweep_values(sweep: dict, key: str, scale_key: str, unit: float, auto: float):
    if key in sweep and scale_key in sweep:
        raise ConfigError(f"give sweep.{key} or sweep.{scale_key}, not both")
    if key in sweep:
        vals = sweep[key]
        return [auto if v == "auto" else float(v) for v in vals]
    if scale_key in sweep:
        return [float(v) * unit for v in sweep[scale_key]]
    return [auto]


def run_sweep(path) -> int:
    try:
        cfg = load_config(path)
        if len(cfg.solvers) != 1:
            raise ConfigError("sweep expects exactly one solver section")
        built = build_problem(cfg)
        (label, raw), = cfg.solvers.items()
        base = resolve_solver(built.problem, raw)
        problem = built.problem
        L = problem.opnorm.value
        beta_unit = 1.0 if math.isinf(problem.beta) else problem.beta
        gammas = _sweep_values(cfg.sweep, "gamma", "gamma_scale", beta_unit, base.gamma)
        lams = _sweep_values(cfg.sweep, "lambda", "lambda_scale",
                             1.0 if L == 0 else 1.0 / L, base.lam)
        out = output_dir(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    grid = [(g, l) for g in gammas for l in lams]

    def cell(item):
        i, (g, l) = item
        try:
            sc = SolverConfig(base.algorithm, g, l, base.max_iter, base.fp_tol,
                              base.max_iter)
            validate_config(problem, sc)
        except (StepSizeError, ValueError) as exc:
            return [i, repr(g), repr(l), "invalid", "", "", str(exc)]
        try:
            state, hist = solve(problem, sc, validate=False, kkt=False, timing=False)
        except (ValueError, FloatingPointError) as exc:
            return [i, repr(g), repr(l), "error", "", "", str(exc)]
        status = "ok" if hist.converged else "not_converged"
        iters = hist.iterations if hist.converged else ""
        return [i, repr(g), repr(l), status, iters, repr(hist.records[-1].objective), ""]

    workers = max(1, cfg.sweep.get("workers", 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(cell, enumerate(grid)))
    rows.sort(key=lambda r: r[0])
    try:
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_HEADER)
            w.writerows(rows)
        (out / "effective.cfg").write_text(effective_config_text(cfg, {label: base}))
    except OSError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    n_ok = sum(r[3] == "ok" for r in rows)
    print(f"sweep: {len(rows)} cells, {n_ok} converged, "
          f"{sum(r[3] == 'invalid' for r in rows)} invalid")
    return EXIT_OK


def _range(hi: float) -> str:
    return "(0, ∞)" if math.isinf(hi) else f"(0, {hi:.10g})"


def run_validate(path) -> int:
    try:
        cfg = load_config(path)
        built = build_problem(cfg)
        problem = built.problem
        resolved = {label: resolve_solver(problem, raw) for label, raw in cfg.solvers.items()}
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    est = problem.opnorm
    beta = problem.beta
    L = est.value
    print(f"beta (1/Lipschitz of grad f1): {'∞' if math.isinf(beta) else f'{beta:.10g}'}")
    print(f"lambda_max(BB^T) estimate: {L:.10g} (power iterations: {est.iterations_used}, "
          f"converged: {str(est.converged).lower()})")
    if not est.converged:
        print("warning: power method hit its iteration budget; the estimate may sit "
              "slightly below the true lambda_max")
    print(f"gamma range (0 < gamma < 2 beta): {_range(2.0 * beta)}")
    for alg in ALGORITHMS:
        b = step_bounds(problem, alg, est)
        if alg == "pdfp":
            print(f"  pdfp:    0 < lambda < 1/lambda_max(BB^T) = {b.lam_max:.10g} (strict; "
                  f"auto lambda = 0.99/lambda_max(BB^T) = {0.99 * b.lam_max:.10g})")
        elif alg == "pdfp2o":
            print(f"  pdfp2o:  0 < lambda <= 1/lambda_max(BB^T) = {b.lam_max:.10g} (f3 = 0 only)")
        elif alg == "pdfp2oc":
            print(f"  pdfp2oc: 0 < lambda <= 1/(lambda_max(BB^T) + 1) = {b.lam_max:.10g}")
        else:
            print("  condat:  sigma*tau*lambda_max(BB^T) + tau/(2 beta) <= 1, "
                  "sigma = lambda/gamma, tau = gamma")

    status = EXIT_OK
    for label, sc in resolved.items():
        name = "solver" if label == "default" else f"solver_{label}"
        line = f"{name}: {sc.algorithm} gamma={sc.gamma:.10g} lambda={sc.lam:.10g}"
        if sc.algorithm == "condat":
            line += f" (sigma=lambda/gamma={sc.sigma:.10g}, tau=gamma={sc.tau:.10g})"
        try:
            validate_config(problem, sc, est)
            print(line + " -> admissible")
        except StepSizeError as exc:
            print(line + " -> REJECTED")
            _err(str(exc))
            status = EXIT_CONFIG
    return status


COMMANDS = {"solve": run_solve, "compare": run_compare, "sweep": run_sweep,
            "validate": run_validate}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pdfp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__name__.replace("run_", "") + " from a config file")
        sp.add_argument("config", help="path to a section.key = value config file")
    args = parser.parse_args(argv)
    return COMMANDS[args.command](args.config)


if __name__ == "__main__":
    sys.exit(main())
