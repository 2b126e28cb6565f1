"""Command-line entry point: ``casimir-sp {stationary,evolve,stability,verify}``.

A run is described by one JSON document.  Every section is optional; missing
keys take the library defaults and unknown keys are rejected::

    {
      "domain": {"lengths": [3.141592653589793], "modes": [64], "mass": 0.0,
                 "grid_oversample": 2},
      "distribution": {"kind": "boltzmann", "beta": 1.0},
      "Lambda": 1.0,
      "solver": {"damping": 0.5, "max_outer": 500, "tol_poisson": 1e-10, ...},
      "evolution": {"dt": 0.001, "t_end": 1.0, "record_every": 10,
                    "renormalize_every": 0},
      "experiment": {"perturbation_sizes": [0.001, 0.003, 0.01],
                     "seeds": [0, 1, 2], "violation_tol": 1e-6},
      "initial_state": {"source": "perturbed", "epsilon": 0.01},
      "suites": ["casimir", "spectral", "state", "stationary", "evolution"],
      "output_dir": "runs/default",
      "seed": 0
    }

Exit codes: 0 success, 1 numerical failure, 2 configuration error.  This is
the only module that touches the file system.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .casimir import CasimirDistribution, distribution_from_dict
from .evolution import TRAJECTORY_COLUMNS, EvolutionConfig, EvolutionError, evolve
from .experiments import (
    STABILITY_COLUMNS,
    SUITES,
    ExperimentPlan,
    run_lemma_suite,
    run_stability,
)
from .spectral import DomainSpec, grid_coordinates, to_grid
from .state import density_grid, perturb, random_state, state_from_dict
from .stationary import (
    ConvergenceError,
    SolverConfig,
    duality_check,
    scf_solve,
    solution_to_dict,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "cmd_stationary",
    "cmd_evolve",
    "cmd_stability",
    "cmd_verify",
    "main",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

_TOP_KEYS = {"domain", "distribution", "Lambda", "solver", "evolution", "experiment",
             "initial_state", "suites", "output_dir", "seed", "threads"}
_EXPERIMENT_KEYS = {"perturbation_sizes", "seeds", "violation_tol"}
_INITIAL_KEYS = {"source", "epsilon", "path", "n_orbitals"}
_SOURCES = ("stationary", "perturbed", "random", "file")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending line when known."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    dist: CasimirDistribution
    Lambda: float
    solver: SolverConfig
    evolution: EvolutionConfig
    perturbation_sizes: tuple[float, ...]
    seeds: tuple[int, ...]
    violation_tol: float
    initial_state: dict
    suites: tuple[str, ...]
    output_dir: Path
    seed: int
    threads: int
    raw: dict = dataclasses.field(repr=False, compare=False)

    def plan(self, dist: CasimirDistribution | None = None) -> ExperimentPlan:
        return ExperimentPlan(
            domain=self.domain, dist=dist or self.dist, Lambda=self.Lambda,
            perturbation_sizes=self.perturbation_sizes, evolution=self.evolution,
            seeds=self.seeds, solver=self.solver, violation_tol=self.violation_tol,
            threads=self.threads)

    def config_hash(self) -> str:
        """SHA-256 of the canonical config, excluding output location and thread count."""
        body = {k: v for k, v in self.raw.items() if k not in ("output_dir", "threads")}
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    for i, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return f"line {i}: "
    return ""


def _reject_unknown(section: dict, allowed, where: str, text):
    if not isinstance(section, dict):
        raise ConfigError(f"{_line_of(text, where)}section '{where}' must be an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{_line_of(text, key)}unknown key '{key}' in {where}")


def _dataclass_section(cls, data: dict, where: str, text, fixed=None):
    allowed = {f.name for f in dataclasses.fields(cls) if f.init} - set(fixed or {})
    _reject_unknown(data, allowed, where, text)
    kwargs = dict(data)
    if "sigma_bracket" in kwargs:
        kwargs["sigma_bracket"] = tuple(kwargs["sigma_bracket"])
    kwargs.update(fixed or {})
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{_line_of(text, where)}{where}: {exc}") from exc


def parse_config(data: dict, text: str | None = None, seed: int | None = None,
                 output: str | None = None, threads: int | None = None,
                 suites=None) -> RunConfig:
    """Validate a config dictionary; command-line overrides win over file values."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "config", text)
    data = json.loads(json.dumps(data))  # private deep copy
    if seed is not None:
        data["seed"] = seed
    if output is not None:
        data["output_dir"] = output
    if threads is not None:
        data["threads"] = threads
    if suites is not None:
        data["suites"] = list(suites)

    dom = data.setdefault("domain", {"lengths": [float(np.pi)], "modes": [64]})
    _reject_unknown(dom, {"lengths", "modes", "mass", "grid_oversample"}, "domain", text)
    try:
        domain = DomainSpec.from_dict(dom)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{_line_of(text, 'domain')}domain: {exc}") from exc

    try:
        dist = distribution_from_dict(data.setdefault("distribution", {"kind": "boltzmann", "beta": 1.0}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{_line_of(text, 'distribution')}distribution: {exc}") from exc

    Lambda = data.setdefault("Lambda", 1.0)
    if not isinstance(Lambda, (int, float)) or not Lambda > 0:
        raise ConfigError(f"{_line_of(text, 'Lambda')}Lambda must be a positive number")
    solver = _dataclass_section(SolverConfig, data.setdefault("solver", {}), "solver", text,
                                fixed={"Lambda": float(Lambda)})
    evo = _dataclass_section(EvolutionConfig, data.setdefault("evolution", {}), "evolution", text)

    exp = data.setdefault("experiment", {})
    _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment", text)
    sizes = tuple(exp.get("perturbation_sizes", (1e-3, 3e-3, 1e-2)))
    seeds = tuple(exp.get("seeds", (0, 1, 2)))
    violation_tol = exp.get("violation_tol", 1e-6)

    init = data.setdefault("initial_state", {"source": "perturbed", "epsilon": 1e-2})
    _reject_unknown(init, _INITIAL_KEYS, "initial_state", text)
    if init.get("source", "perturbed") not in _SOURCES:
        raise ConfigError(f"{_line_of(text, 'source')}initial_state.source must be one of {_SOURCES}")
    if init.get("source") == "file" and "path" not in init:
        raise ConfigError(f"{_line_of(text, 'initial_state')}initial_state.path is required for source 'file'")

    names = tuple(data.setdefault("suites", list(SUITES)))
    bad = set(names) - set(SUITES)
    if bad:
        raise ConfigError(f"{_line_of(text, 'suites')}unknown suites {sorted(bad)}")

    seed_value = data.setdefault("seed", 0)
    if not isinstance(seed_value, int) or isinstance(seed_value, bool):
        raise ConfigError(f"{_line_of(text, 'seed')}seed must be an integer")
    n_threads = data.get("threads") or os.cpu_count() or 1
    out = Path(data.setdefault("output_dir", "runs/default"))

    cfg = RunConfig(domain, dist, float(Lambda), solver, evo, sizes, seeds, violation_tol,
                    init, names, out, int(seed_value), int(n_threads), data)
    try:
        cfg.plan()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{_line_of(text, 'experiment')}experiment: {exc}") from exc
    return cfg


def load_config(path: str | None, **overrides) -> RunConfig:
    """Read and validate a JSON config file (``None`` means all defaults)."""
    if path is None:
        return parse_config({}, None, **overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, text, **overrides)


# --------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _write_manifest(cfg: RunConfig, command: str, seeds) -> None:
    import scipy

    _write_json(cfg.output_dir / "manifest.json", {
        "command": command,
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seeds": list(seeds),
        "config": cfg.raw,
    })


def _prepare(cfg: RunConfig, command: str, seeds) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(cfg, command, seeds)


# --------------------------------------------------------------------------
# commands


def cmd_stationary(cfg: RunConfig) -> int:
    """Solve for the stationary state and write solution, convergence log and profiles."""
    _prepare(cfg, "stationary", [cfg.seed])
    out = cfg.output_dir
    conv_cols = ("iteration", "phi", "residual_poisson", "residual_constraint", "sigma", "damping")
    try:
        sol = scf_solve(cfg.domain, cfg.dist, cfg.solver)
    except ConvergenceError as exc:
        _write_csv(out / "convergence.csv", conv_cols,
                   ([r[c] for c in conv_cols] for r in exc.history))
        last = exc.history[-1] if exc.history else {}
        print(f"error: {exc}", file=sys.stderr)
        for r in exc.history[-5:]:
            print(f"  sweep {r['iteration']}: residual_poisson={r['residual_poisson']:.3e} "
                  f"residual_constraint={r['residual_constraint']:.3e}", file=sys.stderr)
        log.debug("last row %s", last)
        return EXIT_NUMERIC
    _write_csv(out / "convergence.csv", conv_cols,
               ([r[c] for c in conv_cols] for r in sol.history))
    gap = duality_check(sol, cfg.dist, cfg.Lambda)
    data = solution_to_dict(sol)
    data["duality_gap"] = gap
    data["distribution"] = cfg.dist.to_dict()
    data["Lambda"] = cfg.Lambda
    _write_json(out / "solution.json", data)

    axes = ("x", "y", "z")[: cfg.domain.dim]
    mesh = np.meshgrid(*grid_coordinates(cfg.domain), indexing="ij")
    V = np.real(to_grid(sol.V0)).ravel()
    n = density_grid(sol.state).ravel()
    with open(out / "profiles.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*axes, "V0", "n0"])
        for i in range(V.size):
            w.writerow([f"{v:.17g}" for v in (*(m.ravel()[i] for m in mesh), V[i], n[i])])
    print(f"converged in {sol.iterations} sweeps: sigma0={sol.sigma0!r} phi={sol.phi!r} "
          f"duality_gap={gap:.3e}")
    return EXIT_OK


def _initial_state(cfg: RunConfig):
    init = cfg.initial_state
    source = init.get("source", "perturbed")
    if source == "file":
        data = json.loads(Path(init["path"]).read_text())
        return state_from_dict(data), None
    if source == "random":
        rng = np.random.default_rng(cfg.seed)
        return random_state(cfg.domain, int(init.get("n_orbitals", 8)), rng, cfg.Lambda), None
    sol = scf_solve(cfg.domain, cfg.dist, cfg.solver)
    if source == "stationary":
        return sol.state, sol
    return perturb(sol.state, float(init.get("epsilon", 1e-2)), cfg.seed), sol


def cmd_evolve(cfg: RunConfig) -> int:
    """Evolve the configured initial state and write ``trajectory.csv``."""
    _prepare(cfg, "evolve", [cfg.seed])
    try:
        state, reference = _initial_state(cfg)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot load initial state: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = cfg.output_dir / "trajectory.csv"
    try:
        with np.errstate(all="ignore"):
            _, rec = evolve(state, cfg.evolution, reference=reference, dist=cfg.dist)
    except EvolutionError as exc:
        _write_csv(path, TRAJECTORY_COLUMNS, exc.record.rows())
        print(f"error: {exc}; last good time t={exc.last_time!r}", file=sys.stderr)
        return EXIT_NUMERIC
    _write_csv(path, TRAJECTORY_COLUMNS, rec.rows())
    drift = abs(rec.energy[-1] - rec.energy[0]) / max(abs(rec.energy[0]), 1e-300)
    print(f"{len(rec)} records to t={rec.times[-1]!r}; relative energy drift {drift:.3e}")
    return EXIT_OK


def cmd_stability(cfg: RunConfig) -> int:
    """Run the stability campaign; write ``stability.csv`` and ``summary.json``."""
    plan = cfg.plan()
    _prepare(cfg, "stability", plan.seeds)
    try:
        report = run_stability(plan)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write_csv(cfg.output_dir / "stability.csv", (*STABILITY_COLUMNS, "status"),
               ((*r.csv_values(), r.status) for r in report.rows))
    _write_json(cfg.output_dir / "summary.json", report.to_dict())
    n_bad = sum(not r.passed for r in report.rows)
    print(f"{len(report.rows)} cells, {n_bad} failed; gap ~ eps^{report.scaling_exponent:.4f}")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_verify(cfg: RunConfig, dist: CasimirDistribution | None = None) -> int:
    """Run the property suites and write ``verdict.json``.

    ``dist`` replaces the configured distribution (used to inject a function
    outside the admissible class as a negative control).
    """
    plan = cfg.plan(dist)
    _prepare(cfg, "verify", plan.seeds)
    report = run_lemma_suite(plan, cfg.suites)
    _write_json(cfg.output_dir / "verdict.json", report.to_dict())
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag} [{c.suite}] {c.name} ({c.count} cases, worst margin {c.worst_margin:.3e}) {c.detail}".rstrip())
    return EXIT_OK if report.passed else EXIT_NUMERIC


_COMMANDS = {
    "stationary": cmd_stationary,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="casimir-sp", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--output", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            sp.add_argument("--suites", help="comma-separated subset of " + ",".join(SUITES))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    suites = None
    if getattr(args, "suites", None):
        suites = [s.strip() for s in args.suites.split(",") if s.strip()]
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.output,
                          threads=args.threads, suites=suites)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
