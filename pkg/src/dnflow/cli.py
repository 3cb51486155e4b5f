"""Batch front end: ``dnflow <evolve|eigen|oracle|verify|sweep> --config FILE``.

Plain-text configs hold ``key = value`` lines with ``#`` comments.  Exit
codes: 0 success, 1 config error, 2 solver non-convergence, 3 invariant
violation, 4 I/O error.  Identical config + seed produces byte-identical
CSV output.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .domain import Domain, build_interval, build_rectangle, load_mask, lp_norm
from .elliptic import SolverConfig
from .errors import ConfigError, NonConvergenceError
from .flow import (
    auto_tau,
    evolve,
    evolve_until_settled,
    read_snapshot,
    rescaled_profile,
    write_snapshot,
)
from .operators import BoundaryRegime, EnergyParams, validate_regime
from .oracle import minimize_rayleigh
from .verify import run_invariant_suite

__all__ = ["RunConfig", "parse_config", "main"]

_REGIME_KINDS = ("dirichlet", "robin", "neumann", "fractional")
_INIT_KINDS = ("constant_one", "extremal", "random", "file")


@dataclass
class RunConfig:
    """Validated run description; field names mirror the config keys."""

    domain_kind: str = "interval"
    domain_n: int = 0
    domain_ny: int = 0
    domain_lx: float = 1.0
    domain_ly: float = 1.0
    domain_mask: str = ""
    p: float = 0.0
    regime_kind: str = ""
    regime_beta: float = 1.0
    regime_s: float = 0.5
    tau: float | None = None  # None means auto
    steps: int = 200
    grad_tol: float = 1e-9
    epsilon: float = 1e-6
    seed: int = 0
    init_kind: str = "constant_one"
    init_path: str = ""
    out_dir: str = "."


_KEYS = {
    "domain.kind": ("domain_kind", str),
    "domain.n": ("domain_n", int),
    "domain.ny": ("domain_ny", int),
    "domain.lx": ("domain_lx", float),
    "domain.ly": ("domain_ly", float),
    "domain.mask": ("domain_mask", str),
    "p": ("p", float),
    "regime.kind": ("regime_kind", str),
    "regime.beta": ("regime_beta", float),
    "regime.s": ("regime_s", float),
    "tau": ("tau", float),
    "steps": ("steps", int),
    "grad_tol": ("grad_tol", float),
    "epsilon": ("epsilon", float),
    "seed": ("seed", int),
    "init.kind": ("init_kind", str),
    "init.path": ("init_path", str),
    "out.dir": ("out_dir", str),
}

_REQUIRED = ("domain.kind", "p", "regime.kind")


def parse_config(text: str) -> RunConfig:
    """Parse and validate ``key = value`` lines into a RunConfig."""
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, typ = _KEYS[key]
        if key == "tau" and val == "auto":
            cfg.tau = None
            seen.add(key)
            continue
        try:
            setattr(cfg, attr, typ(val))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
        seen.add(key)
    missing = [k for k in _REQUIRED if k not in seen]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    if cfg.domain_kind == "masked":
        if not cfg.domain_mask:
            raise ConfigError("masked domain needs domain.mask = <path>")
    elif cfg.domain_n <= 0 and "domain.n" not in seen:
        raise ConfigError("missing required keys: domain.n")
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.domain_kind not in ("interval", "rectangle", "masked"):
        raise ConfigError(f"unknown domain.kind {cfg.domain_kind!r}")
    if cfg.regime_kind not in _REGIME_KINDS:
        raise ConfigError(f"unknown regime.kind {cfg.regime_kind!r}")
    if cfg.init_kind not in _INIT_KINDS:
        raise ConfigError(f"unknown init.kind {cfg.init_kind!r}")
    if not cfg.p > 1.0:
        raise ConfigError(f"p must exceed 1, got {cfg.p}")
    if cfg.epsilon == 0.0 and cfg.p < 2.0:
        raise ConfigError("epsilon = 0 requires p >= 2")
    if cfg.epsilon < 0 or cfg.grad_tol <= 0:
        raise ConfigError("epsilon must be >= 0 and grad_tol > 0")
    if cfg.steps < 1:
        raise ConfigError(f"steps must be >= 1, got {cfg.steps}")
    if cfg.tau is not None and cfg.tau <= 0:
        raise ConfigError(f"tau must be positive, got {cfg.tau}")
    if cfg.regime_kind == "robin":
        if cfg.domain_kind == "masked":
            raise ConfigError("robin regime is not offered on masked domains")
        if not cfg.regime_beta > 0:
            raise ConfigError(f"regime.beta must be positive, got {cfg.regime_beta}")
    if cfg.regime_kind == "fractional":
        if cfg.domain_kind != "interval":
            raise ConfigError("fractional regime is only offered on intervals")
        if not 0.0 < cfg.regime_s < 1.0:
            raise ConfigError(f"regime.s must lie in (0,1), got {cfg.regime_s}")
    if cfg.init_kind == "file" and not cfg.init_path:
        raise ConfigError("init.kind = file needs init.path")


def _build(cfg: RunConfig):
    """(domain, params, regime, solver config) from a validated RunConfig."""
    if cfg.domain_kind == "interval":
        dom = build_interval(cfg.domain_n)
    elif cfg.domain_kind == "rectangle":
        ny = cfg.domain_ny if cfg.domain_ny > 0 else cfg.domain_n
        dom = build_rectangle(cfg.domain_n, ny, cfg.domain_lx, cfg.domain_ly)
    else:
        dom = load_mask(cfg.domain_mask)
    params = EnergyParams(cfg.p, cfg.epsilon)
    if cfg.regime_kind == "robin":
        regime = BoundaryRegime.robin(cfg.regime_beta)
    elif cfg.regime_kind == "fractional":
        regime = BoundaryRegime.fractional(cfg.regime_s)
    else:
        regime = BoundaryRegime(cfg.regime_kind)
    validate_regime(dom, regime)
    solver = SolverConfig(grad_tol=cfg.grad_tol)
    return dom, params, regime, solver


def _initial_field(cfg: RunConfig, dom: Domain, params, regime, solver) -> np.ndarray:
    if cfg.init_kind == "constant_one":
        return np.ones(dom.n_nodes)
    if cfg.init_kind == "random":
        return np.random.default_rng(cfg.seed).standard_normal(dom.n_nodes)
    if cfg.init_kind == "extremal":
        return minimize_rayleigh(dom, params, regime, solver, seed=cfg.seed).extremal
    _, values = read_snapshot(cfg.init_path)
    return dom.check_field(values)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evolve(cfg: RunConfig, snapshot_steps=()) -> int:
    dom, params, regime, solver = _build(cfg)
    g = _initial_field(cfg, dom, params, regime, solver)
    tau = cfg.tau if cfg.tau is not None else auto_tau(dom, g, params, regime, solver)
    traj = evolve(dom, g, tau, cfg.steps, params, regime, solver)
    diag.fill_dual_columns(dom, traj, solver)
    out = _out_dir(cfg)
    (out / "diagnostics.csv").write_text(diag.rows_to_csv(traj.diagnostics))
    for k in snapshot_steps:
        if not 0 <= k <= traj.steps:
            raise ConfigError(f"snapshot step {k} outside [0, {traj.steps}]")
        write_snapshot(out / f"snapshot_{k:06d}.txt", dom, params, regime,
                       traj.states[k], k, tau)
    return 0


def _eigen_numbers(cfg: RunConfig):
    dom, params, regime, solver = _build(cfg)
    g = _initial_field(cfg, dom, params, regime, solver)
    traj = evolve_until_settled(dom, g, params, regime, solver, tau=cfg.tau,
                                max_steps=cfg.steps)
    k = traj.steps
    lam = traj.diagnostics[k].lambda_decay
    mu = diag.dual_quotient(dom, traj.states[k],
                            params.with_epsilon(traj.eps_used[k]), regime, solver)
    prof = rescaled_profile(traj, k)
    ref = minimize_rayleigh(dom, params, regime, solver, seed=cfg.seed)
    if prof is None:
        gap = float("nan")
    else:
        gap = min(lp_norm(dom, prof - ref.extremal, params.p),
                  lp_norm(dom, prof + ref.extremal, params.p))
    return lam, mu, gap, k


def cmd_eigen(cfg: RunConfig) -> int:
    lam, mu, gap, _ = _eigen_numbers(cfg)
    print(f"{lam!r} {mu!r} {gap!r}")
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    dom, params, regime, solver = _build(cfg)
    result = minimize_rayleigh(dom, params, regime, solver, seed=cfg.seed)
    out = _out_dir(cfg)
    write_snapshot(out / "extremal.txt", dom, params, regime,
                   result.extremal, 0, 0.0 if cfg.tau is None else cfg.tau)
    print(result.summary())
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    dom, params, regime, solver = _build(cfg)
    rows = run_invariant_suite(dom, params, regime, solver, seed=cfg.seed)
    for row in rows:
        print(row.line())
    return 0 if all(ok for *_x, ok in rows) else 3


def _sweep_one(args):
    cfg_dict, key, value = args
    cfg = RunConfig(**cfg_dict)
    attr, typ = _KEYS[key]
    setattr(cfg, attr, typ(value) if typ is not float else float(value))
    if typ is int:
        setattr(cfg, attr, int(value))
    _validate(cfg)
    lam, mu, gap, steps = _eigen_numbers(cfg)
    return value, lam, mu, gap, steps


def cmd_sweep(cfg: RunConfig, param: str, values, jobs: int | None) -> int:
    if param not in _KEYS:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    if jobs is None:
        jobs = os.cpu_count() or 1  # default: available parallelism
    work = [(cfg.__dict__.copy(), param, v) for v in values]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, work))
    else:
        results = [_sweep_one(w) for w in work]
    out = _out_dir(cfg)
    lines = ["param,value,lambda,mu,profile_gap,steps"]
    for value, lam, mu, gap, steps in results:
        lines.append(f"{param},{value!r},{lam!r},{mu!r},{gap!r},{steps}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors (exit 1)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dnflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("evolve", "eigen", "oracle", "verify", "sweep"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--out", default=None)
        if name == "evolve":
            cmd.add_argument("--snapshots", default="",
                             help="comma-separated step indices to dump")
        if name == "sweep":
            cmd.add_argument("--param", required=True)
            cmd.add_argument("--values", required=True)
            cmd.add_argument("--jobs", type=int, default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"dnflow: cannot read config: {exc}", file=sys.stderr)
            return 4
        cfg = parse_config(text)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.command == "evolve":
            snaps = [int(s) for s in args.snapshots.split(",") if s.strip()]
            return cmd_evolve(cfg, snaps)
        if args.command == "eigen":
            return cmd_eigen(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("sweep needs at least one value")
        for v in values:
            float(v)  # all sweep values must parse as numbers
        return cmd_sweep(cfg, args.param, values, args.jobs)
    except ConfigError as exc:
        print(f"dnflow: config error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"dnflow: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dnflow: i/o error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"dnflow: config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
