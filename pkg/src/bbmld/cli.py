"""Command-line front end for reproducible estimation campaigns.

Subcommands: rate, table, simulate, expect, estimate, validate.  Options may
come from flags or from a flat key=value config file (flags win).  Every
resolved value, defaults included, is echoed into the JSON reports so a
campaign can be re-run bitwise-identically from its own report.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import validate as validate_mod
from .engine import (
    DEFAULT_MAX_PARTICLES,
    Ball,
    MovingBallSpec,
    SimConfig,
    expected_local_mass,
    local_mass,
    mass_outside,
    moving_ball_at,
    simulate,
    snapshots_to_csv,
    support_radius,
)
from .errors import (
    CapacityError,
    ConfigError,
    InsufficientDataError,
    ParameterDomainError,
    UsageError,
)
from .estimators import (
    EventKind,
    EventSpec,
    campaign_report,
    campaign_to_csv,
    decay_slope,
    importance_lower_bound,
    naive_mc,
)
from .rates import minimize_rate, rate_table, table_to_csv, table_to_json

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_CAPACITY = 4
EXIT_INSUFFICIENT = 5


@dataclass
class CampaignConfig:
    """Fully resolved options for one command invocation."""

    command: str
    beta: float = 1.0
    dim: int = 1
    theta: str = "0"
    a: str = "0"
    radius: float = 1.0
    center: str = "0"
    t: float = 1.0
    t_grid: str = ""
    replicas: int = 1000
    seed: int = 0
    rho: float | None = None
    method: str = "both"
    out: str = ""
    format: str = "csv"
    max_particles: int = DEFAULT_MAX_PARTICLES
    event: str = "inside"
    quick: bool = False

    def theta_scalar(self) -> float:
        return _parse_float("theta", self.theta)

    def a_scalar(self) -> float:
        return _parse_float("a", self.a)

    def theta_list(self):
        return [_parse_float("theta", v) for v in str(self.theta).split(",")]

    def a_list(self):
        return [_parse_float("a", v) for v in str(self.a).split(",")]

    def center_vec(self) -> np.ndarray:
        vals = [_parse_float("center", v) for v in str(self.center).split(",")]
        if len(vals) == 1 and self.dim > 1:
            vals = vals + [0.0] * (self.dim - 1)
        if len(vals) != self.dim:
            raise ConfigError(
                f"center has {len(vals)} coordinates but dim={self.dim}"
            )
        return np.asarray(vals, dtype=float)

    def t_grid_list(self):
        if not self.t_grid:
            return []
        vals = [_parse_float("t_grid", v) for v in str(self.t_grid).split(",")]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"t_grid must be strictly increasing, got {vals}")
        return vals


_FIELD_TYPES = {f.name: f.type for f in fields(CampaignConfig)}
_CONFIG_KEYS = [f.name for f in fields(CampaignConfig) if f.name != "command"]


def _parse_float(key: str, token) -> float:
    try:
        return float(token)
    except (TypeError, ValueError):
        raise ConfigError(f"could not parse {key}={token!r} as a number") from None


def _parse_value(key: str, token: str):
    if key not in _CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    if key in ("theta", "a", "center", "t_grid", "method", "out", "format", "event"):
        return token
    if key == "quick":
        if token.lower() in ("1", "true", "yes"):
            return True
        if token.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"could not parse {key}={token!r} as a boolean")
    if key in ("dim", "replicas", "seed", "max_particles"):
        try:
            return int(token)
        except ValueError:
            raise ConfigError(f"could not parse {key}={token!r} as an integer") from None
    if key == "rho":
        if token.lower() in ("", "none"):
            return None
        return _parse_float(key, token)
    return _parse_float(key, token)


def read_config_file(path: str) -> dict:
    """Flat key=value file; # starts a comment; unknown keys rejected."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, token = line.partition("=")
        key = key.strip()
        token = token.strip()
        try:
            values[key] = _parse_value(key, token)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def parse_config(argv) -> CampaignConfig:
    """Build the resolved config from CLI flags plus an optional file; flags win."""
    parser = argparse.ArgumentParser(
        prog="bbmld",
        description="Branching Brownian motion local-mass toolkit",
    )
    parser.add_argument("command",
                        choices=["rate", "table", "simulate", "expect", "estimate", "validate"])
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--beta", type=str, default=None)
    parser.add_argument("--dim", type=str, default=None)
    parser.add_argument("--theta", type=str, default=None,
                        help="scalar, or comma list for `table`")
    parser.add_argument("--a", type=str, default=None,
                        help="scalar, or comma list for `table`")
    parser.add_argument("--radius", type=str, default=None)
    parser.add_argument("--center", type=str, default=None, help="comma-separated coordinates")
    parser.add_argument("--t", type=str, default=None)
    parser.add_argument("--t-grid", dest="t_grid", type=str, default=None)
    parser.add_argument("--replicas", type=str, default=None)
    parser.add_argument("--seed", type=str, default=None)
    parser.add_argument("--rho", type=str, default=None)
    parser.add_argument("--method", type=str, default=None,
                        choices=["naive", "importance", "both"])
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", type=str, default=None, choices=["csv", "json"])
    parser.add_argument("--max-particles", dest="max_particles", type=str, default=None)
    parser.add_argument("--event", type=str, default=None,
                        choices=["inside", "empty", "outside"])
    parser.add_argument("--quick", action="store_true", default=None)
    ns = parser.parse_args(argv)

    resolved = {}
    if ns.config:
        resolved.update(read_config_file(ns.config))
    for key in _CONFIG_KEYS:
        flag_val = getattr(ns, key, None)
        if flag_val is not None:
            resolved[key] = _parse_value(key, str(flag_val)) if isinstance(flag_val, str) else flag_val
    cfg = CampaignConfig(command=ns.command, **resolved)
    if cfg.replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {cfg.replicas}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    if cfg.method not in ("naive", "importance", "both"):
        raise ConfigError(f"method must be naive, importance or both, got {cfg.method!r}")
    if cfg.event not in ("inside", "empty", "outside"):
        raise ConfigError(f"event must be inside, empty or outside, got {cfg.event!r}")
    return cfg


def config_dict(cfg: CampaignConfig) -> dict:
    """Every resolved value (defaults included) for the reproducibility echo."""
    out = {}
    for f in fields(CampaignConfig):
        if f.name == "command":
            continue
        v = getattr(cfg, f.name)
        out[f.name] = "" if v is None else v
    return out


def config_to_file_text(conf: dict) -> str:
    """Render a config echo back into the key=value file format."""
    return "\n".join(f"{k}={v}" for k, v in conf.items()) + "\n"


def build_event_spec(cfg: CampaignConfig) -> EventSpec:
    theta = cfg.theta_scalar()
    a = cfg.a_scalar()
    if cfg.event == "outside":
        return EventSpec(kind=EventKind.OUTSIDE_EXPANDING_BALL, a=a, theta=theta)
    moving = MovingBallSpec(
        base=Ball(center=cfg.center_vec(), radius=cfg.radius),
        theta=theta,
        beta=cfg.beta,
    )
    kind = EventKind.EMPTY_MOVING_BALL if cfg.event == "empty" else EventKind.INSIDE_MOVING_BALL
    return EventSpec(kind=kind, a=a, moving=moving)


def _cmd_rate(cfg: CampaignConfig) -> int:
    sol = minimize_rate(cfg.theta_scalar(), cfg.a_scalar())
    print(f"rho_hat = {sol.rho_hat:.15g}")
    print(f"I = {sol.value:.15g}")
    print(f"rate = {cfg.beta * sol.value:.15g}")
    print(f"at_boundary = {sol.at_boundary}")
    return EXIT_OK


def _cmd_table(cfg: CampaignConfig) -> int:
    rows = rate_table(cfg.theta_list(), cfg.a_list(), cfg.beta)
    text = table_to_csv(rows) if cfg.format == "csv" else table_to_json(rows)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} rows to {cfg.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_simulate(cfg: CampaignConfig) -> int:
    sim = SimConfig(beta=cfg.beta, dim=cfg.dim, t_end=cfg.t, seed=cfg.seed,
                    max_particles=cfg.max_particles)
    theta = cfg.theta_scalar()
    moving = MovingBallSpec(base=Ball(center=cfg.center_vec(), radius=cfg.radius),
                            theta=theta, beta=cfg.beta)
    ball_t = moving_ball_at(moving, cfg.t)
    items = []
    summaries = []
    for rep in range(cfg.replicas):
        snap = simulate(sim, replica=rep)
        items.append((rep, snap))
        summaries.append({
            "replica": rep,
            "time": snap.time,
            "n": snap.n,
            "m_t": support_radius(snap),
            "masses": {
                "ball_at_t": local_mass(snap, ball_t),
                "outside_radius": mass_outside(snap, cfg.radius),
            },
        })
    base = cfg.out or "snapshot"
    csv_path = f"{base}.csv"
    json_path = f"{base}.json"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(snapshots_to_csv(items))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": config_dict(cfg),
        "replicas": summaries,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_expect(cfg: CampaignConfig) -> int:
    ball = Ball(center=cfg.center_vec(), radius=cfg.radius)
    value, bound = expected_local_mass(cfg.beta, cfg.t, ball, cfg.dim, with_error=True)
    print(f"expected_local_mass = {value:.15g}")
    print(f"error_bound = {bound:.3g}")
    return EXIT_OK


def _cmd_estimate(cfg: CampaignConfig) -> int:
    spec = build_event_spec(cfg)
    grid = cfg.t_grid_list() or [cfg.t]
    estimates = []
    for t in grid:
        if cfg.method in ("naive", "both"):
            estimates.append(naive_mc(spec, cfg.beta, cfg.dim, t, cfg.replicas, cfg.seed,
                                      max_particles=cfg.max_particles))
        if cfg.method in ("importance", "both"):
            estimates.append(importance_lower_bound(
                spec, cfg.beta, cfg.dim, t, cfg.replicas, cfg.seed, rho=cfg.rho,
                max_particles=cfg.max_particles))
    base = cfg.out or "campaign"
    with open(f"{base}.csv", "w", encoding="utf-8") as fh:
        fh.write(campaign_to_csv(estimates))

    fits = {}
    fit_errors = {}
    for method in ("naive", "importance_lower_bound"):
        mine = [e for e in estimates if e.method == method]
        if not mine:
            continue
        try:
            fits[method] = decay_slope(mine)
        except InsufficientDataError as exc:
            fit_errors[method] = str(exc)
    report = campaign_report(estimates, spec, cfg.beta, fits)
    report["schema_version"] = SCHEMA_VERSION
    report["config"] = config_dict(cfg)
    if fit_errors:
        report["fit_errors"] = fit_errors
    with open(f"{base}.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    print(f"wrote {base}.csv and {base}.json")
    if fit_errors:
        for method, msg in fit_errors.items():
            print(f"slope fit unavailable for {method}: {msg}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    return EXIT_OK


def _cmd_validate(cfg: CampaignConfig) -> int:
    _passed, failed = validate_mod.run_all(quick=cfg.quick)
    return EXIT_OK if failed == 0 else EXIT_INTERNAL


def run_command(cfg: CampaignConfig) -> int:
    """Dispatch a resolved config; returns the process exit status."""
    handlers = {
        "rate": _cmd_rate,
        "table": _cmd_table,
        "simulate": _cmd_simulate,
        "expect": _cmd_expect,
        "estimate": _cmd_estimate,
        "validate": _cmd_validate,
    }
    return handlers[cfg.command](cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return run_command(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterDomainError as exc:
        print(f"parameter domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT


if __name__ == "__main__":
    sys.exit(main())
