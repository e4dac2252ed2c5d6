"""Experiment configuration files (YAML) and their validation.

Validation errors carry the line number of the offending key so a malformed
config can be fixed from the message alone.  See ``configs/example.yaml``.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field

import yaml

from .probing import DEFAULT_SKETCH_WIDTH, Distribution

PROBLEM_KINDS = ("factored_least_squares", "multivariate_regression")
DOMAIN_KINDS = ("unbounded", "frobenius_ball")
SCHEDULE_KINDS = ("inverse_mu_t", "constant_over_sqrt_t")
REFERENCE_KINDS = ("auto", "closed_form", "dense_baseline", "none")

DEFAULTS = {
    "problem": {
        "kind": "factored_least_squares",
        "m": 20,
        "n": 20,
        "rank": 2,
        "sigma": None,
        "noise": 0.0,
        "feature_scale": 1.0,
        "probing": "rademacher",
        "seed": 0,
    },
    "solver": {
        "lambda": 0.1,
        "domain": {"kind": "unbounded", "radius": None, "radius_factor": None},
        "schedule": {"kind": "inverse_mu_t", "mu": None, "c": 1.0},
        "T": 100,
        "k": DEFAULT_SKETCH_WIDTH,
        "rank_budget": None,
        "trace_every": 10,
        "reortho_every": 256,
    },
    "sweep": {"seeds": [0], "lambdas": None, "horizons": None, "workers": 1},
    "reference": "auto",
    "output": {"dir": "runs", "track_memory": True},
}


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.message = message
        self.line = line
        self.path = path
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{path + ': ' if path else ''}{where}{message}")


def _line_map(node, prefix=(), out=None):
    """Map key paths to 1-based source lines."""
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            out[path] = key.start_mark.line + 1
            _line_map(value, path, out)
    return out


def _merge(defaults, given, lines, path=()):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        here = path + (key,)
        if key not in defaults:
            raise ConfigError(f"unknown key {'.'.join(map(str, here))!r}", lines.get(here))
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(here)} must be a mapping", lines.get(here))
            out[key] = _merge(defaults[key], value, lines, here)
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    data: dict
    lines: dict = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    @property
    def problem(self):
        return self.data["problem"]

    @property
    def solver(self):
        return self.data["solver"]

    @property
    def sweep(self):
        return self.data["sweep"]

    @property
    def output(self):
        return self.data["output"]

    def fail(self, path, message):
        if not message.startswith(path):
            message = f"{path}: {message}"
        raise ConfigError(message, self.lines.get(tuple(path.split("."))), self.source)

    def dump(self):
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)


def parse_config(text, source=None):
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = _line_map(node) if node is not None else {}
    try:
        data = _merge(DEFAULTS, raw, lines)
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.line, source) from None
    cfg = ExperimentConfig(data, lines, source)
    validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from None
    return parse_config(text, str(path))


def _int(cfg, path, value, lo=None, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, int):
        cfg.fail(path, f"{path} must be an integer, got {value!r}")
    if lo is not None and value < lo:
        cfg.fail(path, f"{path} must be >= {lo}, got {value}")


def _num(cfg, path, value, lo=None, strict=False, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        cfg.fail(path, f"{path} must be a number, got {value!r}")
    if lo is not None and (value <= lo if strict else value < lo):
        cfg.fail(path, f"{path} must be {'>' if strict else '>='} {lo}, got {value}")


def _choice(cfg, path, value, choices):
    if value not in choices:
        cfg.fail(path, f"{path} must be one of {list(choices)}, got {value!r}")


def validate(cfg):
    p, s, sw = cfg.problem, cfg.solver, cfg.sweep
    _choice(cfg, "problem.kind", p["kind"], PROBLEM_KINDS)
    _int(cfg, "problem.m", p["m"], 1)
    _int(cfg, "problem.n", p["n"], 1)
    _int(cfg, "problem.rank", p["rank"], 1)
    if p["rank"] > min(p["m"], p["n"]):
        cfg.fail("problem.rank", "problem.rank exceeds min(m, n)")
    if p["sigma"] is not None:
        if not isinstance(p["sigma"], list) or len(p["sigma"]) != p["rank"]:
            cfg.fail("problem.sigma", "problem.sigma must list exactly `rank` singular values")
        for v in p["sigma"]:
            _num(cfg, "problem.sigma", v, 0, strict=True)
    _num(cfg, "problem.noise", p["noise"], 0)
    _num(cfg, "problem.feature_scale", p["feature_scale"], 0, strict=True)
    try:
        Distribution.parse(p["probing"])
    except ValueError as exc:
        cfg.fail("problem.probing", str(exc))
    _int(cfg, "problem.seed", p["seed"], 0)

    _num(cfg, "solver.lambda", s["lambda"], 0)
    dom = s["domain"]
    _choice(cfg, "solver.domain.kind", dom["kind"], DOMAIN_KINDS)
    if dom["kind"] == "frobenius_ball":
        if (dom["radius"] is None) == (dom["radius_factor"] is None):
            cfg.fail("solver.domain", "frobenius_ball needs exactly one of radius, radius_factor")
        _num(cfg, "solver.domain.radius", dom["radius"], 0, strict=True, allow_none=True)
        _num(cfg, "solver.domain.radius_factor", dom["radius_factor"], 0, strict=True, allow_none=True)
    sch = s["schedule"]
    _choice(cfg, "solver.schedule.kind", sch["kind"], SCHEDULE_KINDS)
    _num(cfg, "solver.schedule.mu", sch["mu"], 0, strict=True, allow_none=True)
    _num(cfg, "solver.schedule.c", sch["c"], 0, strict=True)
    _int(cfg, "solver.T", s["T"], 0)
    _int(cfg, "solver.k", s["k"], 1)
    _int(cfg, "solver.rank_budget", s["rank_budget"], 0, allow_none=True)
    if s["rank_budget"] is not None and s["rank_budget"] > min(p["m"], p["n"]):
        cfg.fail("solver.rank_budget", "solver.rank_budget exceeds min(m, n)")
    _int(cfg, "solver.trace_every", s["trace_every"], 1)
    _int(cfg, "solver.reortho_every", s["reortho_every"], 0)

    for key in ("seeds", "lambdas", "horizons"):
        grid = sw[key]
        if grid is None and key != "seeds":
            continue
        if not isinstance(grid, list) or not grid:
            cfg.fail(f"sweep.{key}", f"sweep.{key} must be a non-empty list")
        for v in grid:
            if key == "lambdas":
                _num(cfg, f"sweep.{key}", v, 0)
            else:
                _int(cfg, f"sweep.{key}", v, 0)
    _int(cfg, "sweep.workers", sw["workers"], 1)
    _choice(cfg, "reference", cfg["reference"], REFERENCE_KINDS)

    out_dir = cfg.output["dir"]
    if not isinstance(out_dir, str) or not out_dir:
        cfg.fail("output.dir", "output.dir must be a path string")
    _check_writable(cfg, out_dir)


def _check_writable(cfg, out_dir):
    probe = os.path.abspath(out_dir)
    while not os.path.exists(probe):
        parent = os.path.dirname(probe)
        if parent == probe:
            break
        probe = parent
    if not os.access(probe, os.W_OK):
        cfg.fail("output.dir", f"output directory {out_dir!r} is not writable")
