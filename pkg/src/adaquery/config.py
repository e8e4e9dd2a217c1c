"""Experiment configuration files: INI sections with typed, validated fields.

A config looks like::

    [experiment]
    kind = sq-accuracy
    trials = 200
    seed = 0
    output = results/sq_accuracy

    [params]
    alpha = 0.2
    n = 20000

    [checks]
    max_failure_rate = 0.1

Every field has a default and a type taken from that default; unknown
sections or fields are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

SCHEMA_VERSION = 1

EXPERIMENT_FIELDS = {"kind": "", "trials": 0, "seed": 0, "output": ""}

# kind -> (default trials, params, checks)
KINDS: dict[str, tuple[int, dict[str, Any], dict[str, Any]]] = {
    "sq-accuracy": (200, {
        "universe_size": 512, "alpha": 0.2, "beta": 0.1, "k": 50, "n": 20000,
        "replacement": False, "workload": "attack",
    }, {"max_failure_rate": 0.1}),
    "scq-accuracy": (60, {
        "universe_size": 512, "n": 100, "flip_probs": (0.05, 0.1, 0.25), "calls": 100000,
    }, {"min_within_rate": 0.95, "z_limit": 3.0}),
    "counting-via-scq": (200, {
        "universe_size": 512, "alpha": 0.2, "beta": 0.1, "k": 50, "n": 20000, "workload": "attack",
    }, {"max_failure_rate": 0.1}),
    # naive_threshold is the calibrated value in harness.NAIVE_ATTACK_THRESHOLD for these defaults.
    "attack": (100, {
        "universe_size": 512, "alpha": 0.2, "beta": 0.1, "k": 50, "n": 20000, "mechanism": "alg1",
    }, {"min_separation_rate": 0.95, "naive_threshold": 0.0088, "min_naive_above_rate": 0.9}),
    "gd-convex": (100, {
        "d": 2, "n": 10000, "ell": 500, "oracle_alpha": 0.5, "alpha": 0.1, "beta": 0.05, "T": 0,
        "center": 0.3, "spread": 0.15, "boosted": False,
    }, {"max_mean_excess": 0.1}),
    "gd-strongly-convex": (100, {
        "d": 2, "n": 10000, "ell": 500, "oracle_alpha": 0.5, "alpha": 0.1, "beta": 0.05, "T": 0,
        "center": 0.3, "spread": 0.15, "boosted": False,
    }, {"max_mean_excess": 0.1}),
    "bench-timing": (5, {
        "universe_size": 512, "n_values": (10000, 100000, 1000000), "alpha": 0.2, "beta": 0.1,
        "k": 50,
    }, {"max_alg1_growth": 2.0, "min_naive_growth": 50.0}),
    "amplification-table": (1, {
        "eps_values": (0.1, 0.5, 1.0), "ratios": (0.001, 0.01, 0.1), "n": 100000,
    }, {}),
}


class ConfigError(ValueError):
    """A config file or override names an unknown field or holds a bad value."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(name: str, text: str, default: Any) -> Any:
    """Parse ``text`` into the type of ``default``."""
    try:
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            item_type = type(default[0]) if default else float
            return tuple(item_type(part) for part in text.split(",") if part.strip())
        return text.strip()
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {text!r} as {type(default).__name__}") from exc


@dataclass
class ExperimentConfig:
    kind: str
    trials: int
    seed: int = 0
    output: str = ""
    params: dict[str, Any] = field(default_factory=dict)
    checks: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def defaults(cls, kind: str) -> "ExperimentConfig":
        if kind not in KINDS:
            raise ConfigError("experiment.kind", f"unknown kind {kind!r}; expected one of {sorted(KINDS)}")
        trials, params, checks = KINDS[kind]
        return cls(kind, trials, 0, f"results/{kind}", dict(params), dict(checks))

    def set(self, key: str, text: str) -> None:
        """Apply one ``key=value`` override; key is ``section.name`` or a bare name."""
        section, _, name = key.rpartition(".")
        _, params, checks = KINDS[self.kind]
        if section in ("", "experiment") and name in EXPERIMENT_FIELDS:
            if name == "kind":
                raise ConfigError(key, "the experiment kind cannot be overridden")
            setattr(self, name, parse_value(key, text, EXPERIMENT_FIELDS[name]))
        elif section in ("", "params") and name in params:
            self.params[name] = parse_value(key, text, params[name])
        elif section in ("", "checks") and name in checks:
            self.checks[name] = parse_value(key, text, checks[name])
        else:
            raise ConfigError(key, f"unknown field for experiment kind {self.kind!r}")

    def validate(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ConfigError("experiment.trials", "must be at least 1")
        if not self.output:
            raise ConfigError("experiment.output", "must name an output path")
        p = self.params
        for name in ("alpha", "oracle_alpha"):
            if name in p and not (0 < p[name] <= 1):
                raise ConfigError(f"params.{name}", "must lie in (0, 1]")
        if "beta" in p and not (0 < p["beta"] < 1):
            raise ConfigError("params.beta", "must lie in (0, 1)")
        for name in ("n", "k", "universe_size", "d", "ell", "calls"):
            if name in p and p[name] < 1:
                raise ConfigError(f"params.{name}", "must be at least 1")
        if "T" in p and p["T"] < 0:
            raise ConfigError("params.T", "must be nonnegative (0 selects the iteration guidance)")
        if self.kind == "attack" and p["mechanism"] not in ("alg1", "scq"):
            raise ConfigError("params.mechanism", "must be alg1 or scq")
        if self.kind == "attack" and p["k"] < 2:
            raise ConfigError("params.k", "the attack needs at least 2 queries")
        if p.get("workload", "attack") not in ("attack", "coin"):
            raise ConfigError("params.workload", "must be attack or coin")
        if self.kind == "counting-via-scq" and p["alpha"] > 0.5:
            raise ConfigError("params.alpha", "SCQ accuracy must be at most 1/2")
        for fp in p.get("flip_probs", ()):
            if not (0 <= fp <= 0.5):
                raise ConfigError("params.flip_probs", "flip probabilities must lie in [0, 1/2]")
        return self

    def items(self):
        """All resolved fields as (dotted name, value) pairs in a stable order."""
        yield "experiment.kind", self.kind
        yield "experiment.trials", self.trials
        yield "experiment.seed", self.seed
        yield "experiment.output", self.output
        for name in sorted(self.params):
            yield f"params.{name}", self.params[name]
        for name in sorted(self.checks):
            yield f"checks.{name}", self.checks[name]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "trials": self.trials, "seed": self.seed, "output": self.output,
                "params": {k: self.params[k] for k in sorted(self.params)},
                "checks": {k: self.checks[k] for k in sorted(self.checks)}}


def load_config(path, overrides: Optional[list[str]] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Read a config file, apply ``key=value`` overrides and an optional seed, and validate."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep field names case-sensitive (T)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(path), f"malformed config: {exc}") from exc
    if not parser.has_option("experiment", "kind"):
        raise ConfigError("experiment.kind", "missing")
    cfg = ExperimentConfig.defaults(parser.get("experiment", "kind").strip())
    for section in parser.sections():
        if section not in ("experiment", "params", "checks"):
            raise ConfigError(section, "unknown section; expected experiment, params or checks")
        for name, text in parser.items(section):
            if section == "experiment" and name == "kind":
                continue
            cfg.set(f"{section}.{name}", text)
    for item in overrides or []:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(item, "overrides take the form key=value")
        cfg.set(key.strip(), text.strip())
    if seed is not None:
        cfg.seed = seed
    if cfg.output and not Path(cfg.output).is_absolute():
        cfg.output = str(Path(cfg.output))
    return cfg.validate()
