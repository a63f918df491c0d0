"""Experiment configuration files.

A config is a flat ``key = value`` file (an INI file with one optional
``[experiment]`` header).  Lists are comma separated.  Every key has a
default; chain defaults are the six-chain mixture with means
-0.6 .. 0.6, unit reward noise, 10 actions at B, ``gamma = 1``, 5000 episodes
and 50 seeds.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .chain import DEFAULT_B_ACTIONS, DEFAULT_MEANS, DEFAULT_SIGMA, MetaChainConfig
from .exceptions import ConfigError, InvalidParameterError
from .mse import ESTIMATOR_KINDS, GaussianSpec

KINDS = ("mse-curve", "split-sweep", "estimator-stats", "chain-train", "bias-trace")
ALGORITHMS = ("QL", "DQL", "EBQL")
SECTION = "experiment"

DEFAULT_DELTAS = (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0)
DEFAULT_GAPS = tuple(float(g) for g in np.round(np.logspace(-3, 1, 25), 6))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "chain-train"
    seed: int = 0
    seeds: int = 50
    seed_list: tuple = ()
    out: str = "results"
    jobs: int = 1
    # chain-train / bias-trace
    episodes: int = 5000
    chain_means: tuple = DEFAULT_MEANS
    chain_sigma: float = DEFAULT_SIGMA
    chain_actions: int = DEFAULT_B_ACTIONS
    gamma: float = 1.0
    lr_exponent: float = 0.8
    algorithms: tuple = ALGORITHMS
    ensemble_sizes: tuple = (3, 7, 10, 15, 25)
    exploration: str = "inverse-sqrt"
    epsilon: float = 0.1
    dql_coin: str = "parity"
    smoothing: int = 1
    # estimator-stats
    means: tuple = (0.5, 0.0)
    stds: tuple = (0.5, 0.5)
    samples: int = 20
    n_index: int = 10
    ensemble_k: int = 5
    estimators: tuple = ESTIMATOR_KINDS
    trials: int = 1_000_000
    # mse-curve / split-sweep
    sigma2: float = 0.25
    split_n: int = 100
    deltas: tuple = DEFAULT_DELTAS
    split_arms: tuple = (2, 4, 6)
    gaps: tuple = DEFAULT_GAPS
    split_trials: int = 100_000

    @property
    def run_seeds(self) -> tuple:
        if self.seed_list:
            return tuple(self.seed_list)
        return tuple(self.seed + i for i in range(self.seeds))

    def meta_chain(self) -> MetaChainConfig:
        return MetaChainConfig.from_means(self.chain_means, self.chain_sigma, self.chain_actions)

    def gaussian_spec(self) -> GaussianSpec:
        return GaussianSpec(self.means, self.stds)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def _element_type(name):
    default = getattr(_DEFAULTS, name)
    if name == "seed_list":
        return int
    if isinstance(default, tuple):
        return type(default[0]) if default else str
    return type(default)


def _parse_value(name, raw):
    kind = _element_type(name)
    default = getattr(_DEFAULTS, name)
    if isinstance(default, tuple):
        items = [item.strip() for item in raw.split(",") if item.strip()]
        return tuple(kind(item) for item in items)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw.strip()


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Raise ``ConfigError`` on any invariant violation; return ``cfg`` otherwise."""
    def fail(msg, key):
        raise ConfigError(f"{key}: {msg}")

    if cfg.kind not in KINDS:
        fail(f"unknown kind {cfg.kind!r}; expected one of {KINDS}", "kind")
    if not 0 <= cfg.seed < 2**64:
        fail("seed must be a 64-bit unsigned integer", "seed")
    if not cfg.run_seeds:
        fail("at least one seed is required", "seeds")
    if any(not 0 <= s < 2**64 for s in cfg.run_seeds):
        fail("seeds must be 64-bit unsigned integers", "seed_list")
    if cfg.jobs < 1:
        fail("jobs must be at least 1", "jobs")
    if cfg.episodes < 1:
        fail("episodes must be positive", "episodes")
    if not 0 <= cfg.gamma <= 1:
        fail("gamma must lie in [0, 1]", "gamma")
    for name in cfg.algorithms:
        if name not in ALGORITHMS:
            fail(f"unknown algorithm {name!r}", "algorithms")
    if not cfg.algorithms:
        fail("at least one algorithm is required", "algorithms")
    if "EBQL" in cfg.algorithms and not cfg.ensemble_sizes:
        fail("EBQL needs at least one ensemble size", "ensemble_sizes")
    if any(k < 2 for k in cfg.ensemble_sizes):
        fail("EBQL ensemble sizes must be at least 2", "ensemble_sizes")
    if cfg.exploration not in ("inverse-sqrt", "constant"):
        fail("exploration must be 'inverse-sqrt' or 'constant'", "exploration")
    if not 0 <= cfg.epsilon <= 1:
        fail("epsilon must lie in [0, 1]", "epsilon")
    if cfg.dql_coin not in ("parity", "fair"):
        fail("dql_coin must be 'parity' or 'fair'", "dql_coin")
    if cfg.smoothing < 1:
        fail("smoothing must be at least 1", "smoothing")
    for name in cfg.estimators:
        if name not in ESTIMATOR_KINDS:
            fail(f"unknown estimator {name!r}", "estimators")
    if cfg.trials < 1 or cfg.split_trials < 1:
        fail("trial counts must be positive", "trials")
    if cfg.sigma2 <= 0:
        fail("sigma2 must be positive", "sigma2")
    if cfg.split_n < 4:
        fail("split_n must be at least 4", "split_n")
    if any(m < 2 for m in cfg.split_arms):
        fail("split_arms entries must be at least 2", "split_arms")
    if not 1 <= cfg.n_index <= cfg.samples - 1:
        fail("n_index must lie in [1, samples - 1]", "n_index")
    try:
        cfg.meta_chain()
        cfg.gaussian_spec()
    except InvalidParameterError as exc:
        fail(str(exc), "chain_means" if "sigma" in str(exc) or "chain" in str(exc) else "means")
    return cfg


def _line_of(text, key):
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
            return i
    return None


def loads(text: str, path=None) -> ExperimentConfig:
    offset = 0
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text_ = f"[{SECTION}]\n" + text
        offset = 1
    else:
        text_ = text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text_)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] - offset if exc.errors else None
        raise ConfigError("malformed line", line, path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":")[-1].strip() or str(exc), getattr(exc, "lineno", None), path) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc), None, path) from None
    sections = parser.sections()
    if sections != [SECTION]:
        raise ConfigError(f"expected a single [{SECTION}] section, found {sections}", None, path)
    values = {}
    for key, raw in parser.items(SECTION):
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", _line_of(text, key), path)
        try:
            values[key] = _parse_value(key, raw)
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {raw!r}", _line_of(text, key), path) from None
    cfg = ExperimentConfig(**values)
    try:
        return validate(cfg)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        raise ConfigError(str(exc), _line_of(text, key), path) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return loads(text, path)


def _dump_value(value):
    if isinstance(value, tuple):
        return ", ".join(_dump_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps(cfg: ExperimentConfig, omit=()) -> str:
    """Serialise ``cfg``; keys in ``omit`` are left out (and default on reload)."""
    lines = [f"[{SECTION}]"]
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in omit or f.name == "seed_list" and not value:
            continue
        lines.append(f"{f.name} = {_dump_value(value)}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(cfg), encoding="utf-8")
    return path
