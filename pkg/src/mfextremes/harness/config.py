"""Experiment configuration: an INI file with per-key overrides.

Schema (every key optional; defaults reproduce the Gaussian reference run)::

    [experiment]  name, seed, replications, workers, output_dir
    [model]       kind = gaussian | rankbased
                  kappa, sigma, m0, sigma0                      (gaussian)
                  profile_slope, profile_intercept,
                  init_mean, init_sd                            (rankbased)
    [simulation]  n_particles, horizon, steps
    [law]         cloud_size, picard_iters
    [norming]     source = auto | analytic | empirical
                  gaussian_method = quantile | classical
    [tests]       gamma, regions, topk, thresholds, truncation, girsanov,
                  ks_coefficient, gev_ks_tolerance, z_threshold,
                  dispersion_low, dispersion_high, topk_limit_slack,
                  intermediate_grid, intermediate_x
    [output]      save_patterns

``regions`` is a ``;``-separated list of ``a b c d`` rectangles ``(a,b] x (c,d]``
(``inf`` allowed); ``thresholds`` and ``intermediate_grid`` are comma lists.
The worker count defaults to ``$MFEXTREMES_WORKERS`` (else 1). ``workers``
and ``output_dir`` do not enter the config hash.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Union

from ..extremes import RegionSet

__all__ = ["ExperimentConfig", "load_config", "apply_overrides", "WORKERS_ENV"]

WORKERS_ENV = "MFEXTREMES_WORKERS"


def _default_workers() -> int:
    return int(os.environ.get(WORKERS_ENV, "1"))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "gaussian_reference"
    seed: int = 20240601
    replications: int = 2000
    workers: int = field(default_factory=_default_workers)
    output_dir: str = "runs"

    model: str = "gaussian"
    kappa: float = 1.0
    sigma: float = math.sqrt(2.0)
    m0: float = 0.0
    sigma0: float = 1.0
    profile_slope: float = 1.0
    profile_intercept: float = -0.5
    init_mean: float = 0.0
    init_sd: float = 1.0

    n_particles: int = 1000
    horizon: float = 1.0
    steps: int = 100

    cloud_size: int = 100_000
    picard_iters: int = 3

    norming: str = "auto"
    gaussian_method: str = "quantile"

    gamma: float = 0.0
    regions: tuple = ((0.0, 1.0, 0.0, math.inf),)
    topk: int = 3
    thresholds: tuple = (1.0, 0.5, 0.0)
    truncation: int = 40
    girsanov: bool = False
    ks_coefficient: float = 1.63
    gev_ks_tolerance: float = 0.08
    z_threshold: float = 3.0
    dispersion_low: float = 0.85
    dispersion_high: float = 1.15
    topk_limit_slack: float = 0.02
    intermediate_grid: tuple = ()
    intermediate_x: float = 0.0

    save_patterns: bool = True

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if len(self.thresholds) != self.topk:
            raise ValueError(f"need {self.topk} thresholds, got {len(self.thresholds)}")
        if self.model not in ("gaussian", "rankbased"):
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.norming not in ("auto", "analytic", "empirical"):
            raise ValueError(f"unknown norming source {self.norming!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.intermediate_grid and len(self.intermediate_grid) < 3:
            raise ValueError("intermediate_grid needs at least three particle counts")
        RegionSet(self.regions)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def hashed_fields(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("workers", "output_dir")}

    def config_hash(self) -> str:
        payload = json.dumps(self.hashed_fields(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for section, keys in _SECTIONS.items():
            parser[section] = {k: _format(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


_SECTIONS = {
    "experiment": ["name", "seed", "replications", "workers", "output_dir"],
    "model": [
        "model",
        "kappa",
        "sigma",
        "m0",
        "sigma0",
        "profile_slope",
        "profile_intercept",
        "init_mean",
        "init_sd",
    ],
    "simulation": ["n_particles", "horizon", "steps"],
    "law": ["cloud_size", "picard_iters"],
    "norming": ["norming", "gaussian_method"],
    "tests": [
        "gamma",
        "regions",
        "topk",
        "thresholds",
        "truncation",
        "girsanov",
        "ks_coefficient",
        "gev_ks_tolerance",
        "z_threshold",
        "dispersion_low",
        "dispersion_high",
        "topk_limit_slack",
        "intermediate_grid",
        "intermediate_x",
    ],
    "output": ["save_patterns"],
}
# INI key -> field name where they differ
_ALIASES = {("model", "kind"): "model", ("norming", "source"): "norming"}
_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _format(value) -> str:
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return "; ".join(" ".join(repr(float(v)) for v in rect) for rect in value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value).lower() if isinstance(value, bool) else str(value)


def _parse(name: str, text: str):
    text = text.strip()
    default = ExperimentConfig.__dataclass_fields__[name]
    if name == "regions":
        return tuple(tuple(float(v) for v in rect.split()) for rect in text.split(";") if rect.strip())
    if name == "thresholds":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if name == "intermediate_grid":
        return tuple(int(v) for v in text.split(",") if v.strip())
    kind = default.type
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{name}: not a boolean: {text!r}")
        return low in ("true", "1", "yes")
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def _resolve_key(key: str) -> str:
    key = key.strip()
    if "." in key:
        section, sub = key.split(".", 1)
        key = _ALIASES.get((section, sub), sub)
    if key not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {key!r}")
    return key


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in _SECTIONS:
                raise KeyError(f"unknown config section [{section}]")
            for key, text in parser[section].items():
                name = _resolve_key(f"{section}.{key}")
                values[name] = _parse(name, text)
    values.update(_override_values(overrides))
    return ExperimentConfig(**values)


def _override_values(overrides: Iterable[str]) -> dict:
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        name = _resolve_key(key)
        values[name] = _parse(name, text)
    return values


def apply_overrides(config: ExperimentConfig, overrides: Iterable[str]) -> ExperimentConfig:
    return config.replace(**_override_values(overrides))
