"""Strict JSON run configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict
from typing import Optional

from . import problems

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass
class DistfunParams:
    r_min: float = 1e-3
    r_max: float = 1e4
    num_points: int = 60
    multistart: int = 8
    tol: float = 1e-10
    max_iter: int = 2000

    def validate(self, where):
        _require(0 <= self.r_min < self.r_max, where, "r_min", "need 0 <= r_min < r_max")
        _require(self.num_points >= 2, where, "num_points", "must be >= 2")
        _require(self.multistart >= 1, where, "multistart", "must be >= 1")
        _require(self.tol > 0, where, "tol", "must be positive")
        _require(self.max_iter >= 1, where, "max_iter", "must be >= 1")


@dataclass
class IndexfunParams:
    num_t: int = 50
    t_min_factor: float = 1e-6
    t_max_factor: float = 10.0
    decay_tol: Optional[float] = None
    trivial_slope: float = 0.0

    def validate(self, where):
        _require(self.num_t >= 1, where, "num_t", "must be >= 1")
        _require(0 < self.t_min_factor < self.t_max_factor, where, "t_min_factor",
                 "need 0 < t_min_factor < t_max_factor")
        _require(self.decay_tol is None or self.decay_tol > 0, where, "decay_tol",
                 "must be positive or null")
        _require(self.trivial_slope >= 0, where, "trivial_slope", "must be nonnegative")


@dataclass
class VscParams:
    num_samples: int = 10_000
    scales: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    tolerance: float = 1e-6

    def validate(self, where):
        _require(self.num_samples >= 1, where, "num_samples", "must be >= 1")
        _require(len(self.scales) >= 1 and all(isinstance(s, (int, float)) and s > 0
                                               for s in self.scales),
                 where, "scales", "must be a nonempty list of positive numbers")
        _require(self.tolerance >= 0, where, "tolerance", "must be nonnegative")


@dataclass
class RatesParams:
    delta_max_factor: float = 1e-1
    delta_min_factor: float = 1e-4
    num_deltas: int = 8
    replicates: int = 11
    rule: str = "APrioriPhi"
    starts: int = 16
    tol: float = 1e-7
    max_iter: int = 20000

    def validate(self, where):
        _require(0 < self.delta_min_factor < self.delta_max_factor, where, "delta_min_factor",
                 "need 0 < delta_min_factor < delta_max_factor")
        _require(self.num_deltas >= 1, where, "num_deltas", "must be >= 1")
        _require(self.replicates >= 1, where, "replicates", "must be >= 1")
        _require(self.rule in ("APrioriPhi", "Discrepancy"), where, "rule",
                 "must be 'APrioriPhi' or 'Discrepancy'")
        _require(self.starts >= 1, where, "starts", "must be >= 1")
        _require(self.tol > 0, where, "tol", "must be positive")
        _require(self.max_iter >= 1, where, "max_iter", "must be >= 1")


@dataclass
class SolveParams:
    delta_factor: float = 1e-2
    alpha: Optional[float] = None

    def validate(self, where):
        _require(self.delta_factor >= 0, where, "delta_factor", "must be nonnegative")
        _require(self.alpha is None or self.alpha > 0, where, "alpha", "must be positive")


@dataclass
class RunConfig:
    problem: dict
    beta: float = 0.5
    seed: int = 0
    output_dir: Optional[str] = None
    solve: SolveParams = field(default_factory=SolveParams)
    distfun: DistfunParams = field(default_factory=DistfunParams)
    indexfun: IndexfunParams = field(default_factory=IndexfunParams)
    vsc: VscParams = field(default_factory=VscParams)
    rates: RatesParams = field(default_factory=RatesParams)

    def build_problem(self) -> problems.ProblemInstance:
        spec = dict(self.problem)
        try:
            if "preset" in spec:
                name = spec.pop("preset")
                unknown = set(spec) - {"n", "seed"}
                if unknown:
                    raise ConfigError(f"problem: unknown keys {sorted(unknown)}")
                return problems.make_preset(name, **spec)
            return problems.from_dict(spec)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"problem: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"solve": SolveParams, "distfun": DistfunParams, "indexfun": IndexfunParams,
             "vsc": VscParams, "rates": RatesParams}


def _require(cond, where, key, msg):
    if not cond:
        raise ConfigError(f"{where}.{key}: {msg}")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(value, default, where, key):
    if default is None or isinstance(default, float):
        if value is None and default is None:
            return None
        if _is_number(value):
            return float(value)
        expected = "number or null" if default is None else "number"
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        expected = "integer"
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
        expected = "string"
    else:
        if isinstance(value, list):
            return value
        expected = "list"
    raise ConfigError(f"{where}.{key}: expected {expected}, got {type(value).__name__}")


def _parse_section(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    obj = cls()
    for key, value in data.items():
        setattr(obj, key, _coerce(value, getattr(obj, key), where, key))
    obj.validate(where)
    return obj


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    allowed = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"config: unknown key(s) {unknown}")
    if "problem" not in data or not isinstance(data["problem"], dict):
        raise ConfigError("config.problem: required object is missing")
    cfg = RunConfig(problem=data["problem"])
    beta = data.get("beta", cfg.beta)
    if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not 0 < beta < 1:
        raise ConfigError(f"config.beta: must be a number in (0, 1), got {beta!r}")
    cfg.beta = float(beta)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"config.seed: must be a nonnegative integer, got {seed!r}")
    cfg.seed = seed
    out = data.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("config.output_dir: must be a string")
    cfg.output_dir = out
    for name, cls in _SECTIONS.items():
        if name in data:
            setattr(cfg, name, _parse_section(cls, data[name], f"config.{name}"))
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
