"""Run configuration: a nested, JSON-compatible description of one pipeline run.

All energies and rates are in units of the lead exchange J; times in units of 1/J.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

from .errors import ValidationError

MODES = ("correlations", "born", "kubo", "steady", "spectral", "rectify", "oracle", "sweep")


@dataclass
class LeadConfig:
    J: float = 1.0
    Jz: float = 1.0
    mu: float = 100.0
    beta: Optional[float] = None  # None means zero temperature
    kernel: str = "hp"  # hp | quadrature | exact-lead


@dataclass
class JunctionConfig:
    J_S: float = 0.01
    Delta: float = 0.01
    Jz_sys: float = 0.0
    gamma: float = 0.01


@dataclass
class NumericsConfig:
    dt: float = 0.01
    T: float = 3.0
    damping: float = 1e-3
    generator: str = "redfield-global"  # or lindblad-local
    omega_min: float = -0.1
    omega_max: float = 0.1
    n_omega: int = 201
    rectify_method: str = "steady"  # steady | born | kubo | kubo-asymptotic


@dataclass
class OracleConfig:
    N_L: int = 8
    N_R: int = 8
    contact: int = 0
    max_excitations: Optional[int] = None
    absorbers: bool = False
    compare_absorbers: bool = False
    gamma_B: float = 0.5
    amplitude: float = 4.0
    trajectories: int = 200
    trajectory_dt: float = 1e-3
    record_dt: float = 0.01
    tol: float = 1e-9


@dataclass
class SweepConfig:
    mode: str = "steady"
    grid: dict = field(default_factory=dict)  # dotted field -> list (cartesian product)
    points: list = field(default_factory=list)  # explicit list of {dotted field: value}
    paired_delta: bool = False


@dataclass
class RunSpec:
    mode: str = "steady"
    lead: LeadConfig = field(default_factory=LeadConfig)
    junction: JunctionConfig = field(default_factory=JunctionConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    out: str = "results"
    seed: int = 0

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSpec":
        errors: list[str] = []
        spec = _build(cls, data, "", errors)
        errors += spec.problems()
        if errors:
            raise ValidationError("invalid run configuration: " + "; ".join(errors),
                                  [e.split(":")[0] for e in errors])
        return spec

    @classmethod
    def from_json(cls, text: str) -> "RunSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())

    # -- edits ----------------------------------------------------------
    def with_overrides(self, overrides: dict) -> "RunSpec":
        data = self.to_dict()
        for key, value in overrides.items():
            set_dotted(data, key, value)
        return RunSpec.from_dict(data)

    def problems(self) -> list[str]:
        p = []
        if self.mode not in MODES:
            p.append(f"mode: must be one of {', '.join(MODES)}")
        if self.sweep.mode not in MODES or self.sweep.mode == "sweep":
            p.append("sweep.mode: must be a non-sweep mode")
        if not self.lead.J > 0:
            p.append("lead.J: must be positive")
        if self.lead.beta is not None and not self.lead.beta > 0:
            p.append("lead.beta: must be positive or null")
        if self.lead.kernel not in ("hp", "quadrature", "exact-lead"):
            p.append("lead.kernel: must be hp, quadrature or exact-lead")
        if not self.junction.gamma >= 0:
            p.append("junction.gamma: must be non-negative")
        n = self.numerics
        for name in ("dt", "T", "damping"):
            v = getattr(n, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                p.append(f"numerics.{name}: must be a positive finite number")
        if n.generator not in ("redfield-global", "lindblad-local"):
            p.append("numerics.generator: must be redfield-global or lindblad-local")
        if n.rectify_method not in ("steady", "born", "kubo", "kubo-asymptotic"):
            p.append("numerics.rectify_method: must be steady, born, kubo or kubo-asymptotic")
        if n.n_omega < 1:
            p.append("numerics.n_omega: must be at least 1")
        o = self.oracle
        if o.N_L < 0 or o.N_R < 0 or o.N_L + o.N_R + 2 > 24:
            p.append("oracle.N_L: lead sizes must be non-negative with at most 24 sites in total")
        if o.trajectories < 2:
            p.append("oracle.trajectories: at least 2 are needed")
        if not isinstance(self.seed, int) or self.seed < 0:
            p.append("seed: must be a non-negative integer")
        return p


def _build(cls, data, prefix, errors):
    if not isinstance(data, dict):
        errors.append(f"{prefix or 'root'}: expected an object")
        return cls()
    known = {f.name: f for f in fields(cls)}
    hints = get_type_hints(cls)
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in known:
            errors.append(f"{path}: unknown field")
            continue
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, path + ".", errors)
        else:
            kwargs[key] = _coerce(value, hints[key], default, path, errors)
    return cls(**kwargs)


def _coerce(value, hint, default, path, errors):
    args = get_args(hint)
    if get_origin(hint) is Union and type(None) in args:
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
    if hint is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true/false")
            return default
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number")
            return default
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer")
            return default
        return value
    if hint is str and not isinstance(value, str):
        errors.append(f"{path}: expected a string")
        return default
    if hint in (dict, list) and not isinstance(value, hint):
        errors.append(f"{path}: expected {'an object' if hint is dict else 'a list'}")
        return default
    return value


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ValidationError(f"override {text!r} is not of the form key=value", [text])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ValidationError(f"unknown configuration section {p!r} in {key!r}", [key])
        node = node[p]
    if parts[-1] not in node:
        raise ValidationError(f"unknown configuration field {key!r}", [key])
    node[parts[-1]] = value
