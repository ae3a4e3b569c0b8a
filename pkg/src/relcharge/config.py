"""Run configuration (JSON, ``"schema": 1``) validated with pydantic.

Unknown keys are rejected everywhere.  The ``field`` block uses the same
layout as ``FieldSpec.to_dict``, for example::

    {"name": "plane_wave", "f1": {"kind": "cosine", "a": 1.0, "omega": 1.0}}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from .core import FRONT, state_class
from .errors import RelchargeError
from .fields import FieldSpec, Free, HelicalBoost, PlaneWave, TmMode, Undulator, Vortex
from .profiles import PROFILE_KINDS, Profile


class ConfigError(RelchargeError):
    """Invalid configuration (CLI exit code 2)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProfileConfig(_Strict):
    kind: Literal[PROFILE_KINDS] = "zero"  # type: ignore[valid-type]
    a: Optional[float] = None
    omega: Optional[float] = None
    width: Optional[float] = None
    center: Optional[float] = None
    coefficients: Optional[list[float]] = None
    expression: Optional[str] = None

    def to_profile(self) -> Profile:
        if self.kind == "expr":
            return Profile.from_expression(self.expression or "")
        if self.kind == "polynomial":
            return Profile.polynomial(self.coefficients or [])
        names = Profile(self.kind, _dummy_params(self.kind)).param_names
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"profile {self.kind!r} needs {missing}")
        return Profile(self.kind, tuple(getattr(self, n) for n in names))

    @model_validator(mode="after")
    def _check(self):
        extra = {"a", "omega", "width", "center", "coefficients", "expression"}
        if self.kind not in ("expr", "polynomial"):
            allowed = set(Profile(self.kind, _dummy_params(self.kind)).param_names)
        else:
            allowed = {"expression"} if self.kind == "expr" else {"coefficients"}
        stray = sorted(n for n in extra - allowed if getattr(self, n) is not None)
        if stray:
            raise ValueError(f"profile {self.kind!r} does not take {stray}")
        self.to_profile()
        return self


def _dummy_params(kind):
    return {"zero": (), "sinusoid": (1.0, 1.0), "cosine": (1.0, 1.0), "gaussian": (1.0, 1.0, 1.0, 0.0)}[kind]


class FreeConfig(_Strict):
    name: Literal["free"]

    def to_spec(self) -> FieldSpec:
        return Free()


class PlaneWaveConfig(_Strict):
    name: Literal["plane_wave"]
    f1: ProfileConfig = ProfileConfig()
    f2: ProfileConfig = ProfileConfig()

    def to_spec(self) -> FieldSpec:
        return PlaneWave(self.f1.to_profile(), self.f2.to_profile())


class TmModeConfig(_Strict):
    name: Literal["tm_mode"]
    f: ProfileConfig

    def to_spec(self) -> FieldSpec:
        return TmMode(self.f.to_profile())


class UndulatorConfig(_Strict):
    name: Literal["undulator"]
    B0: float
    omega: float = Field(gt=0)

    def to_spec(self) -> FieldSpec:
        return Undulator(self.B0, self.omega)


class HelicalBoostConfig(_Strict):
    name: Literal["helical_boost"]
    F0: float
    omega: float = Field(gt=0)

    def to_spec(self) -> FieldSpec:
        return HelicalBoost(self.F0, self.omega)


class VortexConfig(_Strict):
    name: Literal["vortex"]
    B0: float
    omega: float = Field(gt=0)

    def to_spec(self) -> FieldSpec:
        return Vortex(self.B0, self.omega)


FieldConfig = Annotated[
    Union[FreeConfig, PlaneWaveConfig, TmModeConfig, UndulatorConfig, HelicalBoostConfig, VortexConfig],
    Field(discriminator="name"),
]
_FIELD_ADAPTER = TypeAdapter(FieldConfig)


class OutputConfig(_Strict):
    dir: str = "out"
    prefix: Optional[str] = None


class ScanConfig(_Strict):
    samples: int = Field(64, ge=20)
    tol: float = Field(1e-9, gt=0)
    box: float = Field(2.0, gt=0)


class CompareConfig(_Strict):
    tolerance: float = Field(1e-6, gt=0)


class SweepConfig(_Strict):
    """Grid over one field parameter, addressed as ``"B0"`` or ``"f1.a"``.

    Either ``values`` or ``range`` plus ``count`` define the grid.
    ``jitter`` perturbs the transverse launch position of each point by a
    seeded normal deviate of that size.
    """

    parameter: str
    values: Optional[list[float]] = None
    range: Optional[tuple[float, float]] = None
    count: Optional[int] = Field(None, ge=1)
    jitter: float = Field(0.0, ge=0)
    drift_tolerance: Optional[float] = Field(None, gt=0)
    chunk_size: int = Field(2500, ge=1)

    @model_validator(mode="after")
    def _grid(self):
        if (self.values is None) == (self.range is None):
            raise ValueError("sweep needs exactly one of 'values' or 'range'")
        if self.range is not None and self.count is None:
            raise ValueError("sweep 'range' needs 'count'")
        return self

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.range[0], self.range[1], self.count)


class RunConfig(_Strict):
    schema_: Literal[1] = Field(alias="schema")
    field: FieldConfig
    form: Optional[Literal["front", "instant"]] = None
    initial: dict[str, float]
    time_span: tuple[float, float]
    rtol: float = Field(1e-10, gt=0)
    atol: float = Field(1e-10, gt=0)
    tracked: Optional[list[str]] = None
    output: OutputConfig = OutputConfig()
    seed: int = 0
    workers: Optional[int] = Field(None, ge=1)
    scan: ScanConfig = ScanConfig()
    compare: CompareConfig = CompareConfig()
    sweep: Optional[SweepConfig] = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @field_validator("time_span")
    @classmethod
    def _span(cls, v):
        if v[0] == v[1]:
            raise ValueError("time_span must have nonzero length")
        return v

    @model_validator(mode="after")
    def _domain(self):
        spec = self.spec()
        form = self.active_form
        cls = state_class(form)
        names = set(cls.phase_names)
        keys = set(self.initial)
        allowed = names | {cls.time_name}
        if keys - allowed:
            raise ValueError(f"initial: unknown keys {sorted(keys - allowed)}; expected {sorted(allowed)}")
        if names - keys:
            raise ValueError(f"initial: missing keys {sorted(names - keys)}")
        t0 = self.time_span[0]
        if cls.time_name in self.initial and self.initial[cls.time_name] != t0:
            raise ValueError(f"initial {cls.time_name} must equal time_span[0] = {t0}")
        if isinstance(spec, TmMode):
            lo, hi = sorted(self.time_span)
            if form == FRONT and lo <= 0.0 <= hi:
                raise ValueError("tm_mode: time_span must exclude x+ = 0")
        if isinstance(spec, HelicalBoost) and form == FRONT:
            pm = self.initial["p_minus"]
            if pm == 0.0 or not spec.F0 / (2 * pm) > 0:
                raise ValueError("helical_boost requires F0/(2 p_minus) > 0")
        if form == FRONT and self.initial["p_minus"] == 0.0:
            raise ValueError("front form requires p_minus != 0")
        if self.sweep is not None:
            self.sweep_specs()
        return self

    def spec(self) -> FieldSpec:
        return self.field.to_spec()

    @property
    def active_form(self) -> str:
        return self.form or self.spec().natural_form

    def initial_state(self):
        cls = state_class(self.active_form)
        return cls.from_phase(self.time_span[0], [self.initial[n] for n in cls.phase_names])

    def sweep_specs(self) -> tuple[np.ndarray, list[FieldSpec]]:
        """Grid values and the field spec at each of them."""
        sw = self.sweep
        base = self.field.model_dump()
        path = sw.parameter.split(".")
        node = base
        for key in path[:-1]:
            if not isinstance(node.get(key), dict):
                raise ValueError(f"sweep parameter {sw.parameter!r} does not address a field parameter")
            node = node[key]
        if node.get(path[-1]) is None or isinstance(node[path[-1]], (str, list, dict)):
            raise ValueError(f"sweep parameter {sw.parameter!r} does not address a numeric field parameter")
        specs = []
        values = sw.grid()
        for v in values:
            node[path[-1]] = float(v)
            specs.append(_FIELD_ADAPTER.validate_python(base).to_spec())
        keys = {s.structure_key() for s in specs}
        if len(keys) != 1:
            raise ValueError("sweep must keep the field structure fixed")
        return values, specs


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a JSON config; ``overrides`` replace top-level keys."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw, overrides)


def parse_config(raw, overrides: dict | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "invalid config:\n  " + "\n  ".join(lines)
