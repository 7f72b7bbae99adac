"""Run configurations: JSON documents validated before any computation.

Every document carries ``"schema": "hardysym/1"``; unknown keys are
rejected so that a typo in a sweep fails loudly instead of running the
default.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ParameterError
from .solve import ProblemSpec

SCHEMA = "hardysym/1"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ProblemParams(_Strict):
    N: int = 4
    k: int = 2
    a: float = 0.0
    m: int = 0
    cls: Literal["radial", "biradial", "biradial-equivariant"] = Field("radial", alias="class")
    n: int | None = None
    r_min: float = 1e-3
    r_max: float = 1e3
    flow_tol: float = 1e-5
    newton_tol: float = 1e-9
    max_iter: int = 5000

    def to_spec(self) -> ProblemSpec:
        n = self.n or (1024 if self.cls == "radial" else 128)
        return ProblemSpec(N=self.N, k=self.k, a=self.a, m=self.m, cls=self.cls, n=n,
                           r_min=self.r_min, r_max=self.r_max, flow_tol=self.flow_tol,
                           newton_tol=self.newton_tol, max_iter=self.max_iter)


class _Versioned(_Strict):
    schema_: str = Field(alias="schema")

    @field_validator("schema_")
    @classmethod
    def _known(cls, v):
        if v != SCHEMA:
            raise ValueError(f"unsupported schema {v!r}, expected {SCHEMA!r}")
        return v


class MinimizeConfig(_Versioned):
    problem: ProblemParams = ProblemParams()
    # each entry overrides fields of ``problem``; entries run independently
    sweep: list[dict] = []

    @model_validator(mode="after")
    def _entries_valid(self):
        self.problems()
        return self

    def problems(self) -> list[ProblemParams]:
        if not self.sweep:
            return [self.problem]
        base = self.problem.model_dump(by_alias=True)
        return [ProblemParams.model_validate({**base, **entry}) for entry in self.sweep]


class MorseConfig(_Versioned):
    problem: ProblemParams = ProblemParams(cls="biradial")
    morse_class: Literal["radial", "biradial", "full-via-modes"] = "biradial"
    mode_cutoff: int = Field(4, ge=0)
    # CSV field dump to analyse instead of solving
    field: str | None = None


class VerdictConfig(_Versioned):
    problem: ProblemParams = ProblemParams(cls="biradial")
    defect_tol: float | None = None
    w_tol: float | None = None


class BreakCheckConfig(_Versioned):
    N: int = 4
    a: float = 0.0
    m: int = 0
    k: int = 2


class SphereConfig(_Versioned):
    N: int = 4
    k: int = 2
    n: int = 2048
    nodes: list[int] = [0, 1]
    max_nodes: int = 4
    scan_points: int = Field(64, ge=2)


class TransportConfig(_Versioned):
    N: int = 4
    k: int = 2
    nodes: int = 1
    sphere_n: int = 2048
    plane_n: int = 256
    r_min: float = 1e-3
    r_max: float = 1e3


class ExponentsConfig(_Versioned):
    a: float = 0.0
    N: int = 4
    ell: int = 0


class ReportConfig(_Versioned):
    inputs: list[str]


CONFIGS = {
    "minimize": MinimizeConfig,
    "morse": MorseConfig,
    "verdict": VerdictConfig,
    "break-check": BreakCheckConfig,
    "sphere": SphereConfig,
    "transport": TransportConfig,
    "exponents": ExponentsConfig,
    "report": ReportConfig,
}


def load_config(verb: str, path) -> _Versioned:
    """Parse and validate a JSON config for ``verb``; any defect raises ParameterError."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ParameterError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(verb, raw)


def parse_config(verb: str, raw) -> _Versioned:
    if verb not in CONFIGS:
        raise ParameterError(f"unknown command {verb!r}")
    if not isinstance(raw, dict):
        raise ParameterError("config must be a JSON object")
    if "schema" not in raw:
        raise ParameterError("config is missing the required 'schema' key")
    try:
        return CONFIGS[verb].model_validate(raw)
    except ValidationError as exc:
        raise ParameterError(f"invalid {verb} config: {exc}") from exc
