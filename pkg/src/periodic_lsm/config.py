"""Experiment configuration: YAML file validated with pydantic.

Schema (unknown keys are rejected at every level)::

    wave:
      k: 1.5               # > 0
      alpha: 0.0           # quasi-momentum; or give theta instead
      theta: null          # incidence angle in (0, pi); sets alpha = k cos(theta)
      period: 6.283185307179586
      trunc: null          # default max(30, ceil(3 k period / 2 pi))
    profile:               # kind: flat | sinusoidal | fourier | piecewise_linear
      kind: sinusoidal
      height: 1.0
      amplitude: 0.3
    dissection:
      impedance_intervals: [[0.0, 3.141592653589793]]
      lambda: 1.0
    solver:
      n_nodes: 256
    data:
      b: null              # default max f + 0.5
      M: null              # default 2 trunc + 1
      noise: 0.01
      seed: 0
    inversion:
      region: {z1_lo: 0.0, z1_hi: null, z2_lo: 0.1, z2_hi: null}
      resolution: [64, 64]
      level: 0.5
    output: out
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .forward import B_MARGIN, DEFAULT_NODES
from .geometry import Dissection, Profile
from .greens import TWO_PI, default_trunc
from .inverse import DEFAULT_LEVEL, STANDOFF, Region


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class WaveCfg(_Strict):
    k: float = Field(gt=0)
    alpha: Optional[float] = None
    theta: Optional[float] = Field(default=None, gt=0, lt=math.pi)
    period: float = Field(default=TWO_PI, gt=0)
    trunc: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _alpha_or_theta(self):
        if self.alpha is not None and self.theta is not None:
            if abs(self.alpha - self.k * math.cos(self.theta)) > 1e-12 * self.k:
                raise ValueError("wave.alpha and wave.theta disagree (need alpha = k cos(theta))")
        return self

    @property
    def alpha_value(self) -> float:
        if self.alpha is not None:
            return self.alpha
        if self.theta is not None:
            return self.k * math.cos(self.theta)
        return 0.0

    @property
    def trunc_value(self) -> int:
        return self.trunc if self.trunc is not None else default_trunc(self.k, self.period)


class FlatCfg(_Strict):
    kind: Literal["flat"]
    height: float = Field(gt=0)


class SinusoidalCfg(_Strict):
    kind: Literal["sinusoidal"]
    height: float
    amplitude: float
    phase: float = 0.0


class FourierCfg(_Strict):
    kind: Literal["fourier"]
    height: float
    cos: list[float] = []
    sin: list[float] = []


class PiecewiseLinearCfg(_Strict):
    kind: Literal["piecewise_linear"]
    vertices: list[tuple[float, float]]


ProfileCfg = Annotated[Union[FlatCfg, SinusoidalCfg, FourierCfg, PiecewiseLinearCfg],
                       Field(discriminator="kind")]


class DissectionCfg(_Strict):
    impedance_intervals: list[tuple[float, float]] = []
    lam: float = Field(default=1.0, gt=0, alias="lambda")


class SolverCfg(_Strict):
    n_nodes: int = Field(default=DEFAULT_NODES, ge=64)

    @model_validator(mode="after")
    def _even(self):
        if self.n_nodes % 2:
            raise ValueError("solver.n_nodes must be even")
        return self


class DataCfg(_Strict):
    b: Optional[float] = None
    M: Optional[int] = Field(default=None, ge=1)
    noise: float = Field(default=0.0, ge=0)
    seed: int = 0


class RegionCfg(_Strict):
    z1_lo: float = 0.0
    z1_hi: Optional[float] = None
    z2_lo: float = 0.1
    z2_hi: Optional[float] = None


class InversionCfg(_Strict):
    region: RegionCfg = RegionCfg()
    resolution: tuple[int, int] = (64, 64)
    level: float = Field(default=DEFAULT_LEVEL, gt=0, lt=1)

    @model_validator(mode="after")
    def _res(self):
        if min(self.resolution) < 1:
            raise ValueError("inversion.resolution entries must be >= 1")
        return self


class ExperimentConfig(_Strict):
    wave: WaveCfg
    profile: ProfileCfg
    dissection: DissectionCfg = DissectionCfg()
    solver: SolverCfg = SolverCfg()
    data: DataCfg = DataCfg()
    inversion: InversionCfg = InversionCfg()
    output: str = "out"

    # -- derived objects ----------------------------------------------------
    def build_profile(self) -> Profile:
        d = self.profile.model_dump()
        kind = d.pop("kind")
        if kind == "fourier":
            d["cos"], d["sin"] = tuple(d["cos"]), tuple(d["sin"])
        if kind == "piecewise_linear":
            d["vertices"] = tuple(tuple(v) for v in d["vertices"])
        return Profile(kind, period=self.wave.period, **d)

    def build_dissection(self) -> Dissection:
        return Dissection(tuple(self.dissection.impedance_intervals), self.dissection.lam, self.wave.period)

    def b_value(self, profile: Profile) -> float:
        return self.data.b if self.data.b is not None else profile.max_height() + B_MARGIN

    def M_value(self) -> int:
        return self.data.M if self.data.M is not None else 2 * self.wave.trunc_value + 1

    def region(self, b: float) -> Region:
        r = self.inversion.region
        return Region(r.z1_lo, self.wave.period if r.z1_hi is None else r.z1_hi,
                      r.z2_lo, b - STANDOFF if r.z2_hi is None else r.z2_hi)

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_physics(cfg: ExperimentConfig) -> None:
    try:
        profile = cfg.build_profile()
        cfg.build_dissection()
    except ValueError as exc:
        raise ConfigError(f"profile/dissection: {exc}") from None
    b = cfg.b_value(profile)
    if b <= profile.max_height():
        raise ConfigError(f"data.b={b} must exceed max f={profile.max_height():.6g}")
    M = cfg.M_value()
    if M < 2 * cfg.wave.trunc_value + 1:
        raise ConfigError(f"data.M={M} is below 2*trunc+1={2 * cfg.wave.trunc_value + 1}")
    reg = cfg.inversion.region
    if reg.z2_hi is not None and reg.z2_hi > b - STANDOFF:
        raise ConfigError(f"inversion.region.z2_hi must stay {STANDOFF} below b={b:.6g}")
    try:
        cfg.region(b)
    except ValueError as exc:
        raise ConfigError(f"inversion.region: {exc}") from None


def parse_config(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None
    _check_physics(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return parse_config(data)
