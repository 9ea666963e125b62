"""Run configuration: JSON in, fully resolved and validated model out."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field as PField, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    d: Literal[1, 2] = 2
    N: int = 128
    L: float = PField(8.0, gt=0)

    @model_validator(mode="after")
    def _pow2(self):
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        return self


class SolverSection(_Strict):
    lam: float = 1.0
    delta: float = PField(0.0, ge=0)
    dt: float = PField(1e-3, gt=0)
    T: float = PField(1.0, ge=0)
    scheme: Literal["strang", "lie"] = "strang"
    record_every: int = PField(100, ge=1)


class NoiseSection(_Strict):
    enabled: bool = True
    mollifier: Literal["gaussian", "bump"] = "bump"
    eps: float = PField(0.25, gt=0)
    mode: Literal["spectral", "kernel"] = "spectral"
    radius: float = PField(1.0, gt=0)


class InitialSection(_Strict):
    """Gaussian datum a exp(-|x - x0|^2 / (2 w^2) + i p.x), given for v (= u without noise)."""

    width: float = PField(1.0, gt=0)
    amplitude: float = 1.0
    center: list[float] = [0.0, 0.0]
    momentum: list[float] = [0.0, 0.0]
    variable: Literal["u", "v"] = "v"


class PotentialSection(_Strict):
    """Deterministic potential used when noise is disabled."""

    kind: Literal["none", "harmonic", "gaussian"] = "none"
    strength: float = 1.0
    truncation: Optional[float] = PField(None, gt=0)


class DiagnosticsSection(_Strict):
    mu: float = PField(0.2, ge=0)
    mu0: float = PField(0.3, gt=0)
    norms: list[tuple[Literal["H", "B"], float, float]] = [("H", 1.0, 0.2)]
    dump_snapshots: bool = True


class RenormSection(_Strict):
    eps: list[float] = [0.25]
    bounds: bool = False
    bound_members: int = PField(200, ge=1)
    bound_eps: list[float] = [0.5, 0.25, 0.125, 0.0625, 0.03125]
    alpha: float = 0.25
    bound_mu: float = PField(0.5, gt=0)
    p: float = PField(6.0, ge=1)


class NoiseStatsSection(_Strict):
    n_samples: int = PField(2000, ge=2)
    alpha: float = -1.1
    mu: float = PField(0.1, ge=0)
    resolutions: list[int] = [64, 128, 256]


class ValidateSection(_Strict):
    star_pairs: int = PField(1_000_000, ge=1)
    corpus: int = PField(100, ge=1)
    resolutions: list[int] = [64, 128]
    band: int = PField(6, ge=1)


class ConvergeSection(_Strict):
    study: Literal["eps", "delta"] = "eps"
    values: list[float] = [2.0, 1.0, 0.5, 0.25, 0.125]
    T: float = PField(0.25, ge=0)
    gamma: float = 0.5
    gamma_prime: float = 1.0
    ensemble: int = PField(1, ge=1)


class PlotSection(_Strict):
    input: str = "observables.csv"
    output: str = "plot.dat"
    columns: Optional[list[str]] = None


class RunConfig(_Strict):
    seed: int = PField(0, ge=0, lt=2**64)
    grid: GridConfig = GridConfig()
    solver: SolverSection = SolverSection()
    noise: NoiseSection = NoiseSection()
    initial: InitialSection = InitialSection()
    potential: PotentialSection = PotentialSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    renorm: RenormSection = RenormSection()
    noise_stats: NoiseStatsSection = NoiseStatsSection()
    validate_: ValidateSection = PField(ValidateSection(), alias="validate")
    converge: ConvergeSection = ConvergeSection()
    plot: PlotSection = PlotSection()

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _cross(self):
        dg = self.diagnostics
        if self.grid.d == 2 and dg.mu0 > 1.0 / 3.0:
            raise ValueError(
                "diagnostics.mu0 must satisfy 0 < mu0 <= 1/3 for d = 2 "
                "(weight hypothesis of the 2-D existence result)"
            )
        if not dg.mu < dg.mu0:
            raise ValueError("diagnostics.mu must be < diagnostics.mu0")
        if len(self.initial.center) < self.grid.d or len(self.initial.momentum) < self.grid.d:
            raise ValueError("initial.center and initial.momentum need d entries")
        if not 0 < self.converge.gamma < self.converge.gamma_prime:
            raise ValueError("converge requires 0 < gamma < gamma_prime")
        return self


def _format(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def resolve(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format(exc)}") from None


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return resolve(data)


def to_dict(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True)


def emit(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"
