"""Run configuration: one JSON document per run, validated before any work starts.

Every section has defaults that reproduce the canonical experiment, so
``{}`` is a valid config for each command.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .reaction_diffusion import SEED_HI, SEED_LO

Method = Literal["euler", "rk4", "rk38"]
EXPERIMENTS = ("solve", "estimate", "train-node", "react-diffuse", "bench")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    t0: float = 0.0
    t1: float = 100.0
    n_steps: int = Field(10000, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        return self


class LvParamsSpec(_Strict):
    alpha: float = Field(1.1, gt=0)
    beta: float = Field(0.4, gt=0)
    gamma: float = Field(0.1, gt=0)
    delta: float = Field(0.4, gt=0)


class LotkaVolterraSpec(_Strict):
    """Explicit parameters, or ``count`` random models when ``params`` is omitted."""

    name: Literal["lotka_volterra"]
    params: Optional[LvParamsSpec] = None
    y0: Optional[list[float]] = Field(None, min_length=2, max_length=2)
    count: int = Field(10, ge=1)


class CompartmentSpec(_Strict):
    """Explicit rates, or ``count`` random models of size ``n``.

    ``k_elim`` alone (without ``k_out``/``k_in``) overrides the elimination
    rate of every random model, e.g. 0 for a closed system.
    """

    name: Literal["compartment"]
    n: int = Field(3, ge=2)
    count: int = Field(10, ge=1)
    k_elim: Optional[float] = Field(None, ge=0)
    k_out: Optional[list[float]] = None
    k_in: Optional[list[float]] = None
    y0: Optional[list[float]] = None

    @model_validator(mode="after")
    def _rates(self):
        if (self.k_out is None) != (self.k_in is None):
            raise ValueError("k_out and k_in must be given together")
        if self.k_out is not None:
            if len(self.k_out) != self.n - 1 or len(self.k_in) != self.n - 1:
                raise ValueError(f"k_out and k_in need n-1 = {self.n - 1} entries")
            if min(self.k_out + self.k_in) < 0:
                raise ValueError("rates must be non-negative")
            if self.k_elim is None:
                raise ValueError("explicit rates need k_elim")
        if self.y0 is not None and len(self.y0) != self.n:
            raise ValueError(f"y0 needs n = {self.n} entries")
        return self


ModelSpec = Union[LotkaVolterraSpec, CompartmentSpec]


class ReferenceSpec(_Strict):
    method: Method = "rk4"
    refine: int = Field(100, ge=1)


class SolveConfig(_Strict):
    experiment: Literal["solve"] = "solve"
    seed: int = 42
    method: Method = "rk38"
    grid: GridSpec = GridSpec()
    model: ModelSpec = Field(LotkaVolterraSpec(name="lotka_volterra"), discriminator="name")
    reference: Optional[ReferenceSpec] = ReferenceSpec()


class ObservationSpec(_Strict):
    samples: int = Field(200, ge=1)
    components: list[int] = [0, 1]


class EstimateModelSpec(_Strict):
    name: Literal["lotka_volterra", "compartment"] = "lotka_volterra"
    truth: list[float] = [1.1, 0.4, 0.1, 0.4]
    y0: list[float] = [10.0, 5.0]


class EstimateConfig(_Strict):
    experiment: Literal["estimate"] = "estimate"
    seed: int = 42
    method: Method = "rk38"
    grid: GridSpec = GridSpec(t0=0.0, t1=20.0, n_steps=2000)
    model: EstimateModelSpec = EstimateModelSpec()
    observations: ObservationSpec = ObservationSpec()
    theta0: Optional[list[float]] = None
    perturbation: float = Field(0.1, ge=0)
    optimizer: Literal["gd", "adam"] = "adam"
    learning_rate: float = Field(0.01, gt=0)
    tol: float = Field(1e-6, gt=0)
    max_iters: int = Field(5000, ge=0)
    log_params: bool = False

    @model_validator(mode="after")
    def _shapes(self):
        p = len(self.model.truth)
        d = len(self.model.y0)
        if self.model.name == "lotka_volterra" and (p != 4 or d != 2):
            raise ValueError("lotka_volterra needs 4 parameters and a 2-component y0")
        if self.model.name == "compartment" and (p != 2 * d - 1 or d < 2):
            raise ValueError("compartment needs 2n-1 parameters for an n-component y0")
        if self.theta0 is not None and len(self.theta0) != p:
            raise ValueError(f"theta0 needs {p} entries")
        if any(c < 0 or c >= d for c in self.observations.components):
            raise ValueError("observation components out of range")
        if self.grid.n_steps % self.observations.samples:
            raise ValueError("observations.samples must divide grid.n_steps so samples lie on the grid")
        return self


class OscillatorSpec(_Strict):
    k: float = Field(1.0, ge=0)
    b: float = Field(0.1, ge=0)
    y0: list[float] = Field([0.99, -0.99], min_length=2, max_length=2)


class TrainNodeConfig(_Strict):
    experiment: Literal["train-node"] = "train-node"
    seed: int = 42
    method: Method = "rk38"
    grid: GridSpec = GridSpec(t0=0.0, t1=30.0, n_steps=100)
    oscillator: OscillatorSpec = OscillatorSpec()
    hidden: int = Field(32, ge=1)
    epochs: int = Field(1000, ge=1)
    learning_rate: float = Field(0.01, gt=0)
    extrapolate_to: float = 60.0

    @model_validator(mode="after")
    def _horizon(self):
        if not self.extrapolate_to > self.grid.t1:
            raise ValueError("extrapolate_to must exceed grid.t1")
        return self


class GrayScottSpec(_Strict):
    D_U: float = Field(0.16, ge=0)
    D_V: float = Field(0.08, ge=0)
    F: float = Field(0.04, ge=0)
    k: float = Field(0.06, ge=0)


class InitialFieldSpec(_Strict):
    kind: Literal["seeded", "uniform"] = "seeded"
    baseline: Literal["zero", "standard"] = "zero"
    U: float = 1.0
    V: float = 0.0


class ReactDiffuseConfig(_Strict):
    experiment: Literal["react-diffuse"] = "react-diffuse"
    seed: int = 42
    method: Method = "rk4"
    grid: GridSpec = GridSpec(t0=0.0, t1=900.0, n_steps=900)
    params: GrayScottSpec = GrayScottSpec()
    nx: int = Field(100, ge=3)
    ny: int = Field(100, ge=3)
    initial: InitialFieldSpec = InitialFieldSpec()
    stride: int = Field(100, ge=1)

    @model_validator(mode="after")
    def _room_for_seed(self):
        if self.initial.kind == "seeded" and min(self.nx, self.ny) <= SEED_HI:
            raise ValueError(f"a {self.nx}x{self.ny} grid cannot hold the seeded square {SEED_LO}..{SEED_HI}")
        return self


class BenchConfig(_Strict):
    experiment: Literal["bench"] = "bench"
    seed: int = 42
    method: Method = "rk38"
    grid: GridSpec = GridSpec()
    compartments: list[int] = [3, 10, 100]
    count: int = Field(10, ge=1)
    repeats: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _sizes(self):
        if not self.compartments or min(self.compartments) < 2:
            raise ValueError("compartments must list sizes >= 2")
        return self


CONFIG_TYPES: dict[str, type[_Strict]] = {
    "solve": SolveConfig,
    "estimate": EstimateConfig,
    "train-node": TrainNodeConfig,
    "react-diffuse": ReactDiffuseConfig,
    "bench": BenchConfig,
}


def parse_config(experiment: str, data: dict, seed: int | None = None) -> _Strict:
    """Validate ``data`` for ``experiment``; ``seed`` overrides the config's seed.

    Raises:
        ConfigError: naming the first offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    data = dict(data)
    data.setdefault("experiment", experiment)
    if data["experiment"] != experiment:
        raise ConfigError("experiment", f"config is for {data['experiment']!r}, command is {experiment!r}")
    if seed is not None:
        data["seed"] = seed
    try:
        return CONFIG_TYPES[experiment].model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        raise ConfigError(loc, err["msg"]) from None


def load_config(experiment: str, path: str | Path | None, seed: int | None = None) -> _Strict:
    if path is None:
        return parse_config(experiment, {}, seed)
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse_config(experiment, data, seed)


def config_hash(cfg: _Strict) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
