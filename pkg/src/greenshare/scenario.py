"""Scenario files: schema, validation, unit conversion and bundled examples.

A scenario is a YAML (or JSON) document. Field names carry their units:
``_km``, ``_h``, ``_w``, ``_dbm``, ``_db``, ``_wh``, ``_mu``. Distances
entering the path-loss law are measured in ``distance_unit`` (km by default).
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .economics import Tariffs
from .geometry import AreaSpec, Point, QuadratureGrid, UserClass, UserDistribution, build_grid, grid_sites
from .power import PowerModel, RenewablePlan, db_to_linear, dbm_to_w


class ScenarioError(ValueError):
    """Scenario file does not match the schema."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AreaConfig(_Model):
    width_km: float = Field(gt=0)
    height_km: float = Field(gt=0)


class PointConfig(_Model):
    x_km: float
    y_km: float


class GridConfig(_Model):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)


class DistributionConfig(_Model):
    kind: Literal["uniform", "gaussian"] = "uniform"
    mean_km: PointConfig | None = None
    variance_km2: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _gaussian_fields(self):
        if self.kind == "gaussian" and (self.mean_km is None or self.variance_km2 is None):
            raise ValueError("gaussian distribution needs mean_km and variance_km2")
        return self


class ServiceConfig(_Model):
    name: str = "default"
    users: float = Field(ge=0)
    price_mu: float = Field(ge=0)
    p_min_dbm: float = -90.0
    distribution: DistributionConfig = DistributionConfig()


class OperatorConfig(_Model):
    name: str
    grid: GridConfig | None = None
    sites: list[PointConfig] | None = None
    energy_price_mu_per_wh: float = Field(ge=0)
    fixed_revenue_mu: float = 0.0
    re_total_wh: float = Field(default=0.0, ge=0)
    re_per_bs_wh: list[float] | None = None
    services: list[ServiceConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _one_layout(self):
        if (self.grid is None) == (self.sites is None):
            raise ValueError("give exactly one of 'grid' or 'sites'")
        if self.sites is not None and not self.sites:
            raise ValueError("'sites' must not be empty")
        if self.re_per_bs_wh is not None and any(g < 0 for g in self.re_per_bs_wh):
            raise ValueError("re_per_bs_wh entries must be non-negative")
        return self


class PowerConfig(_Model):
    a: float = Field(default=7.84, gt=0)
    b_w: float = Field(default=71.5, ge=0)
    p_max_dbm: float = 46.0
    k_bar_users: int = Field(default=50, ge=1)
    path_loss_const_db: float = -128.1
    eta: float = Field(default=3.76, gt=2)


class ScenarioConfig(_Model):
    name: str = "scenario"
    description: str = ""
    area: AreaConfig
    dt_h: float = Field(default=1.0, gt=0)
    resolution_per_km: float = Field(default=50.0, gt=0)
    expectation_mode: Literal["conditional", "literal"] = "conditional"
    distance_unit: Literal["km", "m"] = "km"
    re_pooling: bool = False
    p_max_mu: float = Field(default=1e6, gt=0)
    power: PowerConfig = PowerConfig()
    operators: list[OperatorConfig] = Field(min_length=1)

    @field_validator("operators")
    @classmethod
    def _unique_names(cls, ops):
        names = [o.name for o in ops]
        if len(set(names)) != len(names):
            raise ValueError("operator names must be unique")
        return ops


@dataclass(frozen=True)
class Service:
    name: str
    users: float
    price: float
    p_min_w: float
    dist: UserDistribution


@dataclass(frozen=True)
class Operator:
    name: str
    sites: tuple[Point, ...]
    services: tuple[Service, ...]
    energy_price: float
    fixed_revenue: float
    re_total_wh: float
    re_per_bs_wh: tuple[float, ...]

    @property
    def n_bs(self) -> int:
        return len(self.sites)

    @property
    def users(self) -> tuple[float, ...]:
        return tuple(s.users for s in self.services)


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    area: AreaSpec
    dt: float
    resolution: float
    power: PowerModel
    operators: tuple[Operator, ...]
    mode: str
    re_pooling: bool
    p_max: float

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.config == other.config

    def __hash__(self):
        return hash(self.config.model_dump_json())

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def n_ops(self) -> int:
        return len(self.operators)

    @property
    def grid(self) -> QuadratureGrid:
        return _grid(self.area, self.resolution)

    def tariffs(self) -> Tariffs:
        return Tariffs(
            tuple(tuple(s.price for s in o.services) for o in self.operators),
            tuple(o.energy_price for o in self.operators),
            tuple(o.fixed_revenue for o in self.operators),
        )

    def sites(self, group) -> list[tuple[int, Point]]:
        """(operator, site) for every BS of ``group``, operator-major."""
        return [(op, p) for op in sorted(group) for p in self.operators[op].sites]

    def classes(self, group) -> list[UserClass]:
        return [UserClass(op, s.users, s.dist) for op in sorted(group) for s in self.operators[op].services]

    def p_min(self, group) -> np.ndarray:
        return np.array([s.p_min_w for op in sorted(group) for s in self.operators[op].services])

    def renewable_plan(self, group) -> RenewablePlan:
        group = sorted(group)
        totals = np.zeros(self.n_ops)
        for op in group:
            totals[op] = self.operators[op].re_total_wh
        per_bs = np.array([g for op in group for g in self.operators[op].re_per_bs_wh], dtype=float)
        return RenewablePlan(per_bs, totals, self.re_pooling)

    def global_offset(self, op: int) -> int:
        return sum(o.n_bs for o in self.operators[:op])

    def bs_label(self, op: int, j: int) -> str:
        return f"{self.operators[op].name}#{j}"


@functools.lru_cache(maxsize=8)
def _grid(area: AreaSpec, resolution: float) -> QuadratureGrid:
    return build_grid(area, resolution)


def _dist(cfg: DistributionConfig) -> UserDistribution:
    if cfg.kind == "uniform":
        return UserDistribution("uniform")
    return UserDistribution("gaussian", Point(cfg.mean_km.x_km, cfg.mean_km.y_km), cfg.variance_km2)


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Validate cross-field rules and convert every constant to linear units."""
    area = AreaSpec(config.area.width_km, config.area.height_km)
    pc = config.power
    power = PowerModel(
        a=pc.a,
        b=pc.b_w,
        p_bar=dbm_to_w(pc.p_max_dbm),
        k_bar=pc.k_bar_users,
        path_loss_const=db_to_linear(pc.path_loss_const_db),
        eta=pc.eta,
        distance_unit=config.distance_unit,
    )
    ops = []
    for i, oc in enumerate(config.operators):
        where = f"operators.{i}"
        if oc.grid is not None:
            sites = grid_sites(area, oc.grid.rows, oc.grid.cols)
        else:
            sites = [Point(p.x_km, p.y_km) for p in oc.sites]
        for j, p in enumerate(sites):
            if not area.contains(p):
                raise ScenarioError(f"{where}.sites.{j}: BS at ({p.x}, {p.y}) lies outside the area")
        if oc.re_per_bs_wh is not None:
            if len(oc.re_per_bs_wh) != len(sites):
                raise ScenarioError(f"{where}.re_per_bs_wh: expected {len(sites)} entries")
            if sum(oc.re_per_bs_wh) > oc.re_total_wh + 1e-9:
                raise ScenarioError(f"{where}.re_per_bs_wh: allocations exceed re_total_wh")
            re_split = tuple(float(g) for g in oc.re_per_bs_wh)
        else:
            re_split = tuple(oc.re_total_wh / len(sites) for _ in sites)
        services = tuple(
            Service(s.name, float(s.users), float(s.price_mu), dbm_to_w(s.p_min_dbm), _dist(s.distribution))
            for s in oc.services
        )
        ops.append(Operator(oc.name, tuple(sites), services, oc.energy_price_mu_per_wh,
                            oc.fixed_revenue_mu, oc.re_total_wh, re_split))
    return Scenario(config, area, config.dt_h, config.resolution_per_km, power, tuple(ops),
                    config.expectation_mode, config.re_pooling, config.p_max_mu)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scenario(data: dict) -> Scenario:
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_validation(exc)) from None
    return build_scenario(config)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return parse_scenario(data)


def dump_scenario(scenario: Scenario) -> str:
    data = scenario.config.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False)


def save_scenario(scenario: Scenario, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(scenario.config.model_dump(mode="json", exclude_none=True), indent=2))
    else:
        path.write_text(dump_scenario(scenario))


def with_updates(scenario: Scenario, fn) -> Scenario:
    """Rebuild ``scenario`` after ``fn`` edits a deep copy of its config dict."""
    data = scenario.config.model_dump(mode="json", exclude_none=True)
    fn(data)
    return parse_scenario(data)


BUNDLED = ("two_op_baseline", "two_op_users", "three_op_tableI")


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ScenarioError(f"unknown bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("greenshare") / "scenarios" / f"{name}.yaml"))


def bundled_scenario(name: str) -> Scenario:
    return load_scenario(bundled_path(name))
