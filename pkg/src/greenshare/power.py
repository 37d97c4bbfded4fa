"""BS power model, transmit power and grid-energy draw net of local renewables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Assignment

DISTANCE_SCALE = {"km": 1.0, "m": 1000.0}


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class PowerModel:
    """Linear BS power model ``P = a * P_tx + b`` with its QoS constants.

    ``path_loss_const`` is the linear K (0 < K); ``p_bar`` is in watts.
    ``distance_unit`` fixes the unit r is measured in when K is applied.
    """

    a: float = 7.84
    b: float = 71.5
    p_bar: float = dbm_to_w(46.0)
    k_bar: int = 50
    path_loss_const: float = db_to_linear(-128.1)
    eta: float = 3.76
    distance_unit: str = "km"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.b < 0:
            raise ValueError("b must be non-negative")
        if not self.p_bar > 0:
            raise ValueError("p_bar must be positive")
        if self.k_bar < 1:
            raise ValueError("k_bar must be at least 1")
        if not self.path_loss_const > 0:
            raise ValueError("path-loss constant must be positive")
        if not self.eta > 2:
            raise ValueError("path-loss exponent must exceed 2")
        if self.distance_unit not in DISTANCE_SCALE:
            raise ValueError(f"distance_unit must be one of {sorted(DISTANCE_SCALE)}")

    @property
    def distance_factor(self) -> float:
        """Multiplier turning E[r^eta] in km^eta into the model's distance unit."""
        return DISTANCE_SCALE[self.distance_unit] ** self.eta


def transmit_power(counts, factors, p_min_w, model: PowerModel) -> float:
    """Sum over services of ``N * (P_min / K) * E[r^eta]``; factors are in km^eta."""
    counts = np.asarray(counts, dtype=float)
    factors = np.asarray(factors, dtype=float)
    p_min_w = np.broadcast_to(np.asarray(p_min_w, dtype=float), counts.shape)
    return float(np.sum(counts * p_min_w * factors) / model.path_loss_const * model.distance_factor)


def consumed_power(p_tx: float, active: bool, model: PowerModel) -> float:
    if p_tx < 0:
        raise ValueError("transmit power must be non-negative")
    return model.a * p_tx + model.b if active else 0.0


def grid_energy(p: float, dt: float, g: float) -> float:
    if p < 0 or dt < 0 or g < 0:
        raise ValueError("power, duration and renewable energy must be non-negative")
    return max(p * dt - g, 0.0)


@dataclass(frozen=True)
class RenewablePlan:
    """Renewable energy (Wh) per BS plus each operator's budget."""

    per_bs: np.ndarray
    operator_total: np.ndarray
    pooled: bool = False

    def available(self, active: np.ndarray, owners: np.ndarray) -> np.ndarray:
        """RE usable by each BS under ``active``.

        Without pooling an inactive BS's share is lost; with pooling each
        operator's budget is split evenly over its active BSs.
        """
        active = np.asarray(active, dtype=bool)
        if not self.pooled:
            return np.where(active, self.per_bs, 0.0)
        out = np.zeros(active.size)
        for op in np.unique(owners):
            mine = (owners == op) & active
            k = int(mine.sum())
            if k:
                out[mine] = self.operator_total[op] / k
        return out


def equal_split_plan(owners, totals_wh, pooled: bool = False) -> RenewablePlan:
    """Split every operator's RE budget equally over its BSs."""
    owners = np.asarray(owners, dtype=np.int64)
    totals = np.asarray(totals_wh, dtype=float)
    if np.any(totals < 0):
        raise ValueError("renewable budgets must be non-negative")
    n_per = np.bincount(owners, minlength=totals.size)
    per_bs = np.array([totals[o] / n_per[o] for o in owners], dtype=float)
    return RenewablePlan(per_bs, totals, pooled)


@dataclass
class EnergyLedger:
    p_tx: np.ndarray
    power: np.ndarray
    grid: np.ndarray
    renewable_used: np.ndarray
    operator_energy: np.ndarray

    @property
    def total(self) -> float:
        return float(self.operator_energy.sum())


def cell_transmit_powers(assignment: Assignment, p_min_w, model: PowerModel) -> np.ndarray:
    """P_tx of every BS (zero where inactive). ``p_min_w`` is indexed by user class."""
    p_min_w = np.asarray(p_min_w, dtype=float)
    load = assignment.counts * assignment.path_loss * p_min_w[None, :]
    ptx = load.sum(axis=1) / model.path_loss_const * model.distance_factor
    return np.where(assignment.active, ptx, 0.0)


def operator_energy(
    assignment: Assignment,
    activation,
    plan: RenewablePlan,
    model: PowerModel,
    dt: float,
    p_min_w,
) -> EnergyLedger:
    activation = np.asarray(activation, dtype=bool)
    ptx = cell_transmit_powers(assignment, p_min_w, model)
    power = np.where(activation, model.a * ptx + model.b, 0.0)
    g = plan.available(activation, assignment.owners)
    demand = power * dt
    grid = np.maximum(demand - g, 0.0)
    used = np.minimum(demand, g)
    per_op = np.zeros(assignment.n_ops)
    np.add.at(per_op, assignment.owners, grid)
    return EnergyLedger(ptx, power, grid, used, per_op)


OK, POWER_VIOLATION, CAPACITY_VIOLATION = "ok", "power_violation", "capacity_violation"


def check_feasibility(assignment: Assignment, activation, model: PowerModel, p_min_w, ptx=None) -> list[str]:
    """Per-BS status; capacity is reported ahead of power when both fail."""
    activation = np.asarray(activation, dtype=bool)
    if ptx is None:
        ptx = cell_transmit_powers(assignment, p_min_w, model)
    users = assignment.users_per_bs
    out = []
    for j in range(activation.size):
        if not activation[j]:
            out.append(OK)
        elif users[j] > model.k_bar:
            out.append(CAPACITY_VIOLATION)
        elif ptx[j] > model.p_bar:
            out.append(POWER_VIOLATION)
        else:
            out.append(OK)
    return out
