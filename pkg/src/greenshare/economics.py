"""Operator profits and the linear system over symmetric roaming prices."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Tariffs:
    """Per-operator prices.

    ``service_prices[l][s]`` is the unit price of service ``s`` (MU per
    user), ``energy_prices[l]`` the grid price (MU/Wh) and
    ``fixed_revenue[l]`` the subscription revenue term.
    """

    service_prices: tuple[tuple[float, ...], ...]
    energy_prices: tuple[float, ...]
    fixed_revenue: tuple[float, ...]

    def __post_init__(self):
        flat = [p for row in self.service_prices for p in row]
        if any(p < 0 for p in flat) or any(p < 0 for p in self.energy_prices):
            raise ValueError("prices must be non-negative")


def price_pairs(group: Sequence[int]) -> list[tuple[int, int]]:
    """Unordered operator pairs of ``group``, one roaming price each."""
    return list(combinations(sorted(group), 2))


def service_revenue(op: int, users: Sequence[float], tariffs: Tariffs) -> float:
    return float(np.dot(users, tariffs.service_prices[op]))


@dataclass(frozen=True)
class Profit:
    """Profit split into the operating part and the fixed revenue.

    Keeping the fixed revenue apart lets profitability margins cancel it
    exactly instead of up to rounding.
    """

    operating: float
    fixed: float = 0.0

    @property
    def total(self) -> float:
        return self.operating + self.fixed

    def __float__(self) -> float:
        return self.total


def profit_parts(op: int, users: Sequence[float], energy_wh: float, tariffs: Tariffs) -> Profit:
    operating = service_revenue(op, users, tariffs) - tariffs.energy_prices[op] * energy_wh
    return Profit(operating, float(tariffs.fixed_revenue[op]))


def profit_noncollab(op: int, users: Sequence[float], energy_wh: float, tariffs: Tariffs) -> float:
    """Standalone profit: service revenue + fixed revenue - energy cost."""
    return profit_parts(op, users, energy_wh, tariffs).total


@dataclass(frozen=True)
class AffineProfit:
    """Collaborative profit ``constant + coeffs . p`` over the group's price pairs."""

    operator: int
    operating: float
    coeffs: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    fixed: float = 0.0

    @property
    def constant(self) -> float:
        return self.operating + self.fixed

    def __call__(self, prices) -> float:
        return float(self.constant + np.dot(self.coeffs, np.asarray(prices, dtype=float)))


def profit_collab_affine(
    op: int,
    group: Sequence[int],
    users: Sequence[float],
    energy_wh: float,
    roamed: np.ndarray,
    tariffs: Tariffs,
) -> AffineProfit:
    """Profit of ``op`` inside ``group`` as an affine function of the prices.

    ``roamed[t, l]`` is the number of users of operator ``t`` hosted by BSs of
    operator ``l``. The coefficient on pair (t, l) is the net roamed-in count.
    """
    pairs = price_pairs(group)
    coeffs = np.zeros(len(pairs))
    for k, (i, j) in enumerate(pairs):
        if op == i:
            other = j
        elif op == j:
            other = i
        else:
            continue
        coeffs[k] = float(roamed[other, op]) - float(roamed[op, other])
    parts = profit_parts(op, users, energy_wh, tariffs)
    return AffineProfit(op, parts.operating, coeffs, tuple(pairs), parts.fixed)


@dataclass(frozen=True)
class ConstraintSystem:
    """Profitability rows ``A p <= b``, one per operator."""

    A: np.ndarray
    b: np.ndarray
    operators: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]


def margin(affine: AffineProfit, baseline) -> float:
    """Constant of ``affine`` minus ``baseline`` (a float or a :class:`Profit`)."""
    if isinstance(baseline, Profit) and baseline.fixed == affine.fixed:
        return affine.operating - baseline.operating
    return affine.constant - float(baseline)


def build_constraint_system(affines: Sequence[AffineProfit], baselines) -> ConstraintSystem:
    """Row l reads ``-coeffs_l . p <= constant_l - baseline_l``."""
    if len(affines) != len(baselines):
        raise ValueError("need one baseline per operator")
    if not affines:
        raise ValueError("empty group")
    A = np.vstack([-a.coeffs for a in affines]) + 0.0
    b = np.array([margin(a, base) for a, base in zip(affines, baselines)], dtype=float)
    return ConstraintSystem(A, b, tuple(a.operator for a in affines), affines[0].pairs)
