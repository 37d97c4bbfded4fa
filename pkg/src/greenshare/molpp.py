"""Equilibrium roaming prices through an aspiration-level game.

Each operator starts by aspiring to its individual best collaborative profit.
A max-min LP finds the prices achieving the largest common fraction of all
aspirations; the worst-served player then lowers its aspiration by bisection
between its standalone profit and its individual optimum, and players that
reach their aspiration leave the game. The loop ends when every aspiration is
met.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .economics import AffineProfit, build_constraint_system, margin
from .lp import LinearProgram, solve

log = logging.getLogger(__name__)

P_MAX = 1e6
BRACKET_FLOOR = 1e-9
TIE_TOL = 1e-12


class InfeasibleGroup(Exception):
    """No roaming prices keep every operator at or above its standalone profit."""


@dataclass
class EquilibriumResult:
    feasible: bool
    prices: np.ndarray | None = None
    lam_hat: float | None = None
    lam: np.ndarray | None = None
    profits: np.ndarray | None = None
    aspirations: np.ndarray | None = None
    optima: np.ndarray | None = None
    iterations: int = 0
    message: str = ""
    history: list = field(default_factory=list, repr=False)


def _lp_failed(out, what):
    raise RuntimeError(f"LP breakdown while solving {what}: {out.message}")


def _bounds(n, p_max):
    return np.zeros(n), np.full(n, float(p_max))


def prices_feasible(affines: Sequence[AffineProfit], baselines, p_max: float = P_MAX) -> bool:
    system = build_constraint_system(affines, baselines)
    n = system.A.shape[1]
    lo, up = _bounds(n, p_max)
    out = solve(LinearProgram(np.zeros(n), system.A, system.b, lo, up))
    if out.status == "failed":
        _lp_failed(out, "price feasibility")
    return out.optimal


def _best_prices(l, affines, system, p_max):
    n = system.A.shape[1]
    lo, up = _bounds(n, p_max)
    out = solve(LinearProgram(affines[l].coeffs, system.A, system.b, lo, up))
    if out.status == "infeasible":
        raise InfeasibleGroup("profitability constraints admit no roaming price")
    if not out.optimal:
        _lp_failed(out, "an individual optimum")
    return out.x


def individual_optimum(l: int, affines: Sequence[AffineProfit], baselines, p_max: float = P_MAX):
    """Best profit of player ``l`` (position in ``affines``) over the feasible price set."""
    x = _best_prices(l, affines, build_constraint_system(affines, baselines), p_max)
    return affines[l](x), x


def _argext(values: np.ndarray, members: list[int], largest: bool) -> int:
    vals = values[members]
    target = vals.max() if largest else vals.min()
    for m, v in zip(members, vals):
        if abs(v - target) <= TIE_TOL * max(1.0, abs(target)):
            return m
    return members[0]


def solve_equilibrium(
    affines: Sequence[AffineProfit],
    baselines,
    tol: float = 1e-6,
    max_iter: int = 200,
    p_max: float = P_MAX,
) -> EquilibriumResult:
    k = len(affines)
    if k < 2:
        raise ValueError("the price game needs at least two operators")
    system = build_constraint_system(affines, baselines)
    n = system.A.shape[1]
    lo, up = _bounds(n, p_max)

    # the game runs on operating profit so fixed revenue cannot influence it
    try:
        optima = np.array([a.operating + a.coeffs @ _best_prices(l, affines, system, p_max)
                           for l, a in enumerate(affines)])
    except InfeasibleGroup as exc:
        return EquilibriumResult(False, message=str(exc))
    fixed = np.array([a.fixed for a in affines])
    const = np.array([a.operating for a in affines])
    base = np.array([a.operating - margin(a, b0) for a, b0 in zip(affines, baselines)])
    C = np.vstack([a.coeffs for a in affines])
    # ratios need positive aspirations
    shift = max(0.0, 1.0 - float(base.min()))
    d = optima + shift
    d_min = base + shift
    d_max = optima + shift
    players = list(range(k))

    # variables: prices (n) then lambda
    A_lp = np.zeros((2 * k, n + 1))
    A_lp[:k, :n] = -C
    A_lp[k:, :n] = -C
    b_base = system.b
    c_lp = np.zeros(n + 1)
    c_lp[-1] = 1.0
    lo_lp = np.append(lo, 0.0)
    up_lp = np.append(up, np.inf)

    result = EquilibriumResult(False, optima=optima + fixed)
    lam_hat = -np.inf
    for it in range(1, max_iter + 1):
        A_lp[:k, -1] = d
        b_lp = np.concatenate([const + shift, b_base])
        out = solve(LinearProgram(c_lp, A_lp, b_lp, lo_lp, up_lp))
        if not out.optimal:
            result.message = f"lambda LP returned {out.status} at iteration {it}"
            result.iterations = it
            return result
        p_hat = out.x[:n]
        lam_hat = out.x[-1]
        profits = const + C @ p_hat
        lam = (profits + shift) / d
        result.history.append((d.copy(), lam_hat))
        log.debug("iter %d lambda=%.9f aspirations=%s", it, lam_hat, d - shift)

        converged = lam_hat >= 1.0 - tol
        if not converged:
            if not players:
                # every player left the game, yet someone fell back below its aspiration
                players = [l for l in range(k) if lam[l] < 1.0 - tol]
            l_max = _argext(lam, players, largest=True)
            l_min = _argext(lam, players, largest=False)
            if lam[l_max] >= 1.0:
                players.remove(l_max)
            if players:
                if lam[l_min] < 1.0:
                    d_max[l_min] = d[l_min]
                else:
                    d_min[l_min] = d[l_min]
                if d_max[l_min] - d_min[l_min] <= BRACKET_FLOOR * max(1.0, abs(d_min[l_min])):
                    d[l_min] = d_min[l_min]
                else:
                    d[l_min] = 0.5 * (d_min[l_min] + d_max[l_min])
        if converged or not players and lam_hat >= 1.0 - tol:
            result.feasible = True
            result.prices = p_hat
            result.lam_hat = float(lam_hat)
            result.lam = lam
            result.profits = profits + fixed
            result.aspirations = d - shift + fixed
            result.iterations = it
            return result

    result.iterations = max_iter
    result.message = f"no equilibrium within {max_iter} iterations (lambda={lam_hat:.9f})"
    log.warning(result.message)
    return result
