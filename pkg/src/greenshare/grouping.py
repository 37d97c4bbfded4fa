"""Iterative formation of disjoint collaborating operator groups.

Operators (or already merged groups) are scanned in decreasing order of
energy. The head element tries every other element as a partner, keeps the
partner whose joint optimisation leaves the lowest total energy and merges
with it into a virtual operator; when no partner works the head is closed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .economics import Profit
from .molpp import prices_feasible
from .scenario import Scenario
from .sleeping import Baseline, CollaborationOutcome, GroupNetwork, optimize_collab, standalone_baselines

log = logging.getLogger(__name__)

SCREENS = ("all_active", "none")
REFERENCES = ("current", "standalone")


@dataclass
class GroupOutcome:
    """A closed group; singletons carry their standalone results."""

    members: tuple[int, ...]
    energy: float
    outcome: CollaborationOutcome | None = None
    baselines: dict[int, Baseline] = field(default_factory=dict, repr=False)

    @property
    def collaborative(self) -> bool:
        return self.outcome is not None and self.outcome.collaborate

    @property
    def prices(self) -> dict[tuple[int, int], float]:
        return dict(self.outcome.prices) if self.collaborative else {}

    def energies(self) -> dict[int, float]:
        if self.collaborative:
            return self.outcome.final_energies()
        return {op: self.baselines[op].energy for op in self.members}

    def profits(self) -> dict[int, float]:
        if self.collaborative:
            return self.outcome.final_profits()
        return {op: self.baselines[op].profit.total for op in self.members}

    def active_per_operator(self) -> dict[int, int]:
        if self.collaborative:
            return self.outcome.active_per_operator()
        return {op: self.baselines[op].active_bs for op in self.members}


def pair_feasibility(
    scenario: Scenario,
    group: Sequence[int],
    baselines: dict[int, Baseline],
    net: GroupNetwork | None = None,
) -> bool:
    """Whether some roaming prices keep every member of ``group`` at its
    standalone profit when all of the group's BSs stay on."""
    net = net or GroupNetwork(scenario, group)
    state = net.state(np.ones(net.n_bs, dtype=bool))
    affines = net.affines(state)
    return prices_feasible(affines, [baselines[op].profit for op in net.group], scenario.p_max)


@dataclass
class _Element:
    members: tuple[int, ...]
    energy: float
    outcome: CollaborationOutcome | None = None


def _order(pool: list[_Element]) -> None:
    pool.sort(key=lambda e: (-e.energy, min(e.members)))


def _in_group_baselines(out: CollaborationOutcome) -> dict[int, Baseline]:
    """Members' collaborative energy and profit, used as the reference for further merges."""
    energies, profits = out.final_energies(), out.final_profits()
    refs = {}
    for op in out.group:
        fixed = out.baselines[op].profit.fixed
        refs[op] = Baseline(op, (), energies[op], Profit(profits[op] - fixed, fixed))
    return refs


def identify_groups(
    scenario: Scenario,
    baselines: dict[int, Baseline] | None = None,
    resort: bool = True,
    screen: str = "all_active",
    reference: str = "current",
    price_gate: str = "deferred",
    reprice: str = "selected",
) -> list[GroupOutcome]:
    """Partition the operators into collaborating groups.

    ``resort`` re-sorts the open elements by energy before every scan
    (otherwise the initial order is kept and a merged element takes the
    head's place). ``screen="all_active"`` skips partners whose pooled
    all-on network admits no profitable prices; ``"none"`` sends every pair
    to the full optimisation. With ``reference="current"`` members of a
    merged element must not fall below the energy and profits they already
    reach inside it; ``"standalone"`` compares against the standalone
    optimum throughout.
    """
    if screen not in SCREENS:
        raise ValueError(f"screen must be one of {SCREENS}")
    if reference not in REFERENCES:
        raise ValueError(f"reference must be one of {REFERENCES}")
    baselines = baselines or standalone_baselines(scenario)
    refs = dict(baselines)
    pool = [_Element((op,), baselines[op].energy) for op in range(scenario.n_ops)]
    _order(pool)
    closed: list[_Element] = []
    while pool:
        if resort:
            _order(pool)
        head = pool[0]
        best = None
        for idx in range(1, len(pool)):
            other = pool[idx]
            group = tuple(sorted(head.members + other.members))
            net = GroupNetwork(scenario, group)
            if screen == "all_active" and not pair_feasibility(scenario, group, refs, net):
                log.debug("group %s fails the all-on price screen", group)
                continue
            out = optimize_collab(scenario, group, refs, price_gate=price_gate, reprice=reprice, net=net)
            if not out.collaborate:
                log.debug("group %s: %s", group, out.reason)
                continue
            saving = out.total_energy - head.energy - other.energy
            key = (saving, min(other.members))
            if best is None or key < best[0]:
                best = (key, idx, out)
        if best is None:
            closed.append(pool.pop(0))
            continue
        _, idx, out = best
        merged = _Element(out.group, out.total_energy, out)
        log.info("merging %s and %s (energy %.1f Wh)", head.members, pool[idx].members, merged.energy)
        pool.pop(idx)
        pool[0] = merged
        if reference == "current":
            refs.update(_in_group_baselines(out))
    closed.sort(key=lambda e: min(e.members))
    return [
        GroupOutcome(e.members, e.energy, e.outcome, {op: baselines[op] for op in e.members})
        for e in closed
    ]
