"""Greedy BS switch-off for standalone and collaborating operators.

The greedy loop starts from the all-on network and, at each step, switches
off the BS whose removal leaves the lowest total grid energy among the
candidates that keep every active cell within its power budget and user
capacity. For a collaborating group the trace is then walked back from its
end until a state saves energy overall and admits roaming prices keeping
each operator at least as profitable as on its own.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .economics import AffineProfit, Profit, margin, price_pairs, profit_collab_affine, profit_parts
from .geometry import Coverage
from .molpp import EquilibriumResult, prices_feasible, solve_equilibrium
from .power import CAPACITY_VIOLATION, OK, POWER_VIOLATION, check_feasibility, operator_energy
from .scenario import Scenario

log = logging.getLogger(__name__)

PROFIT_TOL = 1e-6
EXHAUSTIVE_LIMIT = 16
PRICE_GATES = ("deferred", "strict")
REPRICE = ("selected", "all")
STOP_RULES = ("improving", "exhaust")


class ScenarioInfeasible(Exception):
    """An operator's users cannot be served even with every BS on."""

    def __init__(self, operator: int, reason: str):
        super().__init__(f"operator {operator}: {reason}")
        self.operator = operator
        self.reason = reason


@dataclass
class NetworkState:
    active: np.ndarray
    assignment: object
    ledger: object
    status: list[str]
    energies: dict[int, float]

    @property
    def feasible(self) -> bool:
        return all(s == OK for s in self.status)

    @property
    def reason(self) -> str:
        if any(s == CAPACITY_VIOLATION for s in self.status):
            return "capacity"
        if any(s == POWER_VIOLATION for s in self.status):
            return "power"
        return ""

    @property
    def total(self) -> float:
        return float(sum(self.energies.values()))


class GroupNetwork:
    """The pooled network of a group of operators (one operator when standalone)."""

    def __init__(self, scenario: Scenario, group: Sequence[int], workers: int | None = None):
        self.scenario = scenario
        self.group = tuple(sorted(group))
        if not self.group:
            raise ValueError("empty operator group")
        sites = scenario.sites(self.group)
        self.owners = np.array([op for op, _ in sites], dtype=np.int64)
        self.coverage = Coverage(sites, scenario.grid, scenario.classes(self.group), scenario.power.eta,
                                 scenario.mode, n_ops=scenario.n_ops)
        self.p_min = scenario.p_min(self.group)
        self.plan = scenario.renewable_plan(self.group)
        self.tariffs = scenario.tariffs()
        self.workers = workers

    @property
    def n_bs(self) -> int:
        return self.owners.size

    def users(self, op: int) -> tuple[float, ...]:
        return self.scenario.operators[op].users

    def state(self, active, base: NetworkState | None = None) -> NetworkState:
        active = np.asarray(active, dtype=bool)
        assignment = self.coverage.assign(active, workers=self.workers,
                                          base=None if base is None else base.assignment)
        ledger = operator_energy(assignment, active, self.plan, self.scenario.power, self.scenario.dt, self.p_min)
        status = check_feasibility(assignment, active, self.scenario.power, self.p_min, ptx=ledger.p_tx)
        energies = {op: float(ledger.operator_energy[op]) for op in self.group}
        return NetworkState(active, assignment, ledger, status, energies)

    def affines(self, state: NetworkState) -> list[AffineProfit]:
        return [
            profit_collab_affine(op, self.group, self.users(op), state.energies[op], state.assignment.roamed,
                                 self.tariffs)
            for op in self.group
        ]

    def local_index(self, op: int, j: int) -> int:
        """Group-local index of BS ``j`` of operator ``op``."""
        return int(np.flatnonzero(self.owners == op)[j])


@dataclass
class Baseline:
    """Standalone optimum of one operator."""

    operator: int
    activation: tuple[bool, ...]
    energy: float
    profit: Profit
    path: list[float] = field(default_factory=list)

    @property
    def active_bs(self) -> int:
        return int(sum(self.activation))


def _pick(cands):
    return min(cands, key=lambda c: (c[1].total, c[0]))


def _improves(new: NetworkState, old: NetworkState) -> bool:
    return new.total < old.total - 1e-9 * max(1.0, abs(old.total))


def _check_stop_rule(stop_rule: str) -> None:
    if stop_rule not in STOP_RULES:
        raise ValueError(f"stop_rule must be one of {STOP_RULES}")


def optimize_noncollab(scenario: Scenario, op: int, workers: int | None = None,
                       stop_rule: str = "improving") -> Baseline:
    """Greedy switch-off of one operator's own network under power and capacity limits.

    With ``stop_rule="improving"`` the loop ends once no candidate lowers the
    energy; ``"exhaust"`` keeps switching off while any candidate is feasible.
    The lowest-energy state met along the path is returned.
    """
    _check_stop_rule(stop_rule)
    net = GroupNetwork(scenario, [op], workers)
    state = net.state(np.ones(net.n_bs, dtype=bool))
    if not state.feasible:
        raise ScenarioInfeasible(op, f"{state.reason} limit exceeded with every BS on")
    path = [state]
    while True:
        on = np.flatnonzero(state.active)
        if on.size <= 1:
            break
        cands = []
        for j in on:
            trial = state.active.copy()
            trial[j] = False
            nxt = net.state(trial, base=state)
            if nxt.feasible:
                cands.append((int(j), nxt))
        if not cands:
            break
        nxt = _pick(cands)[1]
        if stop_rule == "improving" and not _improves(nxt, state):
            break
        state = nxt
        path.append(state)
    energies = [s.total for s in path]
    best = path[int(np.argmin(energies))]
    profit = profit_parts(op, net.users(op), best.total, net.tariffs)
    return Baseline(op, tuple(bool(a) for a in best.active), best.total, profit, energies)


def standalone_baselines(scenario: Scenario, workers: int | None = None,
                         stop_rule: str = "improving") -> dict[int, Baseline]:
    return {op: optimize_noncollab(scenario, op, workers, stop_rule) for op in range(scenario.n_ops)}


@dataclass
class Candidate:
    bs: int
    status: str  # feasible | power | capacity | price
    state: NetworkState | None = None
    equilibrium: EquilibriumResult | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


@dataclass
class SleepStep:
    t: int
    removed: int | None
    state: NetworkState
    candidates: list[tuple[int, str, float | None]] = field(default_factory=list)
    equilibrium: EquilibriumResult | None = None

    @property
    def active(self) -> tuple[bool, ...]:
        return tuple(bool(a) for a in self.state.active)

    @property
    def total(self) -> float:
        return self.state.total


@dataclass
class CollaborationOutcome:
    group: tuple[int, ...]
    collaborate: bool
    baselines: dict[int, Baseline]
    activation: tuple[bool, ...] | None = None
    owners: tuple[int, ...] = ()
    prices: dict[tuple[int, int], float] = field(default_factory=dict)
    energies: dict[int, float] = field(default_factory=dict)
    profits: dict[int, float] = field(default_factory=dict)
    equilibrium: EquilibriumResult | None = None
    trace: list[SleepStep] = field(default_factory=list, repr=False)
    chosen_t: int | None = None
    reason: str = ""

    @property
    def baseline_energy(self) -> float:
        return float(sum(self.baselines[op].energy for op in self.group))

    @property
    def total_energy(self) -> float:
        """Group energy: collaborative when collaborating, else the standalone sum."""
        if self.collaborate:
            return float(sum(self.energies.values()))
        return self.baseline_energy

    def active_per_operator(self) -> dict[int, int]:
        if not self.collaborate:
            return {op: self.baselines[op].active_bs for op in self.group}
        owners = np.asarray(self.owners)
        act = np.asarray(self.activation, dtype=bool)
        return {op: int(act[owners == op].sum()) for op in self.group}

    def final_energies(self) -> dict[int, float]:
        if self.collaborate:
            return dict(self.energies)
        return {op: self.baselines[op].energy for op in self.group}

    def final_profits(self) -> dict[int, float]:
        if self.collaborate:
            return dict(self.profits)
        return {op: self.baselines[op].profit.total for op in self.group}


def _baseline_profits(net: GroupNetwork, baselines: dict[int, Baseline]) -> list[Profit]:
    return [baselines[op].profit for op in net.group]


def price_state(net: GroupNetwork, state: NetworkState, baselines: dict[int, Baseline]) -> EquilibriumResult:
    """Equilibrium prices for a fixed activation vector."""
    affines = net.affines(state)
    bases = _baseline_profits(net, baselines)
    if len(affines) == 1:
        ok = margin(affines[0], bases[0]) >= -PROFIT_TOL * (1 + abs(bases[0].total))
        prof = np.array([affines[0].constant])
        return EquilibriumResult(ok, prices=np.zeros(0), lam_hat=1.0 if ok else None, lam=None, profits=prof,
                                 message="" if ok else "standalone profit not reached")
    return solve_equilibrium(affines, bases, p_max=net.scenario.p_max)


def _prices_possible(net: GroupNetwork, state: NetworkState, baselines: dict[int, Baseline]) -> bool:
    affines = net.affines(state)
    bases = _baseline_profits(net, baselines)
    if len(affines) == 1:
        return margin(affines[0], bases[0]) >= -PROFIT_TOL * (1 + abs(bases[0].total))
    return prices_feasible(affines, bases, net.scenario.p_max)


def evaluate_candidate(
    net: GroupNetwork,
    state: NetworkState,
    j: int,
    baselines: dict[int, Baseline],
    price_gate: str = "deferred",
    reprice: str = "selected",
) -> Candidate:
    """Tentatively switch off BS ``j`` (group-local index) and classify the result."""
    if not state.active[j]:
        raise ValueError(f"BS {j} is already off")
    trial = state.active.copy()
    trial[j] = False
    if not trial.any():
        has_users = any(c.total > 0 for c in net.coverage.classes)
        return Candidate(j, "capacity" if has_users else "feasible")
    nxt = net.state(trial, base=state)
    if not nxt.feasible:
        return Candidate(j, nxt.reason, nxt)
    eq = None
    if reprice == "all":
        eq = price_state(net, nxt, baselines)
        if price_gate == "strict" and not eq.feasible:
            return Candidate(j, "price", nxt, eq)
    elif price_gate == "strict" and not _prices_possible(net, nxt, baselines):
        return Candidate(j, "price", nxt)
    return Candidate(j, "feasible", nxt, eq)


def _acceptable(step: SleepStep, base_total: float, baselines: dict[int, Baseline], group) -> bool:
    eq = step.equilibrium
    if not step.state.feasible or eq is None or not eq.feasible:
        return False
    if step.total >= base_total:
        return False
    for k, op in enumerate(group):
        base = baselines[op].profit.total
        if eq.profits[k] < base - PROFIT_TOL * (1 + abs(base)):
            return False
    return True


def _outcome_from(net, step, baselines, trace, t) -> CollaborationOutcome:
    eq = step.equilibrium
    pairs = price_pairs(net.group)
    return CollaborationOutcome(
        group=net.group,
        collaborate=True,
        baselines={op: baselines[op] for op in net.group},
        activation=step.active,
        owners=tuple(int(o) for o in net.owners),
        prices={pair: float(p) for pair, p in zip(pairs, eq.prices)},
        energies=dict(step.state.energies),
        profits={op: float(eq.profits[k]) for k, op in enumerate(net.group)},
        equilibrium=eq,
        trace=trace,
        chosen_t=t,
    )


def optimize_collab(
    scenario: Scenario,
    group: Sequence[int],
    baselines: dict[int, Baseline],
    price_gate: str = "deferred",
    reprice: str = "selected",
    net: GroupNetwork | None = None,
    stop_rule: str = "improving",
) -> CollaborationOutcome:
    """Greedy switch-off over the pooled network of ``group`` followed by the rollback.

    ``price_gate="strict"`` rejects a candidate whose activation vector
    admits no profitable roaming prices; ``"deferred"`` leaves that test to
    the rollback. ``reprice="all"`` runs the price game for every candidate
    instead of only for the recorded states. ``stop_rule`` is as in
    :func:`optimize_noncollab`.
    """
    _check_stop_rule(stop_rule)
    if price_gate not in PRICE_GATES:
        raise ValueError(f"price_gate must be one of {PRICE_GATES}")
    if reprice not in REPRICE:
        raise ValueError(f"reprice must be one of {REPRICE}")
    net = net or GroupNetwork(scenario, group)
    group = net.group
    base_total = float(sum(baselines[op].energy for op in group))
    kept = {op: baselines[op] for op in group}

    if len(group) == 1:
        return CollaborationOutcome(group, False, kept, reason="single operator")

    state = net.state(np.ones(net.n_bs, dtype=bool))
    trace = [SleepStep(0, None, state)]
    if not state.feasible:
        return CollaborationOutcome(group, False, kept, trace=trace,
                                    reason=f"{state.reason} limit exceeded with every BS on")
    if price_gate == "strict" and not _prices_possible(net, state, baselines):
        return CollaborationOutcome(group, False, kept, trace=trace, reason="no profitable roaming price")

    t = 0
    while True:
        on = np.flatnonzero(state.active)
        cands = [evaluate_candidate(net, state, int(j), baselines, price_gate, reprice) for j in on]
        table = [(c.bs, c.status, None if c.state is None else c.state.total) for c in cands]
        trace[-1].candidates = table
        ok = [(c.bs, c) for c in cands if c.feasible and c.state is not None]
        if not ok:
            break
        j, best = min(ok, key=lambda item: (item[1].state.total, item[0]))
        if stop_rule == "improving" and not _improves(best.state, state):
            break
        t += 1
        state = best.state
        trace.append(SleepStep(t, j, state, equilibrium=best.equilibrium))
        log.debug("step %d: BS %d off, total energy %.3f Wh", t, j, state.total)

    for T in range(len(trace) - 1, -1, -1):
        step = trace[T]
        if step.total >= base_total:
            continue
        if step.equilibrium is None:
            step.equilibrium = price_state(net, step.state, baselines)
        if _acceptable(step, base_total, baselines, group):
            return _outcome_from(net, step, baselines, trace, T)
    return CollaborationOutcome(group, False, kept, trace=trace, reason="collaboration not beneficial")


def exhaustive_search(
    scenario: Scenario,
    group: Sequence[int],
    baselines: dict[int, Baseline],
    limit: int = EXHAUSTIVE_LIMIT,
) -> CollaborationOutcome:
    """Minimum-energy activation vector over all 2^N candidates (test oracle)."""
    net = GroupNetwork(scenario, group)
    group = net.group
    if net.n_bs > limit:
        raise ValueError(f"exhaustive search limited to {limit} BSs, group has {net.n_bs}")
    kept = {op: baselines[op] for op in group}
    base_total = float(sum(baselines[op].energy for op in group))
    if len(group) == 1:
        return CollaborationOutcome(group, False, kept, reason="single operator")
    states = []
    for bits in itertools.product((True, False), repeat=net.n_bs):
        if not any(bits):
            continue
        st = net.state(np.array(bits))
        if st.feasible and st.total < base_total:
            states.append(st)
    states.sort(key=lambda s: (s.total, tuple(not a for a in s.active)))
    for st in states:
        if not _prices_possible(net, st, baselines):
            continue
        step = SleepStep(0, None, st, equilibrium=price_state(net, st, baselines))
        if _acceptable(step, base_total, baselines, group):
            return _outcome_from(net, step, baselines, [step], 0)
    return CollaborationOutcome(group, False, kept, reason="no feasible activation saves energy")
