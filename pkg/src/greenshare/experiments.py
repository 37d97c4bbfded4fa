"""Experiment orchestration and report emission."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .grouping import GroupOutcome, identify_groups
from .scenario import Scenario, ScenarioError, with_updates
from .sleeping import Baseline, CollaborationOutcome, optimize_collab, standalone_baselines

MODES = ("noncollab", "collab", "group")
CSV_COLUMNS = ("value", "mode", "operator", "E_u_Wh", "E_c_Wh", "P_u_MU", "P_c_MU", "active_bs", "group_id",
               "prices", "status")
DEFAULT_RE_BUDGET_WH = 450.0


@dataclass
class OperatorResult:
    name: str
    energy_u: float
    profit_u: float
    active_u: int
    energy_c: float | None = None
    profit_c: float | None = None
    active_c: int | None = None
    group_id: int | None = None
    status: str = "standalone"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "standalone": {"energy_wh": self.energy_u, "profit_mu": self.profit_u, "active_bs": self.active_u},
            "collaborative": None,
            "group_id": self.group_id,
            "status": self.status,
        }
        if self.energy_c is not None:
            out["collaborative"] = {"energy_wh": self.energy_c, "profit_mu": self.profit_c,
                                    "active_bs": self.active_c}
        return out


@dataclass
class GroupResult:
    group_id: int
    members: tuple[str, ...]
    status: str
    energy_before: float
    energy_after: float
    prices: dict[str, float] = field(default_factory=dict)
    active_bs: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.group_id,
            "members": list(self.members),
            "status": self.status,
            "energy_before_wh": self.energy_before,
            "energy_after_wh": self.energy_after,
            "prices": dict(self.prices),
            "active_bs": dict(self.active_bs),
        }


@dataclass
class Report:
    scenario: str
    mode: str
    operators: list[OperatorResult]
    groups: list[GroupResult] = field(default_factory=list)
    axis: str | None = None
    value: float | None = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "axis": self.axis,
            "value": self.value,
            "operators": [o.to_dict() for o in self.operators],
            "groups": [g.to_dict() for g in self.groups],
        }

    def operator(self, name: str) -> OperatorResult:
        for o in self.operators:
            if o.name == name:
                return o
        raise KeyError(name)


def _pair_label(scenario: Scenario, pair) -> str:
    return f"{scenario.operators[pair[0]].name}-{scenario.operators[pair[1]].name}"


def _standalone_rows(scenario: Scenario, baselines: dict[int, Baseline]) -> list[OperatorResult]:
    return [
        OperatorResult(o.name, baselines[i].energy, baselines[i].profit.total, baselines[i].active_bs)
        for i, o in enumerate(scenario.operators)
    ]


def _apply_group(scenario, rows, gid, members, outcome: CollaborationOutcome | None, groups):
    names = tuple(scenario.operators[op].name for op in members)
    before = float(sum(rows[op].energy_u for op in members))
    if outcome is None or not outcome.collaborate:
        status = "standalone" if len(members) == 1 else "no_collaboration"
        for op in members:
            r = rows[op]
            r.energy_c, r.profit_c, r.active_c = r.energy_u, r.profit_u, r.active_u
            r.group_id, r.status = gid, status
        groups.append(GroupResult(gid, names, status, before, before,
                                  active_bs={scenario.operators[op].name: rows[op].active_u for op in members}))
        return
    energies, profits = outcome.final_energies(), outcome.final_profits()
    active = outcome.active_per_operator()
    for op in members:
        r = rows[op]
        r.energy_c, r.profit_c, r.active_c = energies[op], profits[op], active[op]
        r.group_id, r.status = gid, "collaborating"
    prices = {_pair_label(scenario, pair): p for pair, p in outcome.prices.items()}
    groups.append(GroupResult(gid, names, "collaborating", before, outcome.total_energy, prices,
                              {scenario.operators[op].name: active[op] for op in members}))


def run(scenario: Scenario, mode: str = "collab", price_gate: str = "deferred", reprice: str = "selected",
        **group_options) -> Report:
    """Run one experiment; raises ScenarioInfeasible when an operator cannot serve its users."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    baselines = standalone_baselines(scenario)
    rows = _standalone_rows(scenario, baselines)
    report = Report(scenario.name, mode, rows)
    if mode == "noncollab":
        return report
    if mode == "collab":
        group = tuple(range(scenario.n_ops))
        outcome = optimize_collab(scenario, group, baselines, price_gate=price_gate, reprice=reprice)
        _apply_group(scenario, rows, 0, group, outcome, report.groups)
        return report
    found: list[GroupOutcome] = identify_groups(scenario, baselines, price_gate=price_gate, reprice=reprice,
                                                **group_options)
    for gid, g in enumerate(found):
        _apply_group(scenario, rows, gid, g.members, g.outcome, report.groups)
    return report


def _operator_index(scenario: Scenario, token: str) -> int:
    names = [o.name for o in scenario.operators]
    if token in names:
        return names.index(token)
    if token.isdigit() and 1 <= int(token) <= scenario.n_ops:
        return int(token) - 1
    raise ScenarioError(f"unknown operator {token!r}; use a name ({', '.join(names)}) or a 1-based index")


_AXIS = re.compile(r"^(?:(pi)_(.+)|(n_users)_([^:]+)(?::(.+))?|(beta_re))$")


def parse_axis(scenario: Scenario, axis: str):
    """Resolve ``pi_<op>``, ``n_users_<op>[:<service>]`` or ``beta_re``.

    Operators are given by name or 1-based index, services by name or
    1-based index (default: the first service).
    """
    m = _AXIS.match(axis)
    if not m:
        raise ScenarioError(f"unknown sweep axis {axis!r}; expected pi_<op>, n_users_<op>[:<service>] or beta_re")
    if m.group(1):
        return ("pi", _operator_index(scenario, m.group(2)), None)
    if m.group(3):
        op = _operator_index(scenario, m.group(4))
        services = [s.name for s in scenario.operators[op].services]
        token = m.group(5)
        if token is None:
            svc = 0
        elif token in services:
            svc = services.index(token)
        elif token.isdigit() and 1 <= int(token) <= len(services):
            svc = int(token) - 1
        else:
            raise ScenarioError(f"unknown service {token!r} of operator {scenario.operators[op].name}")
        return ("n_users", op, svc)
    if scenario.n_ops != 2:
        raise ScenarioError("beta_re splits one renewable budget between exactly two operators")
    return ("beta_re", None, None)


def apply_axis(scenario: Scenario, axis: str, value: float, re_budget_wh: float = DEFAULT_RE_BUDGET_WH) -> Scenario:
    kind, op, svc = parse_axis(scenario, axis)

    def edit(data):
        ops = data["operators"]
        if kind == "pi":
            ops[op]["energy_price_mu_per_wh"] = value
        elif kind == "n_users":
            ops[op]["services"][svc]["users"] = value
        else:
            if not 0 <= value <= 100:
                raise ScenarioError(f"beta_re must lie in [0, 100], got {value}")
            share = value / 100.0
            for o, part in zip(ops, (share, 1.0 - share)):
                o["re_total_wh"] = part * re_budget_wh
                o.pop("re_per_bs_wh", None)

    return with_updates(scenario, edit)


def sweep(scenario: Scenario, axis: str, values: Sequence[float], mode: str = "collab",
          re_budget_wh: float = DEFAULT_RE_BUDGET_WH, **options) -> list[Report]:
    """One report per value; collaborative reports carry the standalone figures alongside."""
    parse_axis(scenario, axis)
    if len(values) == 0:
        raise ScenarioError("a sweep needs at least one value")
    reports = []
    for v in values:
        rep = run(apply_axis(scenario, axis, v, re_budget_wh), mode, **options)
        rep.axis, rep.value = axis, v
        reports.append(rep)
    return reports


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def csv_rows(reports: Sequence[Report]):
    for rep in reports:
        prices_by_group = {g.group_id: g.prices for g in rep.groups}
        for o in rep.operators:
            prices = prices_by_group.get(o.group_id, {})
            yield {
                "value": _fmt(rep.value),
                "mode": rep.mode,
                "operator": o.name,
                "E_u_Wh": _fmt(o.energy_u),
                "E_c_Wh": _fmt(o.energy_c),
                "P_u_MU": _fmt(o.profit_u),
                "P_c_MU": _fmt(o.profit_c),
                "active_bs": _fmt(o.active_u if o.active_c is None else o.active_c),
                "group_id": _fmt(o.group_id),
                "prices": ";".join(f"{k}:{_fmt(v)}" for k, v in prices.items()),
                "status": o.status,
            }


def render(reports: Report | Sequence[Report], fmt: str = "json") -> str:
    if isinstance(reports, Report):
        payload = reports.to_dict()
        reports = [reports]
    else:
        reports = list(reports)
        payload = {"runs": [r.to_dict() for r in reports]}
    if fmt == "json":
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(csv_rows(reports))
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def emit(reports: Report | Sequence[Report], fmt: str, path) -> Path:
    path = Path(path)
    path.write_text(render(reports, fmt))
    return path
