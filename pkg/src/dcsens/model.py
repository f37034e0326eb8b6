"""Influence diagrams: variables, tables, meta-parameters, evidence and strategies.

Parent configurations are indexed row-major over the ordered parent list, each
parent's outcomes in declared order (last parent varies fastest). Flat tables
are laid out as ``[config][outcome]`` with the outcome varying fastest.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

ROW_SUM_TOL = 1e-9
CHANCE, DECISION, UTILITY = "chance", "decision", "utility"


class DiagramError(ValueError):
    """A diagram, or one of its parts, violates a structural invariant."""


class QueryError(ValueError):
    """A query's preconditions do not hold for the given diagram or evidence."""


@dataclass(frozen=True)
class Variable:
    id: str
    kind: str
    outcomes: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        if self.kind not in (CHANCE, DECISION, UTILITY):
            raise DiagramError(f"variable {self.id}: unknown kind {self.kind!r}")
        if len(self.outcomes) < 1:
            raise DiagramError(f"variable {self.id}: needs at least one outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise DiagramError(f"variable {self.id}: outcome labels are not distinct")
        if self.kind == UTILITY and len(self.outcomes) != 2:
            raise DiagramError(f"utility variable {self.id} must have exactly two outcomes (U=1 first)")

    @property
    def card(self) -> int:
        return len(self.outcomes)

    def index(self, outcome: str) -> int:
        try:
            return self.outcomes.index(outcome)
        except ValueError:
            raise DiagramError(f"{outcome!r} is not an outcome of {self.id}") from None


@dataclass(frozen=True)
class UtilityFunction:
    """Linear ``a*v + b`` or exponential ``-a*exp(-v/rho) + b``."""

    kind: str
    a: float
    b: float = 0.0
    rho: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "exponential"):
            raise DiagramError(f"unknown utility kind {self.kind!r}")
        if not self.a > 0:
            raise DiagramError("utility parameter a must be positive")
        if self.kind == "exponential" and not (self.rho is not None and self.rho > 0):
            raise DiagramError("exponential utility needs rho > 0")

    def __call__(self, v: float) -> float:
        if self.kind == "linear":
            return self.a * v + self.b
        return -self.a * math.exp(-v / self.rho) + self.b

    def inverse(self, p: float) -> float:
        if self.kind == "linear":
            return (p - self.b) / self.a
        gap = (self.b - p) / self.a
        if gap <= 0:
            raise QueryError(f"utility {p!r} is outside the range of the exponential utility")
        return -self.rho * math.log(gap)

    def derivative(self, v: float) -> float:
        if self.kind == "linear":
            return self.a
        return (self.a / self.rho) * math.exp(-v / self.rho)

    def affine(self, scale: float, shift: float) -> UtilityFunction:
        """The utility ``scale*u + shift``; same preferences for ``scale > 0``."""
        return replace(self, a=self.a * scale, b=self.b * scale + shift)


@dataclass(frozen=True)
class ChanceSpec:
    variable: str
    parents: tuple[str, ...]
    cpt: tuple[float, ...]


@dataclass(frozen=True)
class DecisionSpec:
    variable: str
    parents: tuple[str, ...]
    availability: tuple[int, ...]


@dataclass(frozen=True)
class UtilitySpec:
    variable: str
    attributes: tuple[str, ...]
    values: tuple[float, ...]
    function: UtilityFunction


@dataclass(frozen=True)
class MetaParameter:
    """Affine covariation ``theta[cfg][x] = c0 + c1 * tau`` of one chance variable's CPT."""

    id: str
    variable: str
    c0: tuple[float, ...]
    c1: tuple[float, ...]
    reference: float

    def table(self, tau: float) -> tuple[float, ...]:
        return tuple(a + b * tau for a, b in zip(self.c0, self.c1))

    def bound(self, position: int) -> bool:
        return self.c1[position] != 0.0


@dataclass(frozen=True)
class Evidence:
    """Observed outcomes of chance variables; ``augmented`` appends ``U = 1``."""

    assignments: Mapping[str, str] = field(default_factory=dict)
    augmented: bool = False

    def augment(self) -> Evidence:
        return Evidence(dict(self.assignments), True)

    def plain(self) -> Evidence:
        return Evidence(dict(self.assignments), False)

    def extend(self, values: Mapping[str, str]) -> Evidence:
        merged = dict(self.assignments)
        for var, outcome in values.items():
            if var in merged and merged[var] != outcome:
                raise QueryError(f"conflicting evidence on {var}")
            merged[var] = outcome
        return Evidence(merged, self.augmented)


class Strategy:
    """One available alternative index per decision per parent configuration."""

    def __init__(self, policies: Mapping[str, Sequence[int]]):
        self.policies = {d: tuple(p) for d, p in policies.items()}

    def __getitem__(self, decision: str) -> tuple[int, ...]:
        return self.policies[decision]

    def __eq__(self, other):
        return isinstance(other, Strategy) and self.policies == other.policies

    def __hash__(self):
        return hash(tuple(sorted(self.policies.items())))

    def __repr__(self):
        return f"Strategy({self.policies!r})"

    def choice(self, decision: str, config: int) -> int:
        return self.policies[decision][config]

    def agrees(self, other: Strategy, contexts: Iterable[tuple[str, int]]) -> bool:
        """Equality restricted to the given ``(decision, config)`` contexts."""
        return all(self.choice(d, i) == other.choice(d, i) for d, i in contexts)

    def validate(self, diagram: InfluenceDiagram) -> None:
        if set(self.policies) != set(diagram.decisions):
            raise QueryError("strategy must cover exactly the diagram's decisions")
        for d, spec in diagram.decisions.items():
            policy = self.policies[d]
            card = diagram.card(d)
            if len(policy) != diagram.n_configs(spec.parents):
                raise QueryError(f"strategy for {d} is incomplete over its parent configurations")
            for cfg, alt in enumerate(policy):
                if not 0 <= alt < card or not spec.availability[cfg * card + alt]:
                    raise QueryError(f"strategy selects an unavailable alternative for {d} at configuration {cfg}")

    def describe(self, diagram: InfluenceDiagram) -> dict[str, str]:
        """Readable ``{"B[R=sunny]": "leave"}`` mapping in deterministic order."""
        out = {}
        for d in diagram.decision_order():
            parents = diagram.decisions[d].parents
            var = diagram.variables[d]
            for cfg, assignment in enumerate(diagram.iter_configs(parents)):
                ctx = ",".join(f"{p}={diagram.variables[p].outcomes[o]}" for p, o in zip(parents, assignment))
                key = f"{d}[{ctx}]" if parents else d
                out[key] = var.outcomes[self.policies[d][cfg]]
        return out

    def label(self, diagram: InfluenceDiagram) -> str:
        return ";".join(f"{k}={v}" for k, v in self.describe(diagram).items())


@dataclass(frozen=True)
class InfluenceDiagram:
    """A validated discrete influence diagram (or, without a utility node, a belief network)."""

    variables: dict[str, Variable]
    chance: dict[str, ChanceSpec]
    decisions: dict[str, DecisionSpec]
    utility: UtilitySpec | None
    meta_parameters: dict[str, MetaParameter] = field(default_factory=dict)
    evidence: Evidence = field(default_factory=Evidence)

    def __post_init__(self):
        validate(self)

    # -- indexing -----------------------------------------------------------
    def card(self, var: str) -> int:
        return self.variables[var].card

    def parents(self, var: str) -> tuple[str, ...]:
        if var in self.chance:
            return self.chance[var].parents
        if var in self.decisions:
            return self.decisions[var].parents
        if self.utility is not None and var == self.utility.variable:
            return self.utility.attributes
        raise DiagramError(f"unknown variable {var}")

    def n_configs(self, parents: Sequence[str]) -> int:
        return math.prod(self.card(p) for p in parents)

    def iter_configs(self, parents: Sequence[str]) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(self.card(p)) for p in parents))

    def config_index(self, parents: Sequence[str], assignment: Mapping[str, int]) -> int:
        idx = 0
        for p in parents:
            idx = idx * self.card(p) + assignment[p]
        return idx

    def children(self, var: str) -> list[str]:
        return [v for v in self.variables if var in self.parents(v)]

    def topological_order(self) -> list[str]:
        order, seen = [], set()
        remaining = list(self.variables)
        while remaining:
            for v in remaining:
                if all(p in seen for p in self.parents(v)):
                    order.append(v)
                    seen.add(v)
                    remaining.remove(v)
                    break
            else:
                raise DiagramError("the parent graph has a cycle")
        return order

    def ancestors(self, var: str) -> set[str]:
        out, stack = set(), list(self.parents(var))
        while stack:
            p = stack.pop()
            if p not in out:
                out.add(p)
                stack.extend(self.parents(p))
        return out

    def descendants(self, var: str) -> set[str]:
        out, stack = set(), self.children(var)
        while stack:
            c = stack.pop()
            if c not in out:
                out.add(c)
                stack.extend(self.children(c))
        return out

    def decision_order(self) -> list[str]:
        return [v for v in self.topological_order() if v in self.decisions]

    @property
    def utility_variable(self) -> str | None:
        return self.utility.variable if self.utility else None

    def is_normal_form(self) -> bool:
        return len(self.decisions) == 1 and not next(iter(self.decisions.values())).parents

    def is_belief_network(self) -> bool:
        return self.utility is None

    def utility_values(self) -> list[float]:
        """``u(v(pa(U)))`` per attribute configuration."""
        return [self.utility.function(v) for v in self.utility.values]

    def with_evidence(self, evidence: Evidence) -> InfluenceDiagram:
        return replace(self, evidence=evidence)


def _check_table(label: str, table: Sequence[float], expected: int) -> None:
    if len(table) != expected:
        raise DiagramError(f"{label}: table has {len(table)} entries, expected {expected}")


def _check_rows(label: str, table: Sequence[float], card: int) -> None:
    for start in range(0, len(table), card):
        row = table[start:start + card]
        if any(not (0.0 <= p <= 1.0) or math.isnan(p) for p in row):
            raise DiagramError(f"{label}: probability outside [0, 1] in row {start // card}")
        if abs(sum(row) - 1.0) > ROW_SUM_TOL:
            raise DiagramError(f"{label}: CPT row {start // card} row sum is {sum(row)!r}, not 1")


def validate(d: InfluenceDiagram) -> None:
    """Check every diagram invariant, raising :class:`DiagramError` on the first violation."""
    for vid, var in d.variables.items():
        if vid != var.id:
            raise DiagramError(f"variable key {vid} does not match id {var.id}")
    utilities = [v for v in d.variables.values() if v.kind == UTILITY]
    if len(utilities) > 1:
        raise DiagramError("a diagram has at most one utility node")
    if d.utility is None:
        if utilities:
            raise DiagramError(f"utility variable {utilities[0].id} has no utility section")
        if d.decisions:
            raise DiagramError("a diagram with decisions needs exactly one utility node")
    elif not utilities or utilities[0].id != d.utility.variable:
        raise DiagramError("utility section must refer to the utility variable")

    for vid, var in d.variables.items():
        if var.kind == CHANCE and vid not in d.chance:
            raise DiagramError(f"chance variable {vid} has no CPT")
        if var.kind == DECISION and vid not in d.decisions:
            raise DiagramError(f"decision variable {vid} has no decision entry")
    for section, kind in ((d.chance, CHANCE), (d.decisions, DECISION)):
        for vid in section:
            if vid not in d.variables or d.variables[vid].kind != kind:
                raise DiagramError(f"{vid} is not a declared {kind} variable")

    for vid in d.variables:
        parents = d.parents(vid)
        if len(set(parents)) != len(parents):
            raise DiagramError(f"{vid}: repeated parent")
        for p in parents:
            if p not in d.variables:
                raise DiagramError(f"{vid}: unknown parent {p}")
            if d.utility is not None and p == d.utility.variable:
                raise DiagramError("the utility node cannot have children")
    d.topological_order()  # raises on cycles

    for vid, spec in d.chance.items():
        card = d.card(vid)
        _check_table(f"CPT for {vid}", spec.cpt, d.n_configs(spec.parents) * card)
        _check_rows(f"CPT for {vid}", spec.cpt, card)
    for vid, spec in d.decisions.items():
        card = d.card(vid)
        _check_table(f"availability for {vid}", spec.availability, d.n_configs(spec.parents) * card)
        for cfg in range(d.n_configs(spec.parents)):
            row = spec.availability[cfg * card:(cfg + 1) * card]
            if any(a not in (0, 1) for a in row):
                raise DiagramError(f"availability for {vid} must be 0/1")
            if not any(row):
                raise DiagramError(f"decision {vid} has no available alternative at configuration {cfg}")
    if d.utility is not None:
        u = d.utility
        _check_table("utility values", u.values, d.n_configs(u.attributes))
        for v in u.values:
            p = u.function(v)
            if not (-1e-12 <= p <= 1 + 1e-12):
                raise DiagramError(f"u({v}) = {p} is not a probability")

    seen_vars = set()
    for k, meta in d.meta_parameters.items():
        if k != meta.id:
            raise DiagramError(f"meta-parameter key {k} does not match id {meta.id}")
        if meta.variable not in d.chance:
            raise DiagramError(f"meta-parameter {k} must bind a chance variable")
        if meta.variable in seen_vars:
            raise DiagramError(f"two meta-parameters bind variable {meta.variable}")
        seen_vars.add(meta.variable)
        if not 0.0 <= meta.reference <= 1.0:
            raise DiagramError(f"meta-parameter {k}: reference outside [0, 1]")
        spec = d.chance[meta.variable]
        card = d.card(meta.variable)
        for name, arr in (("c0", meta.c0), ("c1", meta.c1)):
            _check_table(f"meta-parameter {k} {name}", arr, len(spec.cpt))
        for start in range(0, len(spec.cpt), card):
            if abs(sum(meta.c0[start:start + card]) - 1.0) > ROW_SUM_TOL:
                raise DiagramError(f"meta-parameter {k}: c0 row sum is not 1")
            if abs(sum(meta.c1[start:start + card])) > ROW_SUM_TOL:
                raise DiagramError(f"meta-parameter {k}: c1 row sum is not 0")
        for tau in (0.0, 1.0):
            if any(not -ROW_SUM_TOL <= p <= 1 + ROW_SUM_TOL for p in meta.table(tau)):
                raise DiagramError(f"meta-parameter {k}: entry leaves [0, 1] at tau={tau}")
        if any(abs(a - b) > ROW_SUM_TOL for a, b in zip(meta.table(meta.reference), spec.cpt)):
            raise DiagramError(f"meta-parameter {k}: covaried entries differ from the CPT at the reference value")

    _check_no_forgetting(d)
    check_evidence(d, d.evidence)


def _check_no_forgetting(d: InfluenceDiagram) -> None:
    order = d.decision_order()
    for earlier, later in zip(order, order[1:]):
        info = set(d.decisions[later].parents)
        if earlier not in info:
            raise DiagramError(f"no-forgetting violated: decision {later} does not observe earlier decision {earlier}")
        missing = set(d.decisions[earlier].parents) - info
        if missing:
            raise DiagramError(
                f"no-forgetting violated: decision {later} forgets {sorted(missing)} observed by {earlier}")


def check_evidence(d: InfluenceDiagram, e: Evidence) -> None:
    for var, outcome in e.assignments.items():
        if var not in d.variables:
            raise DiagramError(f"evidence on unknown variable {var}")
        if d.variables[var].kind != CHANCE:
            raise DiagramError(f"evidence on {var} is not allowed: only chance variables can be observed")
        d.variables[var].index(outcome)
    if e.augmented and d.utility is None:
        raise DiagramError("augmented evidence needs a utility node")


def make_evidence(d: InfluenceDiagram, assignments: Mapping[str, str] | None = None,
                  augmented: bool = False) -> Evidence:
    e = Evidence(dict(assignments or {}), augmented)
    check_evidence(d, e)
    return e


def apply_meta(d: InfluenceDiagram, k: str, tau: float) -> InfluenceDiagram:
    """Copy of ``d`` with meta-parameter ``k`` set to ``tau`` (and that as its new reference)."""
    if k not in d.meta_parameters:
        raise QueryError(f"unknown meta-parameter {k}")
    if not 0.0 <= tau <= 1.0:
        raise QueryError(f"meta-parameter value {tau} is outside [0, 1]")
    meta = d.meta_parameters[k]
    chance = dict(d.chance)
    chance[meta.variable] = replace(chance[meta.variable], cpt=meta.table(tau))
    metas = dict(d.meta_parameters)
    metas[k] = replace(meta, reference=tau)
    return replace(d, chance=chance, meta_parameters=metas)


def is_normal_form(d: InfluenceDiagram) -> bool:
    return d.is_normal_form()
