"""Brute-force ground truth: strategy enumeration over the full joint table.

Nothing here touches the circuit code; every quantity is a direct sum over
joint instantiations of the chance and decision variables.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import Evidence, InfluenceDiagram, QueryError, Strategy, apply_meta

STRATEGY_CAP = 10 ** 6
JOINT_CAP = 2 ** 24
TIE_TOL = 1e-12


@dataclass
class JointTable:
    """Joint instantiations of all non-utility variables with their chance mass.

    ``mass`` excludes decision factors; :meth:`strategy_mask` selects the rows
    consistent with a strategy, so ``mass * mask`` is the joint under it.
    """

    variables: list[str]
    assignments: np.ndarray  # (rows, len(variables)) outcome indices
    mass: np.ndarray
    values: np.ndarray
    utilities: np.ndarray
    diagram: InfluenceDiagram

    def column(self, var: str) -> np.ndarray:
        return self.assignments[:, self.variables.index(var)]

    def config_rows(self, parents: Sequence[str]) -> np.ndarray:
        idx = np.zeros(len(self.mass), dtype=np.int64)
        for p in parents:
            idx = idx * self.diagram.card(p) + self.column(p)
        return idx

    def evidence_mask(self, e: Evidence) -> np.ndarray:
        mask = np.ones(len(self.mass), dtype=bool)
        for var, outcome in e.assignments.items():
            mask &= self.column(var) == self.diagram.variables[var].outcomes.index(outcome)
        return mask

    def strategy_mask(self, s: Strategy) -> np.ndarray:
        mask = np.ones(len(self.mass), dtype=bool)
        for dec, spec in self.diagram.decisions.items():
            policy = np.asarray(s[dec], dtype=np.int64)
            mask &= self.column(dec) == policy[self.config_rows(spec.parents)]
        return mask


def joint_table(d: InfluenceDiagram) -> JointTable:
    variables = [v for v in d.variables if v != d.utility_variable]
    rows = math.prod(d.card(v) for v in variables)
    if rows > JOINT_CAP:
        raise QueryError(f"joint table of {rows} rows exceeds the oracle cap")
    grids = np.indices([d.card(v) for v in variables]).reshape(len(variables), -1).T if variables else \
        np.zeros((1, 0), dtype=np.int64)
    table = JointTable(variables, grids, np.ones(len(grids)), np.zeros(len(grids)), np.zeros(len(grids)), d)
    for var, spec in d.chance.items():
        cpt = np.asarray(spec.cpt)
        table.mass = table.mass * cpt[table.config_rows(spec.parents) * d.card(var) + table.column(var)]
    if d.utility is not None:
        values = np.asarray(d.utility.values)[table.config_rows(d.utility.attributes)]
        table.values = values
        table.utilities = np.array([d.utility.function(v) for v in values])
    return table


def strategy_count(d: InfluenceDiagram) -> int:
    total = 1
    for dec, spec in d.decisions.items():
        card = d.card(dec)
        for cfg in range(d.n_configs(spec.parents)):
            total *= sum(spec.availability[cfg * card:(cfg + 1) * card])
    return total


def enumerate_strategies(d: InfluenceDiagram, cap: int = STRATEGY_CAP) -> list[Strategy]:
    """Every strategy, first decision (temporal order) most significant."""
    if strategy_count(d) > cap:
        raise QueryError(f"{strategy_count(d)} strategies exceed the enumeration cap {cap}")
    order = d.decision_order()
    per_decision = []
    for dec in order:
        spec = d.decisions[dec]
        card = d.card(dec)
        options = [[a for a in range(card) if spec.availability[cfg * card + a]]
                   for cfg in range(d.n_configs(spec.parents))]
        per_decision.append(list(itertools.product(*options)))
    return [Strategy(dict(zip(order, combo))) for combo in itertools.product(*per_decision)]


@dataclass
class OracleEU:
    eu: float
    p_evidence: float
    joint: float  # P(U=1, e | s)


def oracle_eu(d: InfluenceDiagram, s: Strategy, e: Evidence | None = None,
              table: JointTable | None = None) -> OracleEU:
    e = e if e is not None else d.evidence
    table = table or joint_table(d)
    w = table.mass * table.strategy_mask(s) * table.evidence_mask(e)
    p_e = float(w.sum())
    if p_e <= 0.0:
        raise QueryError("the evidence has probability zero")
    joint = float((w * table.utilities).sum())
    return OracleEU(joint / p_e, p_e, joint)


@dataclass
class OracleMEU:
    meu: float
    ce: float
    strategy: Strategy
    index: int
    p_evidence: float
    active: set[tuple[str, int]]


def active_contexts(d: InfluenceDiagram, s: Strategy, e: Evidence | None = None,
                    table: JointTable | None = None) -> set[tuple[str, int]]:
    """Information states reached with positive probability under ``s`` and ``e``."""
    e = e if e is not None else d.evidence
    table = table or joint_table(d)
    w = table.mass * table.strategy_mask(s) * table.evidence_mask(e)
    out = set()
    for dec, spec in d.decisions.items():
        reach = np.bincount(table.config_rows(spec.parents), weights=w, minlength=d.n_configs(spec.parents))
        out.update((dec, int(cfg)) for cfg in np.nonzero(reach > 1e-15)[0])
    return out


def oracle_meu(d: InfluenceDiagram, e: Evidence | None = None, table: JointTable | None = None) -> OracleMEU:
    """Exhaustive maximization of ``P(U=1, e | s)``; ties go to the lowest strategy index."""
    e = e if e is not None else d.evidence
    table = table or joint_table(d)
    base = table.mass * table.evidence_mask(e)
    wu = base * table.utilities
    best, best_i, best_s = -1.0, -1, None
    for i, s in enumerate(enumerate_strategies(d)):
        joint = float(wu[table.strategy_mask(s)].sum())
        if joint > best + TIE_TOL * max(1.0, abs(best)):
            best, best_i, best_s = joint, i, s
    p_e = float(base[table.strategy_mask(best_s)].sum())
    if p_e <= 0.0:
        raise QueryError("the evidence has probability zero")
    meu = best / p_e
    return OracleMEU(meu, d.utility.function.inverse(meu), best_s, best_i, p_e,
                     active_contexts(d, best_s, e, table))


@dataclass
class OracleVOI:
    meu: float
    meu_pi: float
    voi: float


def oracle_voi(d: InfluenceDiagram, e: Evidence | None, variables: Sequence[str]) -> OracleVOI:
    """Condition on each joint instantiation of ``variables``, re-optimize, weight by its probability."""
    e = e if e is not None else d.evidence
    for var in variables:
        if var not in d.chance:
            raise QueryError(f"{var} is not a chance variable")
        if d.ancestors(var) & set(d.decisions):
            raise QueryError(f"{var} is affected by a decision")
    table = joint_table(d)
    base = oracle_meu(d, e, table)
    free = [v for v in variables if v not in e.assignments]
    w = table.mass * table.strategy_mask(base.strategy)
    p_e = float((w * table.evidence_mask(e)).sum())
    meu_pi = 0.0
    for combo in itertools.product(*(range(d.card(v)) for v in free)):
        ex = e.extend({v: d.variables[v].outcomes[x] for v, x in zip(free, combo)})
        # x has no decision ancestors, so P(x | e) is the same under every strategy
        p_x = float((w * table.evidence_mask(ex)).sum()) / p_e
        if p_x <= 0.0:
            continue
        meu_pi += p_x * oracle_meu(d, ex, table).meu
    u = d.utility.function
    return OracleVOI(base.meu, meu_pi, u.inverse(meu_pi) - u.inverse(base.meu))


def oracle_interval(d: InfluenceDiagram, e: Evidence | None, k: str, step: float = 0.001) -> tuple[float, float]:
    """Largest contiguous run of grid points around the reference where s* is unchanged on active contexts."""
    if step < 1e-4:
        raise QueryError("grid step must be at least 1e-4")
    e = e if e is not None else d.evidence
    tau0 = d.meta_parameters[k].reference
    ref = oracle_meu(d, e)

    def same(tau: float) -> bool:
        probe = oracle_meu(apply_meta(d, k, tau), e)
        return probe.strategy.agrees(ref.strategy, ref.active | probe.active)

    n = int(round(1.0 / step))
    grid = [min(1.0, i * step) for i in range(n + 1)]
    above = [t for t in grid if t > tau0]
    below = [t for t in reversed(grid) if t < tau0]
    hi = lo = tau0
    for t in above:
        if not same(t):
            break
        hi = t
    for t in below:
        if not same(t):
            break
        lo = t
    return lo, hi


def finite_diff(fn: Callable[[float], float], x0: float, h: float = 1e-4) -> float:
    if not 1e-8 <= h <= 1e-2:
        raise ValueError("step h must lie in [1e-8, 1e-2]")
    return (fn(x0 + h) - fn(x0 - h)) / (2 * h)


def oracle_strategy_eus(d: InfluenceDiagram, e: Evidence | None = None) -> list[tuple[Strategy, OracleEU]]:
    table = joint_table(d)
    e = e if e is not None else d.evidence
    return [(s, oracle_eu(d, s, e, table)) for s in enumerate_strategies(d)]


def eu_of_tau(d: InfluenceDiagram, s: Strategy, e: Evidence | None, k: str) -> Callable[[float], float]:
    """``tau -> P(U=1 | e, s)`` with meta-parameter ``k`` set to ``tau``; for finite differences."""
    def fn(tau: float) -> float:
        return oracle_eu(apply_meta(d, k, min(1.0, max(0.0, tau))), s, e).eu
    return fn


def oracle_leaf_eu(d: InfluenceDiagram, s: Strategy, e: Evidence | None,
                   assignment: Mapping[str, str]) -> float:
    """``P(U=1, x, e | s) / P(e | s)`` for an instantiation ``x`` of some chance variables."""
    e = e if e is not None else d.evidence
    table = joint_table(d)
    base = oracle_eu(d, s, e, table)
    ex = e.extend(assignment)
    w = table.mass * table.strategy_mask(s) * table.evidence_mask(ex)
    return float((w * table.utilities).sum()) / base.p_evidence
