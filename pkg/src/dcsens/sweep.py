"""Upward evaluation and downward differentiation of decision circuits.

Circuits are never mutated. Evidence, strategy fixing and meta-parameter
values are applied per sweep through an ``overrides`` map from node id to leaf
value, so one compiled circuit can serve any number of queries.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .compiler import CONSTANT, INDICATOR, MAX, META, PARAMETER, PRODUCT, SUM, DecisionCircuit
from .model import Evidence, QueryError, Strategy, UtilityFunction, check_evidence

MAXIMIZE, SUM_MODE = "maximize", "sum"
TIE_TOL = 1e-12
ACTIVE_TOL = 1e-15


@dataclass
class SweepState:
    circuit: DecisionCircuit
    mode: str
    values: list[float]
    evidence: Evidence
    overrides: dict[int, float]
    choices: dict[int, int] = field(default_factory=dict)
    ties: list[int] = field(default_factory=list)
    partials: list[float] | None = None
    gated: bool = False
    _reach: dict[int, float] | None = field(default=None, repr=False, compare=False)

    @property
    def root_value(self) -> float:
        return self.values[self.circuit.root]

    def partial(self, node: int) -> float:
        if self.partials is None:
            raise QueryError("downward sweep has not been run")
        return self.partials[node]

    def meta_partials(self) -> dict[str, float]:
        return {k: self.partial(i) for k, i in self.circuit.metas.items()}

    def strategy(self) -> Strategy:
        """Policies recorded at the max nodes (maximize-mode sweeps only)."""
        d = self.circuit.diagram
        policies = {}
        for dec, spec in d.decisions.items():
            n = d.n_configs(spec.parents)
            policies[dec] = tuple(self.choices[self.circuit.max_nodes[(dec, cfg)]] for cfg in range(n))
        return Strategy(policies)

    def reach(self) -> dict[int, float]:
        """``P(config, e | s)`` per max node, for the strategy this state is gated to.

        Value times root partial in the plain-evidence circuit: each term of the
        polynomial passes through at most one max node per decision, so this is
        the probability mass reaching that information state.
        """
        if self._reach is None:
            if self.mode == MAXIMIZE and not self.gated:
                raise QueryError("gate the sweep before asking for reach probabilities")
            c = self.circuit
            plain = differentiate_downward(evaluate_upward(c, self.evidence.plain(), SUM_MODE, self.overrides))
            self._reach = {i: plain.values[i] * plain.partials[i] for i in c.max_nodes.values()}
        return self._reach

    def active_contexts(self) -> set[tuple[str, int]]:
        """``(decision, config)`` contexts reached with positive probability."""
        reach = self.reach()
        return {ctx for ctx, i in self.circuit.max_nodes.items() if reach[i] > ACTIVE_TOL}


def meta_overrides(c: DecisionCircuit, taus: Mapping[str, float]) -> dict[int, float]:
    out = {}
    for k, tau in taus.items():
        if k not in c.metas:
            raise QueryError(f"unknown meta-parameter {k}")
        if not 0.0 <= tau <= 1.0:
            raise QueryError(f"meta-parameter value {tau} is outside [0, 1]")
        out[c.metas[k]] = float(tau)
    return out


def fix_strategy(c: DecisionCircuit, s: Strategy) -> dict[int, float]:
    """Decision-parameter overrides that gate every max node to the alternative chosen by ``s``."""
    d = c.diagram
    s.validate(d)
    out = {}
    for (var, x, cfg), node in c.parameters.items():
        if var in d.decisions:
            out[node] = 1.0 if s.choice(var, cfg) == x else 0.0
    return out


def _leaf_value(c: DecisionCircuit, i: int, evidence: Evidence, overrides: Mapping[int, float]) -> float:
    if i in overrides:
        return overrides[i]
    n = c.nodes[i]
    if n.kind == INDICATOR:
        d = c.diagram
        if n.variable in evidence.assignments:
            return 1.0 if d.variables[n.variable].index(evidence.assignments[n.variable]) == n.outcome else 0.0
        if evidence.augmented and n.variable == d.utility_variable:
            return 1.0 if n.outcome == 0 else 0.0
        return 1.0
    return n.value


def evaluate_upward(c: DecisionCircuit, evidence: Evidence | None = None, mode: str = MAXIMIZE,
                    overrides: Mapping[int, float] | None = None) -> SweepState:
    """Bottom-up evaluation; in maximize mode every max node records its argmax.

    Ties (within a relative ``1e-12``) go to the lowest-index available alternative.
    In sum mode max nodes add their children.
    """
    if mode not in (MAXIMIZE, SUM_MODE):
        raise ValueError(f"unknown sweep mode {mode!r}")
    evidence = evidence if evidence is not None else c.diagram.evidence
    check_evidence(c.diagram, evidence)
    overrides = dict(overrides or {})
    values = [0.0] * len(c.nodes)
    choices: dict[int, int] = {}
    ties: list[int] = []
    for i, n in enumerate(c.nodes):
        kind = n.kind
        if kind == PRODUCT:
            v = 1.0
            for ch in n.children:
                v *= values[ch]
        elif kind == SUM or (kind == MAX and mode == SUM_MODE):
            v = 0.0
            for ch in n.children:
                v += values[ch]
        elif kind == MAX:
            live = [a for a, g in enumerate(n.gates) if values[g] > 0.0] or list(range(len(n.children)))
            best = max(values[n.children[a]] for a in live)
            tol = TIE_TOL * max(1.0, abs(best))
            winners = [a for a in live if values[n.children[a]] >= best - tol]
            choices[i] = winners[0]
            if len(winners) > 1:
                ties.append(i)
            v = values[n.children[winners[0]]]
        else:
            v = _leaf_value(c, i, evidence, overrides)
        values[i] = v
    return SweepState(c, mode, values, evidence, overrides, choices, ties)


def gate(state: SweepState) -> SweepState:
    """Zero the decision parameters of non-chosen alternatives and re-evaluate in sum mode."""
    if state.mode != MAXIMIZE:
        raise QueryError("only maximize-mode sweeps can be gated")
    c = state.circuit
    overrides = dict(state.overrides)
    for i, choice in state.choices.items():
        for a, g in enumerate(c.nodes[i].gates):
            if a != choice and c.nodes[g].kind != CONSTANT:
                overrides[g] = 0.0
    fresh = evaluate_upward(c, state.evidence, SUM_MODE, overrides)
    return replace(fresh, mode=MAXIMIZE, choices=dict(state.choices), ties=list(state.ties), gated=True)


def differentiate_downward(state: SweepState, root: int | None = None) -> SweepState:
    """Partials of ``root`` (default: the circuit root) with respect to every node.

    Max nodes are treated as sums. A maximize-mode state is gated first so that
    this is exact. Products pass each child the product of its siblings,
    computed directly so zero-valued children are handled exactly.
    """
    if state.mode == MAXIMIZE and not state.gated:
        state = gate(state)
    c = state.circuit
    root = c.root if root is None else root
    values = state.values
    partials = [0.0] * len(c.nodes)
    partials[root] = 1.0
    for i in range(root, -1, -1):
        g = partials[i]
        if g == 0.0:
            continue
        n = c.nodes[i]
        if n.kind == PRODUCT:
            ch = n.children
            k = len(ch)
            prefix = [1.0] * (k + 1)
            for j in range(k):
                prefix[j + 1] = prefix[j] * values[ch[j]]
            suffix = 1.0
            for j in range(k - 1, -1, -1):
                partials[ch[j]] += g * prefix[j] * suffix
                suffix *= values[ch[j]]
        elif n.kind in (SUM, MAX):
            for ch in n.children:
                partials[ch] += g
    return replace(state, partials=partials)


@dataclass
class MeuResult:
    meu: float
    ce: float
    strategy: Strategy
    p_evidence: float
    root: float
    state: SweepState

    @property
    def ties(self) -> list[int]:
        return self.state.ties

    def active_contexts(self) -> set[tuple[str, int]]:
        return self.state.active_contexts()


def meu_ce(c: DecisionCircuit, evidence: Evidence | None = None, u: UtilityFunction | None = None,
           overrides: Mapping[int, float] | None = None) -> MeuResult:
    """MEU, certain equivalent, optimal strategy and ``P(e)`` from one pair of sweeps."""
    d = c.diagram
    if d.utility is None:
        raise QueryError("the diagram has no utility node")
    u = u or d.utility.function
    evidence = (evidence if evidence is not None else d.evidence).augment()
    state = differentiate_downward(evaluate_upward(c, evidence, MAXIMIZE, overrides))
    uvar = d.utility_variable
    p_e = state.partial(c.indicators[(uvar, 0)]) + state.partial(c.indicators[(uvar, 1)])
    if p_e <= 0.0:
        raise QueryError("the evidence has probability zero")
    g = state.root_value
    meu = g / p_e
    if not -1e-9 <= meu <= 1 + 1e-9:
        raise QueryError(f"internal inconsistency: MEU {meu} is not a probability")
    meu = min(max(meu, 0.0), 1.0)
    return MeuResult(meu, u.inverse(meu), state.strategy(), p_e, g, state)


def strategy_gradient(c: DecisionCircuit, evidence: Evidence | None, s: Strategy,
                      overrides: Mapping[int, float] | None = None) -> SweepState:
    """Sum-mode sweeps with ``s`` fixed; ``.partials`` holds every root partial.

    For a normal-form diagram and single-alternative strategy ``d`` the partial
    at leaf ``v`` is the mixed second derivative of the unfixed circuit with
    respect to ``theta_d`` and ``v``.
    """
    merged = dict(overrides or {})
    merged.update(fix_strategy(c, s))
    evidence = evidence if evidence is not None else c.diagram.evidence
    return differentiate_downward(evaluate_upward(c, evidence, SUM_MODE, merged))


def strategy_eu(c: DecisionCircuit, evidence: Evidence | None, s: Strategy,
                overrides: Mapping[int, float] | None = None) -> tuple[float, float]:
    """``(P(U=1 | e, s), P(e | s))`` for a fixed strategy."""
    merged = dict(overrides or {})
    merged.update(fix_strategy(c, s))
    evidence = evidence if evidence is not None else c.diagram.evidence
    joint = evaluate_upward(c, evidence.augment(), SUM_MODE, merged).root_value
    p_e = evaluate_upward(c, evidence.plain(), SUM_MODE, merged).root_value
    if p_e <= 0.0:
        return float("nan"), p_e
    return joint / p_e, p_e
