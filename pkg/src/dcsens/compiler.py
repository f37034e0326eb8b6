"""Compile an influence diagram into a decision circuit by variable elimination.

Each variable contributes a family factor whose entries are ``lambda * theta``
products. Eliminating a chance variable multiplies the factors that mention it
and sums over its outcomes; eliminating a decision does the same with a max
node per information-set configuration. Identical subcircuits are shared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .model import DiagramError, InfluenceDiagram

CONSTANT, INDICATOR, PARAMETER, META = "constant", "indicator", "parameter", "meta"
SUM, PRODUCT, MAX = "sum", "product", "max"
LEAF_KINDS = (CONSTANT, INDICATOR, PARAMETER, META)


@dataclass(frozen=True)
class Node:
    kind: str
    children: tuple[int, ...] = ()
    variable: str | None = None
    outcome: int | None = None
    config: int | None = None
    value: float = 0.0
    meta: str | None = None
    gates: tuple[int, ...] = ()  # max nodes: the theta_{d|cfg} node of each alternative

    @property
    def is_leaf(self) -> bool:
        return self.kind in LEAF_KINDS

    def label(self) -> str:
        if self.kind == CONSTANT:
            return f"{self.value:g}"
        if self.kind == INDICATOR:
            return f"λ {self.variable}={self.outcome}"
        if self.kind == PARAMETER:
            return f"θ {self.variable}={self.outcome}|{self.config}"
        if self.kind == META:
            return f"τ {self.meta}"
        if self.kind == MAX:
            return f"max {self.variable}|{self.config}"
        return "+" if self.kind == SUM else "×"


@dataclass(frozen=True)
class DecisionCircuit:
    nodes: tuple[Node, ...]
    root: int
    diagram: InfluenceDiagram
    order: tuple[str, ...]
    indicators: dict[tuple[str, int], int] = field(default_factory=dict)
    parameters: dict[tuple[str, int, int], int] = field(default_factory=dict)
    metas: dict[str, int] = field(default_factory=dict)
    max_nodes: dict[tuple[str, int], int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return sum(len(n.children) for n in self.nodes)

    def context(self, max_id: int) -> tuple[str, int]:
        n = self.nodes[max_id]
        return n.variable, n.config


class _Builder:
    def __init__(self):
        self.nodes: list[Node] = []
        self._cache: dict[tuple, int] = {}

    def add(self, node: Node) -> int:
        key = (node.kind, node.children, node.variable, node.outcome, node.config, node.value, node.meta, node.gates)
        idx = self._cache.get(key)
        if idx is None:
            idx = len(self.nodes)
            self.nodes.append(node)
            self._cache[key] = idx
        return idx

    def const(self, value: float) -> int:
        return self.add(Node(CONSTANT, value=float(value)))

    def product(self, children: Sequence[int]) -> int:
        if len(children) == 1:
            return children[0]
        return self.add(Node(PRODUCT, tuple(children)))


@dataclass
class _Factor:
    scope: tuple[str, ...]
    table: dict[tuple[int, ...], int]


def _stages(d: InfluenceDiagram) -> dict[str, int]:
    """Elimination stage per variable; a legal order never increases the stage.

    With decisions ``D1..Dn`` in temporal order, chance variables first observed
    by ``D(j+1)`` get stage ``2j``, ``Dj`` gets ``2j - 1``, and everything never
    observed gets ``2n``.
    """
    order = d.decision_order()
    n = len(order)
    stage: dict[str, int] = {}
    for j, dec in enumerate(order):
        stage[dec] = 2 * j + 1
    for j, dec in enumerate(order):
        for p in d.decisions[dec].parents:
            if p not in stage:
                stage[p] = 2 * j
    for v in d.variables:
        stage.setdefault(v, 2 * n)
    return stage


def is_legal_order(d: InfluenceDiagram, order: Sequence[str]) -> bool:
    if sorted(order) != sorted(d.variables):
        return False
    stage = _stages(d)
    return all(stage[a] >= stage[b] for a, b in zip(order, order[1:]))


def default_order(d: InfluenceDiagram) -> list[str]:
    """Min-fill elimination order within the information-constraint stages; ties broken by id."""
    stage = _stages(d)
    adj: dict[str, set[str]] = {v: set() for v in d.variables}
    for v in d.variables:
        family = (v, *d.parents(v))
        for a, b in itertools.combinations(family, 2):
            adj[a].add(b)
            adj[b].add(a)
    remaining = set(d.variables)
    order = []
    while remaining:
        top = max(stage[v] for v in remaining)

        def fill(v):
            nb = sorted(adj[v] & remaining)
            return sum(1 for a, b in itertools.combinations(nb, 2) if b not in adj[a])

        v = min((v for v in remaining if stage[v] == top), key=lambda v: (fill(v), v))
        nb = adj[v] & remaining
        for a, b in itertools.combinations(sorted(nb), 2):
            adj[a].add(b)
            adj[b].add(a)
        remaining.remove(v)
        order.append(v)
    return order


def compile_diagram(d: InfluenceDiagram, order: Sequence[str] | None = None) -> DecisionCircuit:
    """Compile ``d`` into a :class:`DecisionCircuit` along elimination ``order``."""
    if order is None:
        order = default_order(d)
    order = list(order)
    if not is_legal_order(d, order):
        raise DiagramError(f"illegal elimination order {order}: it violates the information constraints")

    b = _Builder()
    indicators: dict[tuple[str, int], int] = {}
    parameters: dict[tuple[str, int, int], int] = {}
    metas: dict[str, int] = {}
    max_nodes: dict[tuple[str, int], int] = {}
    position = {v: i for i, v in enumerate(d.variables)}

    for v in d.variables:
        for x in range(d.card(v)):
            indicators[(v, x)] = b.add(Node(INDICATOR, variable=v, outcome=x))
    for k, meta in d.meta_parameters.items():
        metas[k] = b.add(Node(META, meta=k, value=meta.reference))
    bound = {m.variable: m for m in d.meta_parameters.values()}
    u_values = d.utility_values() if d.utility is not None else []

    def theta(v: str, x: int, cfg: int) -> int:
        card = d.card(v)
        pos = cfg * card + x
        if v in d.chance:
            meta = bound.get(v)
            if meta is not None and meta.bound(pos):
                scaled = b.product([b.const(meta.c1[pos]), metas[meta.id]])
                node = b.add(Node(SUM, (b.const(meta.c0[pos]), scaled)))
            else:
                node = b.add(Node(PARAMETER, variable=v, outcome=x, config=cfg, value=d.chance[v].cpt[pos]))
        elif v in d.decisions:
            if not d.decisions[v].availability[pos]:
                return b.const(0.0)
            node = b.add(Node(PARAMETER, variable=v, outcome=x, config=cfg, value=1.0))
        else:
            p = u_values[cfg]
            node = b.add(Node(PARAMETER, variable=v, outcome=x, config=cfg, value=p if x == 0 else 1.0 - p))
        parameters[(v, x, cfg)] = node
        return node

    factors: list[_Factor] = []
    for v in d.variables:
        parents = d.parents(v)
        scope = (v, *parents)
        table = {}
        for cfg, pa in enumerate(d.iter_configs(parents)):
            for x in range(d.card(v)):
                table[(x, *pa)] = b.product([indicators[(v, x)], theta(v, x, cfg)])
        factors.append(_Factor(scope, table))

    for var in order:
        related = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        rest = sorted({u for f in related for u in f.scope if u != var}, key=position.__getitem__)
        is_decision = var in d.decisions
        if is_decision:
            info = d.decisions[var].parents
            if set(rest) != set(info):
                raise DiagramError(f"decision {var} eliminated with context {rest}, expected its information set")
        table = {}
        for assignment in itertools.product(*(range(d.card(u)) for u in rest)):
            ctx = dict(zip(rest, assignment))
            branches = []
            for x in range(d.card(var)):
                ctx[var] = x
                branches.append(b.product([f.table[tuple(ctx[u] for u in f.scope)] for f in related]))
            if is_decision:
                cfg = d.config_index(info, ctx)
                gates = tuple(parameters.get((var, x, cfg), b.const(0.0)) for x in range(d.card(var)))
                node = b.add(Node(MAX, tuple(branches), variable=var, config=cfg, gates=gates))
                max_nodes[(var, cfg)] = node
            elif len(branches) == 1:
                node = branches[0]
            else:
                node = b.add(Node(SUM, tuple(branches)))
            table[assignment] = node
        factors.append(_Factor(tuple(rest), table))

    root = b.product([f.table[()] for f in factors])
    return DecisionCircuit(tuple(b.nodes), root, d, tuple(order), indicators, parameters, metas, max_nodes)


def circuit_stats(c: DecisionCircuit) -> dict[str, int]:
    depth = [0] * len(c.nodes)
    for i, n in enumerate(c.nodes):
        if n.children:
            depth[i] = 1 + max(depth[ch] for ch in n.children)
    return {
        "nodes": len(c.nodes),
        "edges": c.size,
        "max_nodes": sum(1 for n in c.nodes if n.kind == MAX),
        "depth": depth[c.root],
    }


def to_dot(c: DecisionCircuit) -> str:
    """Graphviz export; node ids are the circuit's topological indices."""
    lines = ["digraph decision_circuit {", "  rankdir=BT;"]
    for i, n in enumerate(c.nodes):
        shape = "box" if n.is_leaf else "ellipse"
        lines.append(f'  n{i} [label="{n.label()}", shape={shape}];')
    for i, n in enumerate(c.nodes):
        for j, ch in enumerate(n.children):
            tag = f' [label="{c.diagram.variables[n.variable].outcomes[j]}"]' if n.kind == MAX else ""
            lines.append(f"  n{ch} -> n{i}{tag};")
    lines.append(f"  // root n{c.root}")
    lines.append("}")
    return "\n".join(lines) + "\n"
