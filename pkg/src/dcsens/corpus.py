"""Seeded random influence diagrams for oracle cross-checks."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .model import (
    CHANCE, DECISION, UTILITY, ChanceSpec, DecisionSpec, Evidence, InfluenceDiagram, MetaParameter,
    UtilityFunction, UtilitySpec, Variable,
)
from .oracle import strategy_count


@dataclass(frozen=True)
class CorpusConfig:
    max_variables: int = 10  # binary variables, utility node included
    max_decisions: int = 2
    max_chance_parents: int = 2
    max_attributes: int = 2  # chance attributes of U besides the decisions
    max_meta: int = 2
    max_strategies: int = 512
    evidence_rate: float = 0.3
    normal_form_rate: float = 0.35
    exponential_rate: float = 0.5


def _cpt_row(rng: random.Random) -> list[float]:
    p = rng.uniform(0.05, 0.95)
    return [p, 1.0 - p]


def random_diagram(seed: int, config: CorpusConfig = CorpusConfig()) -> InfluenceDiagram:
    """A valid no-forgetting diagram with binary variables and all-available decisions."""
    rng = random.Random(seed)
    for _ in range(100):
        d = _attempt(rng, config)
        if d is not None and strategy_count(d) <= config.max_strategies:
            return d
    raise RuntimeError(f"seed {seed}: could not draw a diagram within the strategy cap")


def _attempt(rng: random.Random, cfg: CorpusConfig) -> InfluenceDiagram | None:
    normal = rng.random() < cfg.normal_form_rate
    n_dec = 1 if normal else rng.randint(1, cfg.max_decisions)
    n_chance = rng.randint(max(1, n_dec - 1), cfg.max_variables - n_dec - 1)
    # temporal layout: each decision is inserted after some chance variables
    slots = sorted(rng.sample(range(n_chance + 1), n_dec)) if not normal else [0]
    chance_ids = [f"X{i}" for i in range(n_chance)]
    order: list[str] = []
    dec_ids = []
    ci = 0
    for j, slot in enumerate(slots):
        while ci < slot:
            order.append(chance_ids[ci])
            ci += 1
        dec_ids.append(f"D{j}")
        order.append(f"D{j}")
    order.extend(chance_ids[ci:])

    variables = {}
    for v in order:
        kind = DECISION if v.startswith("D") else CHANCE
        outcomes = ("a0", "a1") if kind == DECISION else ("s0", "s1")
        variables[v] = Variable(v, kind, outcomes)
    variables["U"] = Variable("U", UTILITY, ("u", "not_u"))

    decisions: dict[str, DecisionSpec] = {}
    info: list[str] = []
    for j, dec in enumerate(dec_ids):
        if not normal:
            earlier = [v for v in order[:order.index(dec)] if v in chance_ids and v not in info]
            if earlier and (j == 0 or rng.random() < 0.7):
                info.append(rng.choice(earlier))
        parents = tuple(v for v in order if v in info)
        decisions[dec] = DecisionSpec(dec, parents, (1,) * (2 ** (len(parents) + 1)))
        info.append(dec)

    chance = {}
    for v in chance_ids:
        earlier = order[:order.index(v)]
        k = rng.randint(0, min(cfg.max_chance_parents, len(earlier)))
        parents = tuple(sorted(rng.sample(earlier, k), key=order.index))
        cpt = []
        for _ in range(2 ** k):
            cpt.extend(_cpt_row(rng))
        chance[v] = ChanceSpec(v, parents, tuple(cpt))

    n_attr = rng.randint(1, min(cfg.max_attributes, n_chance))
    attrs = set(rng.sample(chance_ids, n_attr)) | set(dec_ids)
    attributes = tuple(v for v in order if v in attrs)
    values = tuple(round(rng.uniform(0.0, 100.0), 3) for _ in range(2 ** len(attributes)))
    if rng.random() < cfg.exponential_rate:
        rho = rng.choice([25.0, 50.0, 100.0])
        # scale into (0.05, 0.95): u(v) = -a exp(-v/rho) + b
        lo, hi = math.exp(-0.0 / rho), math.exp(-100.0 / rho)
        a = 0.9 / (lo - hi)
        b = 0.05 + a * lo
        function = UtilityFunction("exponential", a, b, rho)
    else:
        function = UtilityFunction("linear", 0.009, 0.05)
    utility = UtilitySpec("U", attributes, values, function)

    metas = {}
    # bind meta-parameters to variables that can influence the value, so intervals are informative
    relevant = [v for v in chance_ids if v in attrs or any(v in _ancestors(a, chance, decisions) for a in attrs)]
    n_meta = rng.randint(0, min(cfg.max_meta, len(relevant)))
    for m, var in enumerate(rng.sample(relevant, n_meta)):
        spec = chance[var]
        rows = len(spec.cpt) // 2
        chosen = [r for r in range(rows) if rng.random() < 0.6] or [rng.randrange(rows)]
        tau0 = round(rng.uniform(0.2, 0.8), 3)
        c0, c1, cpt = list(spec.cpt), [0.0] * len(spec.cpt), list(spec.cpt)
        for r in chosen:
            # strong covariation: the row swings across most of [0, 1] as tau does
            p0, p1 = rng.uniform(0.0, 0.15), rng.uniform(0.85, 1.0)
            if rng.random() < 0.5:
                p0, p1 = p1, p0
            c0[2 * r], c1[2 * r] = p0, p1 - p0
            c0[2 * r + 1], c1[2 * r + 1] = 1.0 - p0, p0 - p1
            cpt[2 * r] = c0[2 * r] + c1[2 * r] * tau0
            cpt[2 * r + 1] = c0[2 * r + 1] + c1[2 * r + 1] * tau0
        chance[var] = ChanceSpec(var, spec.parents, tuple(cpt))
        metas[f"tau{m + 1}"] = MetaParameter(f"tau{m + 1}", var, tuple(c0), tuple(c1), tau0)

    evidence = Evidence()
    if rng.random() < cfg.evidence_rate:
        free = [v for v in chance_ids if not (_ancestors(v, chance, decisions) & set(dec_ids))]
        if free:
            var = rng.choice(free)
            evidence = Evidence({var: rng.choice(["s0", "s1"])})
    return InfluenceDiagram(variables, chance, decisions, utility, metas, evidence)


def _ancestors(v: str, chance: dict, decisions: dict) -> set[str]:
    out, stack = set(), list(chance[v].parents if v in chance else decisions[v].parents)
    while stack:
        p = stack.pop()
        if p not in out:
            out.add(p)
            stack.extend(chance[p].parents if p in chance else decisions[p].parents)
    return out


def corpus(n: int = 200, base_seed: int = 20240611, config: CorpusConfig = CorpusConfig()) -> list[InfluenceDiagram]:
    return [random_diagram(base_seed + i, config) for i in range(n)]
