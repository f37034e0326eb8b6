import itertools
import math

import pytest

from dcsens import Strategy, compile_diagram, differentiate_downward, evaluate_upward, fix_strategy, meu_ce
from dcsens.compiler import CONSTANT, LEAF_KINDS, MAX
from dcsens.model import Evidence
from dcsens.oracle import enumerate_strategies, finite_diff, joint_table, oracle_eu, oracle_meu
from dcsens.sweep import MAXIMIZE, SUM_MODE, meta_overrides, strategy_eu, strategy_gradient


def _all_evidence(d, limit=3):
    chance = list(d.chance)[:limit]
    for r in range(len(chance) + 1):
        for vars_ in itertools.combinations(chance, r):
            for combo in itertools.product(*(d.variables[v].outcomes for v in vars_)):
                yield Evidence(dict(zip(vars_, combo)))


def test_two_node_net_p_not_b(two_node_net):
    c = compile_diagram(two_node_net)
    st = evaluate_upward(c, Evidence({"B": "not_b"}), SUM_MODE)
    cpt_w, cpt_b = two_node_net.chance["W"].cpt, two_node_net.chance["B"].cpt
    assert st.root_value == pytest.approx(cpt_w[0] * cpt_b[1] + cpt_w[1] * cpt_b[3], abs=1e-15)


def test_root_and_indicator_partials(two_node_net):
    # root = P(e) and indicator partials = P(x, e) for x not in E
    c = compile_diagram(two_node_net)
    table = joint_table(two_node_net)
    for e in _all_evidence(two_node_net):
        st = differentiate_downward(evaluate_upward(c, e, SUM_MODE))
        mask = table.evidence_mask(e)
        assert st.root_value == pytest.approx(float(table.mass[mask].sum()), abs=1e-12)
        for v in two_node_net.variables:
            if v in e.assignments:
                continue
            for x in range(two_node_net.card(v)):
                ref = float(table.mass[mask & (table.column(v) == x)].sum())
                assert st.partial(c.indicators[(v, x)]) == pytest.approx(ref, abs=1e-12)


def test_root_and_indicator_partials_corpus(small_corpus):
    for d in small_corpus[:15]:
        c = compile_diagram(d)
        table = joint_table(d)
        for s in enumerate_strategies(d)[:4]:
            ov = fix_strategy(c, s)
            w = table.mass * table.strategy_mask(s)
            for e in _all_evidence(d, 2):
                st = differentiate_downward(evaluate_upward(c, e, SUM_MODE, ov))
                mask = table.evidence_mask(e)
                assert st.root_value == pytest.approx(float(w[mask].sum()), abs=1e-9)
                for v in list(d.chance)[:3]:
                    if v in e.assignments:
                        continue
                    ref = float(w[mask & (table.column(v) == 0)].sum())
                    assert st.partial(c.indicators[(v, 0)]) == pytest.approx(ref, abs=1e-9)


def test_chance_only_total_probability(two_node_net, single_node):
    for d in (two_node_net, single_node):
        assert evaluate_upward(compile_diagram(d), Evidence(), SUM_MODE).root_value == pytest.approx(1.0, abs=1e-12)


def test_normal_form_sum_counts_alternatives(mini):
    c = compile_diagram(mini)
    assert evaluate_upward(c, Evidence(), SUM_MODE).root_value == pytest.approx(2.0, abs=1e-12)


def test_mini_umbrella_meu(mini):
    res = meu_ce(compile_diagram(mini))
    assert res.meu == pytest.approx(0.7, abs=1e-12)
    assert res.ce == pytest.approx(70.0, abs=1e-9)
    assert res.strategy == Strategy({"B": (0,)})
    assert res.p_evidence == pytest.approx(1.0, abs=1e-12)


def test_mini_umbrella_strategy_gradient(mini):
    c = compile_diagram(mini)
    e = Evidence().augment()
    leave = strategy_gradient(c, e, Strategy({"B": (1,)}))
    take = strategy_gradient(c, e, Strategy({"B": (0,)}))
    assert leave.partial(c.metas["theta_sun"]) == pytest.approx(1.0, abs=1e-12)
    assert take.partial(c.metas["theta_sun"]) == pytest.approx(0.0, abs=1e-12)


def test_normal_form_fixed_equals_theta_partial(mini):
    # fixing d gives the partial of the unfixed circuit with respect to theta_d
    c = compile_diagram(mini)
    e = Evidence().augment()
    st = differentiate_downward(evaluate_upward(c, e, SUM_MODE))
    for alt in range(2):
        fixed = evaluate_upward(c, e, SUM_MODE, fix_strategy(c, Strategy({"B": (alt,)}))).root_value
        assert fixed == pytest.approx(st.partial(c.parameters[("B", alt, 0)]), abs=1e-12)
        assert fixed == pytest.approx(oracle_eu(mini, Strategy({"B": (alt,)})).joint, abs=1e-12)


def test_fixing_modes_agree(gather):
    c = compile_diagram(gather)
    e = Evidence().augment()
    for s in enumerate_strategies(gather):
        ov = fix_strategy(c, s)
        assert evaluate_upward(c, e, MAXIMIZE, ov).root_value == pytest.approx(
            evaluate_upward(c, e, SUM_MODE, ov).root_value, abs=1e-15)


def test_mode_consistency(small_corpus):
    for d in small_corpus:
        c = compile_diagram(d)
        e = d.evidence.augment()
        res = meu_ce(c, d.evidence)
        for s in enumerate_strategies(d)[:32]:
            fixed = evaluate_upward(c, e, SUM_MODE, fix_strategy(c, s)).root_value
            assert res.root >= fixed - 1e-12
        star = evaluate_upward(c, e, SUM_MODE, fix_strategy(c, res.strategy)).root_value
        assert star == pytest.approx(res.root, abs=1e-12)


def test_meu_against_oracle(small_corpus):
    for d in small_corpus:
        res = meu_ce(compile_diagram(d))
        o = oracle_meu(d)
        assert res.meu == pytest.approx(o.meu, abs=1e-9)
        assert res.strategy.agrees(o.strategy, o.active)


def _leaves(c):
    return [i for i, n in enumerate(c.nodes) if n.kind in LEAF_KINDS and n.kind != CONSTANT]


def test_leaf_partials_finite_differences(small_corpus):
    for d in small_corpus[:10]:
        c = compile_diagram(d)
        e = d.evidence.augment()
        s = enumerate_strategies(d)[-1]
        base = fix_strategy(c, s)
        st = differentiate_downward(evaluate_upward(c, e, SUM_MODE, base))
        for leaf in _leaves(c):
            x0 = st.values[leaf]

            def g(x, leaf=leaf):
                ov = dict(base)
                ov[leaf] = x
                return evaluate_upward(c, e, SUM_MODE, ov).root_value
            assert st.partial(leaf) == pytest.approx(finite_diff(g, x0), abs=1e-6)


def test_downward_conservation(gather):
    c = compile_diagram(gather)
    res = meu_ce(c)
    st = res.state
    for i in c.max_nodes.values():
        n = c.nodes[i]
        total = sum(st.partial(g) * st.values[g] for g in n.gates if c.nodes[g].kind != CONSTANT)
        assert total == pytest.approx(st.partial(i) * st.values[i], abs=1e-12)


def test_unreached_leaf_partial_zero(mini):
    c = compile_diagram(mini)
    e = Evidence().augment()
    st = strategy_gradient(c, e, Strategy({"B": (0,)}))
    assert st.partial(c.indicators[("U", 0)]) == pytest.approx(0.7, abs=1e-12)
    # utility parameters of the gated-off "leave" branch (U attributes: B, W)
    for cfg in (2, 3):
        assert st.partial(c.parameters[("U", 0, cfg)]) == 0.0
    assert st.partial(c.parameters[("U", 0, 0)]) == pytest.approx(0.6, abs=1e-12)


def test_ties_lowest_index():
    from dcsens import loads_diagram
    d = loads_diagram("""
format: 1
variables:
  - {id: B, kind: decision, outcomes: [a, b]}
  - {id: U, kind: utility}
decisions:
  - {variable: B, parents: []}
utility:
  attributes: [B]
  values: [50, 50]
  utility: {kind: linear, a: 0.01, b: 0.0}
""")
    res = meu_ce(compile_diagram(d))
    assert res.strategy == Strategy({"B": (0,)})
    assert res.ties


def test_meta_overrides_do_not_mutate(mini):
    c = compile_diagram(mini)
    before = [n.value for n in c.nodes]
    res = meu_ce(c, overrides=meta_overrides(c, {"theta_sun": 0.9}))
    assert res.ce == pytest.approx(90.0, abs=1e-9)
    assert [n.value for n in c.nodes] == before
    assert meu_ce(c).ce == pytest.approx(70.0, abs=1e-9)


def test_evidence_probability(gather):
    c = compile_diagram(gather)
    for e in (Evidence({"W": "rainy"}), Evidence({"R": "rainy"})):
        res = meu_ce(c, e)
        o = oracle_meu(gather, e)
        assert res.p_evidence == pytest.approx(o.p_evidence, abs=1e-12)
        assert res.meu == pytest.approx(o.meu, abs=1e-12)


def test_determinism(gather):
    a = meu_ce(compile_diagram(gather)).state
    b = meu_ce(compile_diagram(gather)).state
    assert a.values == b.values and a.partials == b.partials


def test_strategy_eu_zero_evidence(gather):
    c = compile_diagram(gather)
    s = Strategy({"G": (1,), "B": (0, 0, 0, 0)})
    eu, p_e = strategy_eu(c, Evidence({"R": "rainy"}), s)
    assert p_e == 0.0 and math.isnan(eu)
    assert any(c.nodes[i].kind == MAX for i in c.max_nodes.values())
