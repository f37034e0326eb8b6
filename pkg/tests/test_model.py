import math

import pytest
from hypothesis import given, strategies as st

from dcsens import DiagramError, QueryError, Strategy, UtilityFunction, apply_meta, is_normal_form, loads_diagram
from dcsens.model import Evidence, make_evidence

from conftest import TWO_NODE_NET

TWO_DECISIONS = """
format: 1
variables:
  - {id: X, kind: chance, outcomes: [a, b]}
  - {id: D1, kind: decision, outcomes: [y, n]}
  - {id: D2, kind: decision, outcomes: [y, n]}
  - {id: U, kind: utility}
chance:
  - {variable: X, parents: [D1], cpt: [0.5, 0.5, 0.2, 0.8]}
decisions:
  - {variable: D1, parents: []}
  - {variable: D2, parents: [%s]}
utility:
  attributes: [X, D2]
  values: [1, 0, 0, 1]
  utility: {kind: linear, a: 1.0, b: 0.0}
"""


def test_smallest_diagram(mini):
    kinds = [v.kind for v in mini.variables.values()]
    assert kinds.count("chance") == 1 and kinds.count("decision") == 1 and kinds.count("utility") == 1


def test_row_sum_error():
    bad = TWO_NODE_NET.replace("cpt: [0.6, 0.4]", "cpt: [0.5, 0.4]")
    with pytest.raises(DiagramError, match="row sum"):
        loads_diagram(bad)


def test_no_forgetting_error():
    with pytest.raises(DiagramError, match="no-forgetting"):
        loads_diagram(TWO_DECISIONS % "X")
    assert loads_diagram(TWO_DECISIONS % "D1, X").decision_order() == ["D1", "D2"]


def test_normal_form(mini, report, gather):
    assert is_normal_form(mini)
    assert not is_normal_form(report)
    assert not is_normal_form(gather)
    assert mini.with_evidence(Evidence()).is_normal_form()
    assert not loads_diagram(TWO_DECISIONS % "D1, X").is_normal_form()


def test_normal_form_with_evidence(report):
    # single parentless decision plus an observation still counts as normal form
    from dataclasses import replace
    dec = replace(report.decisions["B"], parents=(), availability=(1, 1))
    d = replace(report, decisions={"B": dec}, evidence=Evidence({"R": "rainy"}))
    assert d.is_normal_form()


def test_apply_meta(mini):
    d = apply_meta(mini, "theta_sun", 0.3)
    assert d.chance["W"].cpt == pytest.approx((0.3, 0.7), abs=1e-15)
    same = apply_meta(mini, "theta_sun", 0.6)
    assert same.chance["W"].cpt == pytest.approx(mini.chance["W"].cpt, abs=1e-9)
    assert apply_meta(mini, "theta_sun", 1.0).chance["W"].cpt == (1.0, 0.0)
    with pytest.raises(QueryError):
        apply_meta(mini, "theta_sun", 1.5)
    with pytest.raises(QueryError):
        apply_meta(mini, "nope", 0.5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_apply_meta_affine(gather_taus, other):
    from dcsens import load_diagram
    from conftest import DIAGRAMS
    d = load_diagram(DIAGRAMS / "gather_umbrella.yaml")
    a = apply_meta(d, "tau2", gather_taus).chance["R"].cpt
    b = apply_meta(d, "tau2", other).chance["R"].cpt
    mid = apply_meta(d, "tau2", 0.5 * (gather_taus + other)).chance["R"].cpt
    assert all(math.isclose(m, 0.5 * (x + y), abs_tol=1e-15) for m, x, y in zip(mid, a, b))


@given(st.floats(-4, 100))
def test_utility_round_trip(v):
    for u in (UtilityFunction("linear", 0.01, 0.04),
              UtilityFunction("exponential", 1.3075889989309024, 1.3746305205153175, 80.0)):
        assert math.isclose(u.inverse(u(v)), v, abs_tol=1e-9)
        assert u.derivative(v) > 0


def test_utility_rejects_nonincreasing():
    with pytest.raises(DiagramError):
        UtilityFunction("linear", -1.0, 0.0)
    with pytest.raises(DiagramError):
        UtilityFunction("exponential", 1.0, 1.0, None)


def test_evidence_rules(mini):
    with pytest.raises(DiagramError):
        make_evidence(mini, {"B": "take"})
    with pytest.raises(DiagramError):
        make_evidence(mini, {"W": "snow"})
    with pytest.raises(QueryError):
        Evidence({"W": "sun"}).extend({"W": "rain"})
    assert make_evidence(mini, {"W": "sun"}).augment().augmented


def test_strategy_validation(mini, report):
    Strategy({"B": (0,)}).validate(mini)
    with pytest.raises(QueryError):
        Strategy({"B": (0, 1)}).validate(mini)
    with pytest.raises(QueryError):
        Strategy({"B": (2,)}).validate(mini)
    s = Strategy({"B": (1, 0)})
    assert s.describe(report) == {"B[R=sunny]": "leave", "B[R=rainy]": "take"}
    assert s.agrees(Strategy({"B": (1, 1)}), [("B", 0)])
    assert not s.agrees(Strategy({"B": (1, 1)}), [("B", 1)])


def test_meta_validation(mini):
    from dataclasses import replace
    m = mini.meta_parameters["theta_sun"]
    bad = replace(m, reference=0.5)
    with pytest.raises(DiagramError, match="reference"):
        replace(mini, meta_parameters={"theta_sun": bad})
    bad = replace(m, c1=(1.5, -1.5))
    with pytest.raises(DiagramError):
        replace(mini, meta_parameters={"theta_sun": bad})


def test_cycle_rejected():
    cyc = TWO_NODE_NET.replace("{variable: W, parents: [], cpt: [0.6, 0.4]}",
                            "{variable: W, parents: [B], cpt: [0.6, 0.4, 0.6, 0.4]}")
    with pytest.raises(DiagramError):
        loads_diagram(cyc)


def test_availability():
    text = TWO_DECISIONS % "D1, X"
    text = text.replace("{variable: D1, parents: []}", "{variable: D1, parents: [], availability: [0, 0]}")
    with pytest.raises(DiagramError, match="no available alternative"):
        loads_diagram(text)
