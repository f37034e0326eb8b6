"""Property-based checks over randomly generated diagrams."""
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dcsens import apply_meta, compile_diagram, dump_diagram, loads_diagram, meu_ce
from dcsens.corpus import CorpusConfig, random_diagram
from dcsens.oracle import enumerate_strategies, oracle_eu, oracle_meu
from dcsens.sensitivity import admissible_intervals_extensive, voi_sweep
from dcsens.sweep import meta_overrides, strategy_eu

SMALL = CorpusConfig(max_variables=7, max_strategies=64)
seeds = st.integers(0, 10 ** 6)
fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(seeds)
def test_meu_matches_oracle(seed):
    d = random_diagram(seed, SMALL)
    res = meu_ce(compile_diagram(d))
    o = oracle_meu(d)
    assert res.meu == pytest.approx(o.meu, abs=1e-9)
    assert res.strategy.agrees(o.strategy, o.active)
    assert res.active_contexts() == o.active


@fast
@given(seeds, st.data())
def test_every_strategy_matches_oracle(seed, data):
    d = random_diagram(seed, SMALL)
    c = compile_diagram(d)
    s = data.draw(st.sampled_from(enumerate_strategies(d)))
    eu, p_e = strategy_eu(c, d.evidence, s)
    o = oracle_eu(d, s)
    assert eu == pytest.approx(o.eu, abs=1e-9) and p_e == pytest.approx(o.p_evidence, abs=1e-12)


@fast
@given(seeds, st.floats(0.0, 1.0))
def test_meta_override_equals_apply_meta(seed, tau):
    d = random_diagram(seed, SMALL)
    if not d.meta_parameters:
        return
    k = next(iter(d.meta_parameters))
    c = compile_diagram(d)
    via_override = meu_ce(c, overrides=meta_overrides(c, {k: tau})).meu
    via_rebuild = meu_ce(compile_diagram(apply_meta(d, k, tau))).meu
    assert via_override == pytest.approx(via_rebuild, abs=1e-12)


@fast
@given(seeds)
def test_round_trip_preserves_answers(seed):
    d = random_diagram(seed, SMALL)
    e = loads_diagram(dump_diagram(d))
    assert meu_ce(compile_diagram(d)).meu == meu_ce(compile_diagram(e)).meu


@fast
@given(seeds)
def test_intervals_contain_reference(seed):
    d = random_diagram(seed, SMALL)
    for k, iv in admissible_intervals_extensive(compile_diagram(d)).items():
        t, w = iv.tight, iv.weak
        assert 0.0 <= w.lo <= t.lo <= t.tau0 <= t.hi <= w.hi <= 1.0


@fast
@given(seeds)
def test_voi_nonnegative(seed):
    d = random_diagram(seed, SMALL)
    free = [v for v in d.chance if not (d.ancestors(v) & set(d.decisions))]
    if free:
        res = voi_sweep(compile_diagram(d), None, free[:3])
        assert res.voi >= -1e-9 and res.meu_pi >= res.meu - 1e-12
