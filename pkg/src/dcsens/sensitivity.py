"""Sensitivity queries on compiled decision circuits.

Expected-utility lines and admissible intervals for meta-parameters, one-way
certain-equivalent plots, and value of perfect information. Everything is
computed from upward/downward sweeps through a shared, unmodified circuit.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .compiler import CONSTANT, DecisionCircuit
from .model import Evidence, QueryError, Strategy, UtilityFunction
from .sweep import (
    ACTIVE_TOL, MAXIMIZE, SUM_MODE, MeuResult, differentiate_downward, evaluate_upward, fix_strategy,
    meta_overrides, meu_ce, strategy_eu, strategy_gradient,
)

DEFAULT_RESOLUTION = 0.01
DEFAULT_SEARCH_TOL = 1e-4
INSTANTIATION_CAP = 4096
DERIV_ZERO = 1e-12


@dataclass(frozen=True)
class EuLine:
    """Value line of one strategy in one meta-parameter.

    ``alpha0 + slope * (tau - tau0)`` is ``N_d(tau) / P(e)`` at the reference,
    where ``N_d`` is the joint ``P(U=1, e | d)``; it is the expected utility
    itself when ``semantics == "eu"`` (``P(e)`` does not move with tau).
    ``eu_slope`` is the exact derivative of the expected utility at ``tau0``.
    """

    strategy: int
    meta: str
    tau0: float
    alpha0: float
    slope: float
    eu_slope: float
    semantics: str
    joint0: float
    joint_slope: float
    p_e0: float
    p_e_slope: float

    def __call__(self, tau: float) -> float:
        return self.alpha0 + self.slope * (tau - self.tau0)

    def eu(self, tau: float) -> float:
        """Expected utility at ``tau`` as the exact ratio of two affine functions."""
        den = self.p_e0 + self.p_e_slope * (tau - self.tau0)
        if den <= 0.0:
            return float("nan")
        return (self.joint0 + self.joint_slope * (tau - self.tau0)) / den


@dataclass(frozen=True)
class AdmissibleInterval:
    meta: str
    lo: float
    hi: float
    kind: str
    tau0: float
    delta_plus: float | None = None
    delta_minus: float | None = None
    notes: tuple[str, ...] = ()

    def __contains__(self, tau: float) -> bool:
        return self.lo <= tau <= self.hi

    def contains(self, other: AdmissibleInterval, tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol

    def to_text(self) -> str:
        text = f"interval meta={self.meta} kind={self.kind} lo={self.lo:.9g} hi={self.hi:.9g} tau0={self.tau0:.9g}"
        if self.notes:
            text += " notes=" + ",".join(self.notes)
        return text


@dataclass(frozen=True)
class VoiResult:
    variables: tuple[str, ...]
    meu: float
    meu_pi: float
    voi: float
    exact: bool = True
    method: str = "sweep"
    notes: tuple[str, ...] = ()

    def to_text(self) -> str:
        names = ",".join(self.variables) or "-"
        text = (f"voi vars={names} method={self.method} meu={self.meu:.9g} meu_pi={self.meu_pi:.9g} "
                f"value={self.voi:.2f} exact={str(self.exact).lower()}")
        if self.notes:
            text += " notes=" + ",".join(self.notes)
        return text


@dataclass
class PlotSample:
    tau: float
    ce_problem: float
    ce_strategy: float
    opt_strategy: str


@dataclass
class PlotSeries:
    meta: str
    resolution: float
    samples: list[PlotSample] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["tau", "ce_problem", "ce_strategy", "opt_strategy"])
        for s in self.samples:
            writer.writerow([f"{s.tau:.9g}", f"{s.ce_problem:.9g}", f"{s.ce_strategy:.9g}", s.opt_strategy])
        return buf.getvalue()


def _evidence(c: DecisionCircuit, e: Evidence | None) -> Evidence:
    return (e if e is not None else c.diagram.evidence).plain()


def _require_normal(c: DecisionCircuit) -> str:
    if not c.diagram.is_normal_form():
        raise QueryError("this query needs a normal-form diagram (one parentless decision)")
    return next(iter(c.diagram.decisions))


def _available(c: DecisionCircuit, max_id: int) -> list[int]:
    return [a for a, g in enumerate(c.nodes[max_id].gates) if c.nodes[g].kind != CONSTANT]


def tau_grid(resolution: float) -> list[float]:
    n = int(math.floor(1.0 / resolution + 1e-9))
    grid = [round(i * resolution, 12) for i in range(n + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return grid


# -- normal form ------------------------------------------------------------

def eu_lines_normal(c: DecisionCircuit, e: Evidence | None, k: str,
                    overrides: Mapping[int, float] | None = None) -> list[EuLine]:
    """One value line per available alternative of the single decision."""
    dec = _require_normal(c)
    d = c.diagram
    e = _evidence(c, e)
    if k not in d.meta_parameters:
        raise QueryError(f"unknown meta-parameter {k}")
    base = meu_ce(c, e, overrides=overrides)
    tau_leaf = c.metas[k]
    tau0 = overrides.get(tau_leaf, d.meta_parameters[k].reference) if overrides else d.meta_parameters[k].reference
    star = Strategy({dec: base.strategy[dec]})
    g_e = strategy_gradient(c, e, star, overrides)
    p_e, dp_e = g_e.root_value, g_e.partial(tau_leaf)
    semantics = "eu" if abs(dp_e) <= DERIV_ZERO else "numerator"
    lines = []
    for alt in _available(c, c.max_nodes[(dec, 0)]):
        s = Strategy({dec: (alt,)})
        num = strategy_gradient(c, e.augment(), s, overrides)
        den = strategy_gradient(c, e, s, overrides)
        n0, dn = num.root_value, num.partial(tau_leaf)
        eu_slope = (p_e * dn - dp_e * n0) / p_e ** 2
        lines.append(EuLine(alt, k, tau0, n0 / p_e, dn / p_e, eu_slope, semantics,
                            n0, dn, den.root_value, den.partial(tau_leaf)))
    return lines


def _best(lines: Sequence[EuLine], at: float | None = None) -> EuLine:
    vals = [ln.alpha0 if at is None else ln(at) for ln in lines]
    top = max(vals)
    tol = 1e-12 * max(1.0, abs(top))
    return next(ln for ln, v in zip(lines, vals) if v >= top - tol)


def _crossing_interval(meta: str, tau0: float, star_value: float, star_slope: float,
              others: Sequence[tuple[float, float]]) -> AdmissibleInterval:
    """Range around ``tau0`` where no competitor line overtakes the optimal one."""
    plus, minus, notes = math.inf, -math.inf, []
    for value, slope in others:
        gap = star_value - value
        # a line through the same point with the same slope never overtakes
        if abs(slope - star_slope) <= DERIV_ZERO:
            if abs(gap) <= 1e-12 * max(1.0, abs(star_value)):
                notes.append("tie")
            continue
        delta = gap / (slope - star_slope)
        if slope > star_slope:
            plus = min(plus, delta)
        else:
            minus = max(minus, delta)
    lo = max(0.0, tau0 + minus)
    hi = min(1.0, tau0 + plus)
    return AdmissibleInterval(meta, min(lo, tau0), max(hi, tau0), "exact", tau0,
                              plus if plus < math.inf else None, minus if minus > -math.inf else None,
                              tuple(sorted(set(notes))))


def admissible_interval_normal(lines: Sequence[EuLine], optimal: int | None = None) -> AdmissibleInterval:
    """Closed-form admissible interval from the value lines of all strategies."""
    if not lines:
        raise QueryError("no lines given")
    star = next(ln for ln in lines if ln.strategy == optimal) if optimal is not None else _best(lines)
    others = [(ln.alpha0, ln.slope) for ln in lines if ln is not star]
    return _crossing_interval(star.meta, star.tau0, star.alpha0, star.slope, others)


def ce_slope(eu_slope: float, ce: float, u: UtilityFunction) -> float:
    """Slope of a certain equivalent from the slope of its expected utility."""
    if eu_slope == 0.0:
        return 0.0
    deriv = u.derivative(ce)
    if deriv < 1e-300:
        raise QueryError("utility derivative underflows at this certain equivalent")
    return eu_slope / deriv


def voi_derivative(c: DecisionCircuit, e: Evidence | None, var: str) -> VoiResult:
    """Perfect-information value from per-strategy indicator partials (normal form)."""
    dec = _require_normal(c)
    d = c.diagram
    e = _evidence(c, e)
    _check_voi_variable(c, var)
    base = meu_ce(c, e)
    u = d.utility.function
    if var in e.assignments:
        return VoiResult((var,), base.meu, base.meu, 0.0, True, "derivative", ("observed",))
    per_alt = []
    for alt in _available(c, c.max_nodes[(dec, 0)]):
        st = strategy_gradient(c, e.augment(), Strategy({dec: (alt,)}))
        per_alt.append([st.partial(c.indicators[(var, x)]) / base.p_evidence for x in range(d.card(var))])
    meu_pi = sum(max(col) for col in zip(*per_alt))
    return VoiResult((var,), base.meu, meu_pi, u.inverse(meu_pi) - base.ce, True, "derivative")


def _check_voi_variable(c: DecisionCircuit, var: str) -> None:
    d = c.diagram
    if var not in d.chance:
        raise QueryError(f"{var} is not a chance variable")
    if d.ancestors(var) & set(d.decisions):
        raise QueryError(f"{var} is affected by a decision")


def voi_sweep(c: DecisionCircuit, e: Evidence | None, variables: Sequence[str],
              cap: int = INSTANTIATION_CAP, base: MeuResult | None = None) -> VoiResult:
    """Perfect-information value from one maximize sweep per joint instantiation."""
    d = c.diagram
    e = _evidence(c, e)
    for var in variables:
        _check_voi_variable(c, var)
    base = base or meu_ce(c, e)
    free = [v for v in dict.fromkeys(variables) if v not in e.assignments]
    count = math.prod(d.card(v) for v in free)
    if count > cap:
        raise QueryError(f"{count} instantiations exceed the cap {cap}")
    total = 0.0
    for combo in itertools.product(*(range(d.card(v)) for v in free)):
        ex = e.extend({v: d.variables[v].outcomes[x] for v, x in zip(free, combo)}).augment()
        total += evaluate_upward(c, ex, MAXIMIZE).root_value
    meu_pi = total / base.p_evidence
    notes = ("observed",) if len(free) < len(set(variables)) else ()
    u = d.utility.function
    return VoiResult(tuple(variables), base.meu, meu_pi, u.inverse(meu_pi) - base.ce, True, "sweep", notes)


# -- strategies, plots, re-optimization -------------------------------------

def _tau_overrides(c: DecisionCircuit, k: str, tau: float) -> dict[int, float]:
    return meta_overrides(c, {k: tau})


def active_under(c: DecisionCircuit, e: Evidence, s: Strategy, overrides: Mapping[int, float] | None = None
                 ) -> set[tuple[str, int]]:
    """Contexts reached with positive probability when ``s`` is fixed."""
    return strategy_gradient(c, e.augment(), s, overrides).active_contexts()


def optimal_unchanged(c: DecisionCircuit, e: Evidence | None, k: str, tau: float, reference: Strategy) -> bool:
    """Whether re-optimizing at ``tau`` reproduces ``reference`` on every active context."""
    e = _evidence(c, e)
    ov = _tau_overrides(c, k, tau)
    probe = meu_ce(c, e, overrides=ov)
    contexts = probe.active_contexts() | active_under(c, e, reference, ov)
    return probe.strategy.agrees(reference, contexts)


def one_way_plot(c: DecisionCircuit, e: Evidence | None, k: str, resolution: float = DEFAULT_RESOLUTION,
                 strategy: Strategy | None = None) -> PlotSeries:
    """CE of the problem and of a fixed strategy (default: s*) across ``tau`` in [0, 1]."""
    if not 0.0 < resolution <= 0.5:
        raise QueryError("resolution must lie in (0, 0.5]")
    d = c.diagram
    e = _evidence(c, e)
    u = d.utility.function
    if k not in d.meta_parameters:
        raise QueryError(f"unknown meta-parameter {k}")
    ref = meu_ce(c, e)
    strategy = strategy or ref.strategy
    strategy.validate(d)
    series = PlotSeries(k, resolution)
    if d.is_normal_form():
        dec = next(iter(d.decisions))
        lines = eu_lines_normal(c, e, k)
        fixed = next(ln for ln in lines if ln.strategy == strategy[dec][0])
        for tau in tau_grid(resolution):
            best = max(lines, key=lambda ln: (ln.joint0 + ln.joint_slope * (tau - ln.tau0), -ln.strategy))
            series.samples.append(PlotSample(tau, _safe_ce(u, best.eu(tau)), _safe_ce(u, fixed.eu(tau)),
                                             d.variables[dec].outcomes[best.strategy]))
        return series
    for tau in tau_grid(resolution):
        ov = _tau_overrides(c, k, tau)
        try:
            res = meu_ce(c, e, overrides=ov)
            ce_p, label = res.ce, res.strategy.label(d)
        except QueryError:
            ce_p, label = float("nan"), "undefined"
        eu_s, _ = strategy_eu(c, e, strategy, ov)
        series.samples.append(PlotSample(tau, ce_p, _safe_ce(u, eu_s), label))
    return series


def _safe_ce(u: UtilityFunction, eu: float) -> float:
    if math.isnan(eu):
        return float("nan")
    return u.inverse(min(max(eu, 0.0), 1.0))


def binary_search_interval(c: DecisionCircuit, e: Evidence | None, k: str, tol: float = DEFAULT_SEARCH_TOL,
                           verify_step: float | None = None) -> AdmissibleInterval:
    """Admissible interval by bisection on re-optimized strategies; endpoints within ``tol``.

    With ``verify_step`` the interior is probed on that grid and a
    ``non-convex`` note is added if some probe changes the strategy.
    """
    if not 0.0 < tol <= 0.1:
        raise QueryError("binary-search tolerance must lie in (0, 0.1]")
    d = c.diagram
    e = _evidence(c, e)
    if k not in d.meta_parameters:
        raise QueryError(f"unknown meta-parameter {k}")
    tau0 = d.meta_parameters[k].reference
    ref = meu_ce(c, e).strategy

    def same(tau):
        return optimal_unchanged(c, e, k, tau, ref)

    def edge(bad_end: float) -> float:
        if bad_end == tau0 or same(bad_end):
            return bad_end
        good, bad = tau0, bad_end
        while abs(bad - good) > tol / 2:
            mid = 0.5 * (good + bad)
            if same(mid):
                good = mid
            else:
                bad = mid
        return 0.5 * (good + bad)

    lo, hi = edge(0.0), edge(1.0)
    notes = []
    if verify_step:
        for tau in tau_grid(verify_step):
            if lo + tol < tau < hi - tol and not same(tau):
                notes.append("non-convex")
                break
    return AdmissibleInterval(k, lo, hi, "exact", tau0, hi - tau0, lo - tau0, tuple(notes))


# -- extensive form -----------------------------------------------------------

def classify_max_nodes(c: DecisionCircuit, e: Evidence | None = None, result: MeuResult | None = None
                       ) -> tuple[list[int], list[int]]:
    """Split max nodes by whether their information state is reached under s* and ``e``."""
    result = result or meu_ce(c, _evidence(c, e))
    reach = result.state.reach()
    active, inactive = [], []
    for i in sorted(c.max_nodes.values()):
        (active if reach[i] > ACTIVE_TOL else inactive).append(i)
    return active, inactive


@dataclass(frozen=True)
class NeighbourValue:
    alternative: int
    label: str
    root_value: float
    slopes: dict[str, float]


@dataclass(frozen=True)
class LocalLine:
    alternative: int
    value: float
    slopes: dict[str, float]


def _local_lines(c: DecisionCircuit, e: Evidence, result: MeuResult, v: int) -> list[LocalLine]:
    """Value of each alternative's branch at max node ``v`` with s* fixed below it."""
    ov = fix_strategy(c, result.strategy)
    for a in _available(c, v):
        ov[c.nodes[v].gates[a]] = 1.0
    up = evaluate_upward(c, e.augment(), SUM_MODE, ov)
    lines = []
    for a in _available(c, v):
        child = c.nodes[v].children[a]
        down = differentiate_downward(up, root=child)
        lines.append(LocalLine(a, up.values[child], down.meta_partials()))
    return lines


def neighbouring_strategy_values(c: DecisionCircuit, e: Evidence | None, v: int,
                                 result: MeuResult | None = None) -> list[NeighbourValue]:
    """Root value and meta-slopes when only max node ``v`` deviates from s*."""
    d = c.diagram
    e = _evidence(c, e)
    result = result or meu_ce(c, e)
    node = c.nodes[v]
    out = []
    for a in _available(c, v):
        ov = fix_strategy(c, result.strategy)
        for b in _available(c, v):
            ov[node.gates[b]] = 1.0 if b == a else 0.0
        st = differentiate_downward(evaluate_upward(c, e.augment(), SUM_MODE, ov))
        out.append(NeighbourValue(a, d.variables[node.variable].outcomes[a], st.root_value, st.meta_partials()))
    return out


@dataclass(frozen=True)
class ExtensiveIntervals:
    tight: AdmissibleInterval
    weak: AdmissibleInterval


def _intersect(a: AdmissibleInterval, b: AdmissibleInterval, kind: str) -> AdmissibleInterval:
    return AdmissibleInterval(a.meta, max(a.lo, b.lo), min(a.hi, b.hi), kind, a.tau0,
                              notes=tuple(sorted(set(a.notes) | set(b.notes))))


def admissible_intervals_extensive(c: DecisionCircuit, e: Evidence | None = None,
                                   result: MeuResult | None = None) -> dict[str, ExtensiveIntervals]:
    """Tight and weak admissible-interval bounds for every meta-parameter at once.

    Active max nodes constrain the weak bound, inactive ones the tight bound,
    and the tight bound is finally intersected with the weak one.
    """
    d = c.diagram
    e = _evidence(c, e)
    result = result or meu_ce(c, e)
    active, inactive = classify_max_nodes(c, e, result)
    full = {k: AdmissibleInterval(k, 0.0, 1.0, "tight", m.reference) for k, m in d.meta_parameters.items()}
    tight, weak = dict(full), {k: AdmissibleInterval(k, 0.0, 1.0, "weak", iv.tau0) for k, iv in full.items()}
    for group, target, kind in ((active, weak, "weak"), (inactive, tight, "tight")):
        for v in group:
            lines = _local_lines(c, e, result, v)
            chosen = result.state.choices[v]
            star = next(ln for ln in lines if ln.alternative == chosen)
            others = [ln for ln in lines if ln is not star]
            for k in d.meta_parameters:
                local = _crossing_interval(k, target[k].tau0, star.value, star.slopes[k],
                                  [(ln.value, ln.slopes[k]) for ln in others])
                target[k] = _intersect(target[k], local, kind)
    out = {}
    for k in d.meta_parameters:
        out[k] = ExtensiveIntervals(_intersect(tight[k], weak[k], "tight"), weak[k])
    return out
