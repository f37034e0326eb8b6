"""Command-line interface: ``dcsens <command> DIAGRAM [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import yaml

from . import oracle
from .compiler import circuit_stats, compile_diagram, to_dot
from .io import load_diagram
from .model import DiagramError, Evidence, InfluenceDiagram, QueryError, Strategy, apply_meta, check_evidence
from .sensitivity import (
    DEFAULT_RESOLUTION, DEFAULT_SEARCH_TOL, INSTANTIATION_CAP, admissible_interval_normal,
    admissible_intervals_extensive, binary_search_interval, eu_lines_normal, one_way_plot, voi_derivative,
    voi_sweep,
)
from .sweep import meu_ce

COMMANDS = ("validate", "compile", "evaluate", "plot", "intervals", "voi")
ORACLE_TOL = 1e-9
ORACLE_GRID = 0.001


@dataclass
class RunConfig:
    input: Path
    command: str
    meta: str | None = None
    resolution: float = DEFAULT_RESOLUTION
    search_tol: float = DEFAULT_SEARCH_TOL
    cap: int = INSTANTIATION_CAP
    oracle: bool = False
    output: Path | None = None
    format: str = "text"
    evidence: dict[str, str] = field(default_factory=dict)
    strategy: str = "optimal"
    emit_graph: Path | None = None
    exact: bool = False
    variables: tuple[str, ...] = ()

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command}")
        if not 0.0 < self.resolution <= 0.5:
            raise ValueError("--resolution must lie in (0, 0.5]")
        if not 0.0 < self.search_tol <= 0.1:
            raise ValueError("--tol must lie in (0, 0.1]")
        if self.cap < 1:
            raise ValueError("--cap must be positive")
        if self.format not in ("text", "csv"):
            raise ValueError("--format must be text or csv")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("diagram", type=Path, help="influence diagram file (YAML, format: 1)")
    common.add_argument("--evidence", action="append", default=[], metavar="VAR=val",
                        help="extra evidence; repeatable, merged with the file's evidence")
    common.add_argument("--oracle", action="store_true", help="cross-check against brute-force enumeration")
    common.add_argument("--format", choices=("text", "csv"), default="text")
    common.add_argument("--output", type=Path, help="write results here instead of stdout")

    parser = argparse.ArgumentParser(prog="dcsens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="load and validate a diagram")
    p = sub.add_parser("compile", parents=[common], help="compile and report circuit statistics")
    p.add_argument("--emit-graph", type=Path, metavar="FILE", help="write the circuit in DOT format")
    sub.add_parser("evaluate", parents=[common], help="MEU, CE, optimal strategy and P(e)")
    p = sub.add_parser("plot", parents=[common], help="one-way CE sensitivity series (CSV)")
    p.add_argument("--meta", required=True, help="meta-parameter id")
    p.add_argument("--strategy", default="optimal", help="'optimal' or a YAML file of policies")
    p.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    p = sub.add_parser("intervals", parents=[common], help="admissible intervals for meta-parameters")
    p.add_argument("--meta", help="restrict to one meta-parameter")
    p.add_argument("--exact", action="store_true", help="add binary-search exact intervals (extensive form)")
    p.add_argument("--tol", type=float, default=DEFAULT_SEARCH_TOL, help="binary-search tolerance")
    p = sub.add_parser("voi", parents=[common], help="value of perfect information")
    p.add_argument("--vars", required=True, help="comma-separated chance variables")
    p.add_argument("--cap", type=int, default=INSTANTIATION_CAP, help="joint instantiation cap")
    return parser


def parse_config(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    evidence = {}
    for item in args.evidence:
        var, sep, val = item.partition("=")
        if not sep or not var or not val:
            raise ValueError(f"evidence must look like VAR=value, got {item!r}")
        evidence[var.strip()] = val.strip()
    return RunConfig(
        input=args.diagram, command=args.command, meta=getattr(args, "meta", None),
        resolution=getattr(args, "resolution", DEFAULT_RESOLUTION), search_tol=getattr(args, "tol", DEFAULT_SEARCH_TOL),
        cap=getattr(args, "cap", INSTANTIATION_CAP), oracle=args.oracle, output=args.output, format=args.format,
        evidence=evidence, strategy=getattr(args, "strategy", "optimal"), emit_graph=getattr(args, "emit_graph", None),
        exact=getattr(args, "exact", False),
        variables=tuple(v.strip() for v in getattr(args, "vars", "").split(",") if v.strip()),
    )


def load_strategy(d: InfluenceDiagram, path: Path) -> Strategy:
    """Read policies written as ``{"B[R=sunny]": leave, ...}``, the form printed by ``evaluate``."""
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise QueryError(f"cannot read strategy file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise QueryError("strategy file must map contexts to alternatives")
    doc = {str(k): str(v) for k, v in doc.items()}
    policies = {}
    for dec in d.decision_order():
        parents = d.decisions[dec].parents
        var = d.variables[dec]
        policy = []
        for assignment in d.iter_configs(parents):
            ctx = ",".join(f"{p}={d.variables[p].outcomes[o]}" for p, o in zip(parents, assignment))
            key = f"{dec}[{ctx}]" if parents else dec
            if key not in doc:
                raise QueryError(f"strategy file has no entry for {key}")
            if doc[key] not in var.outcomes:
                raise QueryError(f"{key}: unknown alternative {doc[key]}")
            policy.append(var.outcomes.index(doc[key]))
        policies[dec] = policy
    s = Strategy(policies)
    s.validate(d)
    return s


class Report:
    """Collects ``(key, value)`` results and renders them as text or CSV."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.rows: list[tuple[str, str]] = []
        self.raw: str | None = None
        self.check: str | None = None

    def add(self, key: str, value) -> None:
        self.rows.append((key, str(value)))

    def render(self) -> str:
        tail = "" if self.check is None else self.check + "\n"
        if self.raw is not None:
            return self.raw + ("" if self.check is None else "# " + tail)
        if self.fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["key", "value"])
            writer.writerows(self.rows)
            return buf.getvalue() + ("" if self.check is None else "# " + tail)
        return "".join(f"{k}={v}\n" for k, v in self.rows) + tail


def money(x: float) -> str:
    return f"{x:.2f}"


def prob(x: float) -> str:
    return f"{x:.9g}"


def _oracle_line(report: Report, agree: bool, delta: float) -> None:
    report.check = f"oracle_agree={str(agree).lower()} delta={delta:.3g}"


def _evaluate(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    c = compile_diagram(d)
    res = meu_ce(c, e)
    report.add("meu", prob(res.meu))
    report.add("ce", money(res.ce))
    report.add("p_evidence", prob(res.p_evidence))
    for key, alt in res.strategy.describe(d).items():
        report.add(f"strategy.{key}", alt)
    if cfg.oracle:
        o = oracle.oracle_meu(d, e)
        delta = abs(o.meu - res.meu)
        agree = delta <= ORACLE_TOL and res.strategy.agrees(o.strategy, o.active)
        _oracle_line(report, agree, delta)


def _compile(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    c = compile_diagram(d)
    for key, value in circuit_stats(c).items():
        report.add(key, value)
    report.add("order", " ".join(c.order))
    if cfg.emit_graph is not None:
        cfg.emit_graph.write_text(to_dot(c), encoding="utf-8")
        report.add("graph", str(cfg.emit_graph))
    if cfg.oracle and d.utility is not None:
        delta = abs(meu_ce(c, e).meu - oracle.oracle_meu(d, e).meu)
        _oracle_line(report, delta <= ORACLE_TOL, delta)


def _plot(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    c = compile_diagram(d)
    strategy = None if cfg.strategy == "optimal" else load_strategy(d, Path(cfg.strategy))
    series = one_way_plot(c, e, cfg.meta, cfg.resolution, strategy)
    text = series.to_csv()
    if cfg.oracle:
        ref = strategy or meu_ce(c, e).strategy
        delta = 0.0
        for s in series.samples:
            dt = apply_meta(d, cfg.meta, s.tau)
            delta = max(delta, abs(oracle.oracle_meu(dt, e).ce - s.ce_problem))
            delta = max(delta, abs(d.utility.function.inverse(oracle.oracle_eu(dt, ref, e).eu) - s.ce_strategy))
        # dollars: compare at 1e-6 since CE amplifies EU rounding by 1/u'
        _oracle_line(report, delta <= 1e-6, delta)
    report.raw = text


def _intervals(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    if not d.meta_parameters:
        raise QueryError("the diagram declares no meta-parameters")
    metas = [cfg.meta] if cfg.meta else list(d.meta_parameters)
    for k in metas:
        if k not in d.meta_parameters:
            raise QueryError(f"unknown meta-parameter {k}")
    c = compile_diagram(d)
    found: dict[str, tuple[float, float]] = {}
    worst, agree = 0.0, True
    if d.is_normal_form():
        for k in metas:
            iv = admissible_interval_normal(eu_lines_normal(c, e, k))
            report.add(f"{k}.exact", f"[{prob(iv.lo)}, {prob(iv.hi)}]")
            found[k] = (iv.lo, iv.hi)
    else:
        ext = admissible_intervals_extensive(c, e)
        for k in metas:
            report.add(f"{k}.tight", f"[{prob(ext[k].tight.lo)}, {prob(ext[k].tight.hi)}]")
            report.add(f"{k}.weak", f"[{prob(ext[k].weak.lo)}, {prob(ext[k].weak.hi)}]")
            if cfg.exact:
                iv = binary_search_interval(c, e, k, cfg.search_tol, verify_step=0.01)
                report.add(f"{k}.exact", f"[{prob(iv.lo)}, {prob(iv.hi)}]")
                if iv.notes:
                    report.add(f"{k}.notes", ",".join(iv.notes))
                found[k] = (iv.lo, iv.hi)
    if cfg.oracle:
        slack = ORACLE_GRID + cfg.search_tol
        for k in metas:
            lo, hi = oracle.oracle_interval(d, e, k, ORACLE_GRID)
            if k in found:
                delta = max(abs(found[k][0] - lo), abs(found[k][1] - hi))
                worst = max(worst, delta)
                agree &= delta <= slack
            else:
                t, w = ext[k].tight, ext[k].weak
                agree &= w.lo - slack <= lo <= t.lo + slack and t.hi - slack <= hi <= w.hi + slack
        _oracle_line(report, agree, worst)


def _voi(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    if not cfg.variables:
        raise QueryError("--vars needs at least one variable")
    for v in cfg.variables:
        if v not in d.variables:
            raise QueryError(f"unknown variable {v}")
    c = compile_diagram(d)
    res = voi_sweep(c, e, cfg.variables, cfg.cap)
    report.add("vars", ",".join(cfg.variables))
    report.add("meu", prob(res.meu))
    report.add("meu_pi", prob(res.meu_pi))
    report.add("voi", money(res.voi))
    if d.is_normal_form() and len(cfg.variables) == 1:
        alt = voi_derivative(c, e, cfg.variables[0])
        report.add("voi_derivative", money(alt.voi))
        report.add("methods_agree", str(abs(alt.meu_pi - res.meu_pi) <= ORACLE_TOL).lower())
    if cfg.oracle:
        o = oracle.oracle_voi(d, e, cfg.variables)
        delta = abs(o.meu_pi - res.meu_pi)
        _oracle_line(report, delta <= ORACLE_TOL, delta)


def _validate(d: InfluenceDiagram, e: Evidence, cfg: RunConfig, report: Report) -> None:
    counts = {kind: sum(v.kind == kind for v in d.variables.values()) for kind in ("chance", "decision", "utility")}
    report.add("valid", "true")
    for kind, n in counts.items():
        report.add(kind, n)
    report.add("meta_parameters", len(d.meta_parameters))
    report.add("normal_form", str(d.is_normal_form()).lower())
    if cfg.oracle and d.utility is not None:
        delta = abs(meu_ce(compile_diagram(d), e).meu - oracle.oracle_meu(d, e).meu)
        _oracle_line(report, delta <= ORACLE_TOL, delta)


HANDLERS = {"validate": _validate, "compile": _compile, "evaluate": _evaluate, "plot": _plot,
            "intervals": _intervals, "voi": _voi}


def run(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    """Execute one command; returns 0 on success, 1 for diagram errors, 2 for query errors."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    try:
        d = load_diagram(cfg.input)
    except OSError as exc:
        print(f"error: cannot read {cfg.input}: {exc.strerror}", file=stderr)
        return 1
    except DiagramError as exc:
        print(f"error: {cfg.input}: {exc}", file=stderr)
        return 1
    report = Report(cfg.format)
    try:
        e = d.evidence.extend(cfg.evidence) if cfg.evidence else d.evidence
        check_evidence(d, e)
        if cfg.command not in ("validate", "compile") and d.utility is None:
            raise QueryError("the diagram has no utility node")
        HANDLERS[cfg.command](d, e, cfg, report)
    except QueryError as exc:
        print(f"error: {cfg.input}: {exc}", file=stderr)
        return 2
    except DiagramError as exc:
        print(f"error: {cfg.input}: {exc}", file=stderr)
        return 1
    text = report.render()
    if cfg.output is not None:
        cfg.output.write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
