"""Decision circuits for influence diagrams: compilation, sweeps and sensitivity analysis."""
from .compiler import DecisionCircuit, circuit_stats, compile_diagram, default_order
from .io import ParseError, dump_diagram, load_diagram, loads_diagram
from .model import (
    DiagramError, Evidence, InfluenceDiagram, MetaParameter, QueryError, Strategy, UtilityFunction, apply_meta,
    is_normal_form,
)
from .sweep import differentiate_downward, evaluate_upward, fix_strategy, meu_ce, strategy_gradient

__all__ = [
    "DecisionCircuit", "DiagramError", "Evidence", "InfluenceDiagram", "MetaParameter", "ParseError",
    "QueryError", "Strategy", "UtilityFunction", "apply_meta", "circuit_stats", "compile_diagram",
    "default_order", "differentiate_downward", "dump_diagram", "evaluate_upward", "fix_strategy",
    "is_normal_form", "load_diagram", "loads_diagram", "meu_ce", "strategy_gradient",
]
