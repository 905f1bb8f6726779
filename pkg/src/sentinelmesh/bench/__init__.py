"""Benchmark harness: scenario generation, sidecar mesh driving, baselines,
and metrics reporting."""

from .generate import (
    ConfigError,
    GenerationConfig,
    ScenarioCase,
    generate,
    keyword_hit,
    keyword_list,
    load_scenarios,
    save_scenarios,
)
from .mesh import MESH_LAYOUTS, CaseResult, Mesh, ScenarioError, build_mesh, run_case
from .methods import (
    METHOD_NAMES,
    MetricsReport,
    run_method,
    run_sentinel,
    scalability_sweep,
    write_report_csv,
    write_report_json,
)
from .world import World, build_world

__all__ = [
    "ConfigError",
    "GenerationConfig",
    "ScenarioCase",
    "generate",
    "keyword_hit",
    "keyword_list",
    "load_scenarios",
    "save_scenarios",
    "MESH_LAYOUTS",
    "CaseResult",
    "Mesh",
    "ScenarioError",
    "build_mesh",
    "run_case",
    "METHOD_NAMES",
    "MetricsReport",
    "run_method",
    "run_sentinel",
    "scalability_sweep",
    "write_report_csv",
    "write_report_json",
    "World",
    "build_world",
]
