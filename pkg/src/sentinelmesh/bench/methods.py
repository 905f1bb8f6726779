"""Detection methods and metrics.

Three families: a no-op baseline that allows everything, a keyword DLP
baseline that pattern-matches payload texts, and the sidecar mesh (full
pipeline or one of its ablations).  ``run_method`` scores any of them over a
scenario set and returns a uniform metrics report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from ..mapper import DeterministicMapper, ExactStringMapper, MapperConfig
from ..sidecar import SidecarConfig
from ..transport import InProcessTransport, LoopbackTransport, SimulatedTransport
from .generate import ScenarioCase, keyword_hit, keyword_list
from .mesh import CaseResult, build_mesh, run_case
from .world import World, build_world

METHOD_NAMES = (
    "no_protection",
    "keyword_dlp",
    "sentinel_full",
    "sentinel_no_stt",
    "sentinel_no_cross_domain",
    "sentinel_no_mapping",
    "sentinel_no_counterfactual",
    "sentinel_no_provenance",
)

ABLATIONS = ("stt", "cross_domain", "mapping", "counterfactual", "provenance")

BREAKDOWN_KEYS = ("fork", "token-validation", "local-invariants", "cross-query", "decision")

TRANSPORTS = ("in-process", "loopback", "simulated")


@dataclass
class MetricsReport:
    method: str
    mesh_size: int = 7
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    per_category_recall: dict[str, float] = field(default_factory=dict)
    per_difficulty_recall: dict[str, float] = field(default_factory=dict)
    latency_ms: dict[str, float] = field(default_factory=dict)     # p50/p95/p99
    breakdown_ms: dict[str, float] = field(default_factory=dict)   # mean per phase
    predictions: dict[str, bool] = field(default_factory=dict)
    total_queries: int = 0
    wall_seconds: float = 0.0
    config_hash: str = ""

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mesh_size": self.mesh_size,
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "f1": round(self.f1, 4),
            "accuracy": round(self.accuracy, 4),
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "per_category_recall": {k: round(v, 4) for k, v in sorted(self.per_category_recall.items())},
            "per_difficulty_recall": {k: round(v, 4) for k, v in sorted(self.per_difficulty_recall.items())},
            "latency_ms": {k: round(v, 3) for k, v in self.latency_ms.items()},
            "breakdown_ms": {k: round(v, 4) for k, v in self.breakdown_ms.items()},
            "total_queries": self.total_queries,
            "wall_seconds": round(self.wall_seconds, 3),
            "config_hash": self.config_hash,
        }


def _percentile(values: list[float], q: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    idx = min(len(ordered) - 1, max(0, round(q * (len(ordered) - 1))))
    return ordered[idx]


def _finalize(report: MetricsReport, cases: list[ScenarioCase],
              latencies: list[float], breakdowns: list[dict]) -> MetricsReport:
    by_category: dict[str, list[bool]] = {}
    by_difficulty: dict[str, list[bool]] = {}
    for case in cases:
        predicted = report.predictions[case.case_id]
        if case.is_attack:
            if predicted:
                report.tp += 1
            else:
                report.fn += 1
            by_category.setdefault(case.category, []).append(predicted)
            by_difficulty.setdefault(case.difficulty, []).append(predicted)
        else:
            if predicted:
                report.fp += 1
            else:
                report.tn += 1
    report.per_category_recall = {
        cat: sum(hits) / len(hits) for cat, hits in by_category.items()
    }
    report.per_difficulty_recall = {
        diff: sum(hits) / len(hits) for diff, hits in by_difficulty.items()
    }
    report.latency_ms = {
        "p50": _percentile(latencies, 0.50) * 1000.0,
        "p95": _percentile(latencies, 0.95) * 1000.0,
        "p99": _percentile(latencies, 0.99) * 1000.0,
    }
    if breakdowns:
        report.breakdown_ms = {
            key: statistics.fmean(b.get(key, 0.0) for b in breakdowns) * 1000.0
            for key in BREAKDOWN_KEYS
        }
    else:
        report.breakdown_ms = {key: 0.0 for key in BREAKDOWN_KEYS}
    return report


def sentinel_config(ablate: Optional[str] = None) -> tuple[SidecarConfig, Callable[[], object]]:
    """Sidecar config plus mapper factory for the full pipeline or an ablation."""
    config = SidecarConfig()
    mapper_factory: Callable[[], object] = DeterministicMapper
    if ablate is None:
        pass
    elif ablate == "stt":
        config.enable_stt = False
    elif ablate == "cross_domain":
        config.enable_cross_domain = False
    elif ablate == "mapping":
        mapper_factory = ExactStringMapper
    elif ablate == "counterfactual":
        config.use_direct_check = True
    elif ablate == "provenance":
        mapper_factory = lambda: DeterministicMapper(MapperConfig(0.6, 0.0, 0.0))
    else:
        raise ValueError(f"unknown ablation {ablate!r}")
    return config, mapper_factory


def _transport_factory(name: str) -> Callable[[], object]:
    if name == "in-process":
        return InProcessTransport
    if name == "loopback":
        return LoopbackTransport
    if name == "simulated":
        return lambda: SimulatedTransport(latency=0.001)
    raise ValueError(f"unknown transport {name!r}, expected one of {TRANSPORTS}")


def _config_hash(method: str, mesh_size: int, transport: str) -> str:
    blob = json.dumps({"method": method, "mesh_size": mesh_size, "transport": transport},
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_sentinel(cases: Iterable[ScenarioCase], world: Optional[World] = None,
                 mesh_size: int = 7, transport: str = "in-process",
                 ablate: Optional[str] = None,
                 query_timeout: Optional[float] = None) -> tuple[dict[str, CaseResult], MetricsReport]:
    """Drive every case through a fresh mesh; return raw results and metrics."""
    cases = list(cases)
    world = world or build_world()
    config, mapper_factory = sentinel_config(ablate)
    if query_timeout is not None:
        config.query_timeout = query_timeout
    make_transport = _transport_factory(transport)
    method = "sentinel_full" if ablate is None else f"sentinel_no_{ablate}"
    report = MetricsReport(method=method, mesh_size=mesh_size,
                           config_hash=_config_hash(method, mesh_size, transport))
    results: dict[str, CaseResult] = {}
    latencies: list[float] = []
    breakdowns: list[dict] = []
    started = time.perf_counter()
    for case in cases:
        mesh = build_mesh(world, mesh_size=mesh_size, transport=make_transport(),
                          config=config, mapper_factory=mapper_factory)
        try:
            result = run_case(mesh, case)
        finally:
            mesh.close()
        results[case.case_id] = result
        report.predictions[case.case_id] = result.predicted_attack
        report.total_queries += result.queries_sent
        for decision in result.decisions:
            latencies.append(decision.elapsed)
            breakdowns.append(decision.breakdown)
    report.wall_seconds = time.perf_counter() - started
    return results, _finalize(report, cases, latencies, breakdowns)


def run_method(name: str, cases: Iterable[ScenarioCase], world: Optional[World] = None,
               mesh_size: int = 7, transport: str = "in-process",
               query_timeout: Optional[float] = None) -> MetricsReport:
    cases = list(cases)
    if name == "no_protection":
        report = MetricsReport(method=name, mesh_size=mesh_size,
                               config_hash=_config_hash(name, mesh_size, transport))
        started = time.perf_counter()
        report.predictions = {c.case_id: False for c in cases}
        report.wall_seconds = time.perf_counter() - started
        return _finalize(report, cases, [], [])
    if name == "keyword_dlp":
        report = MetricsReport(method=name, mesh_size=mesh_size,
                               config_hash=_config_hash(name, mesh_size, transport))
        keywords = keyword_list()
        started = time.perf_counter()
        report.predictions = {
            c.case_id: any(keyword_hit(t, keywords) for t in c.texts) for c in cases
        }
        report.wall_seconds = time.perf_counter() - started
        return _finalize(report, cases, [], [])
    if name == "sentinel_full":
        return run_sentinel(cases, world, mesh_size, transport, None, query_timeout)[1]
    if name.startswith("sentinel_no_"):
        ablate = name[len("sentinel_no_"):]
        if ablate not in ABLATIONS:
            raise ValueError(f"unknown ablation {ablate!r}")
        return run_sentinel(cases, world, mesh_size, transport, ablate, query_timeout)[1]
    raise ValueError(f"unknown method {name!r}, expected one of {METHOD_NAMES}")


def scalability_sweep(cases: Iterable[ScenarioCase], world: Optional[World] = None,
                      sizes: Iterable[int] = (4, 8, 16, 32, 64),
                      transport: str = "in-process") -> dict[int, MetricsReport]:
    cases = list(cases)
    world = world or build_world()
    return {
        size: run_method("sentinel_full", cases, world, mesh_size=size, transport=transport)
        for size in sizes
    }


def write_report_json(reports: Iterable[MetricsReport], path) -> None:
    payload = [r.to_dict() for r in reports]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(reports: Iterable[MetricsReport], path) -> None:
    rows = [r.to_dict() for r in reports]
    columns = ["method", "mesh_size", "precision", "recall", "f1", "accuracy",
               "tp", "fp", "tn", "fn", "total_queries", "wall_seconds", "config_hash"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
