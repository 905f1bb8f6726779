"""Standalone policy oracle: nine organizational rules over flow cases.

This checker is deliberately independent of the enforcement pipeline.  It sees
whole flow chains with full registry knowledge (data sensitivity, domain
ownership, sink risk, cross-domain authorization) and renders an explainable
verdict with a per-rule trace.  The benchmark uses it as the ground-truth
cross-check for generated labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence, Union

from . import registry_defaults as defaults
from .actions import DISCLOSING_VERBS

CREDENTIAL_VERBS = frozenset({"access_with_expired_creds", "access_with_cached_session"})

DANGEROUS_COMBOS = (frozenset({"SALARY", "PII"}), frozenset({"CUSTOMER_DATA", "EXTERNAL"}))

RULE_DESCRIPTIONS = {
    "R1": "unauthorized external data sink",
    "R2": "RESTRICTED data export prohibition",
    "R3": "cross-domain CONFIDENTIAL transfer without authorization",
    "R4": "public write of sensitive data",
    "R5": "PII exposure to boundary agents or external targets",
    "R6": "credential containment violation",
    "R7": "legal-privilege restriction",
    "R8": "multi-source aggregation risk",
    "R9": "multi-hop laundering",
}


class ValidationError(ValueError):
    """A flow case references something the registries do not know."""


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class Registries:
    data: dict[str, dict] = field(default_factory=lambda: dict(defaults.DATA_REGISTRY))
    agents: dict[str, str] = field(default_factory=lambda: dict(defaults.AGENT_REGISTRY))
    sinks: dict[str, str] = field(default_factory=lambda: dict(defaults.SINK_REGISTRY))
    auth: dict[str, dict[str, bool]] = field(default_factory=lambda: {
        src: dict(row) for src, row in defaults.AUTH_MATRIX.items()
    })
    boundary_agents: frozenset[str] = defaults.BOUNDARY_AGENTS

    def validate(self) -> None:
        domains = set(defaults.DOMAINS)
        for name, entry in self.data.items():
            if entry["sensitivity"] not in defaults.SENSITIVITY_LEVELS:
                raise ValidationError(f"data type {name!r} has unknown sensitivity")
            if entry["owning_domain"] not in domains:
                raise ValidationError(f"data type {name!r} has unknown owning domain")
        if set(self.agents.values()) - domains:
            raise ValidationError("agent registry references unknown domains")


@dataclass(frozen=True)
class FlowRecord:
    """One hop of data movement: an actor applies a verb to data, at a target."""

    actor: str
    verb: str
    data_types: tuple[str, ...]
    target: str
    sensitivity: Optional[str] = None   # derived from the registry when omitted
    categories: Optional[frozenset[str]] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "actor": self.actor,
            "verb": self.verb,
            "data_types": list(self.data_types),
            "target": self.target,
            "sensitivity": self.sensitivity,
            "categories": sorted(self.categories) if self.categories is not None else None,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FlowRecord":
        cats = raw.get("categories")
        return cls(
            actor=raw["actor"],
            verb=raw["verb"],
            data_types=tuple(raw["data_types"]),
            target=raw["target"],
            sensitivity=raw.get("sensitivity"),
            categories=frozenset(cats) if cats is not None else None,
        )


@dataclass(frozen=True)
class FlowCase:
    case_id: str
    flows: tuple[FlowRecord, ...]

    def __post_init__(self) -> None:
        if not self.flows:
            raise ValidationError(f"case {self.case_id!r} has no flows")

    def to_dict(self) -> dict[str, Any]:
        return {"case_id": self.case_id, "flows": [f.to_dict() for f in self.flows]}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FlowCase":
        return cls(raw["case_id"], tuple(FlowRecord.from_dict(f) for f in raw["flows"]))


@dataclass(frozen=True)
class PolicyDecision:
    blocked: bool
    trace: tuple[tuple[str, str], ...] = ()   # (rule id, explanation)

    @property
    def rules(self) -> frozenset[str]:
        return frozenset(rule for rule, _msg in self.trace)


def _rank(sensitivity: str) -> int:
    return defaults.SENSITIVITY_RANK[sensitivity]


def _flow_info(flow: FlowRecord, reg: Registries) -> dict[str, Any]:
    """Resolve one flow against the registries; unknown references reject."""
    if flow.actor not in reg.agents:
        raise ValidationError(f"unknown actor {flow.actor!r}")
    entries = []
    for dt in flow.data_types:
        if dt not in reg.data:
            raise ValidationError(f"unknown data type {dt!r}")
        entries.append(reg.data[dt])
    sensitivity = flow.sensitivity
    if sensitivity is None:
        sensitivity = max((e["sensitivity"] for e in entries), key=_rank, default="PUBLIC")
    elif sensitivity not in defaults.SENSITIVITY_LEVELS:
        raise ValidationError(f"unknown sensitivity {sensitivity!r}")
    categories = flow.categories
    if categories is None:
        categories = frozenset().union(*(e["categories"] for e in entries)) if entries else frozenset()

    is_agent = flow.target in reg.agents
    is_sink = flow.target in reg.sinks
    if not is_agent and not is_sink:
        raise ValidationError(f"unknown target {flow.target!r}")
    sink_risk = reg.sinks.get(flow.target)
    external = (
        (is_sink and sink_risk in defaults.EXTERNAL_RISK_CLASSES)
        or (is_agent and flow.target in reg.boundary_agents)
        or flow.verb in ("send_external", "publish")
    )
    return {
        "actor_domain": reg.agents[flow.actor],
        "target_domain": reg.agents.get(flow.target),
        "sensitivity": sensitivity,
        "categories": categories,
        "owning_domains": frozenset(e["owning_domain"] for e in entries),
        "sensitive_owning_domains": frozenset(
            e["owning_domain"] for e in entries if _rank(e["sensitivity"]) >= _rank("CONFIDENTIAL")
        ),
        "sink_risk": sink_risk,
        "external": external,
        "disclosing": flow.verb in DISCLOSING_VERBS,
    }


def evaluate(case: FlowCase, registries: Optional[Registries] = None) -> PolicyDecision:
    """Apply rules R1-R9; Block iff any rule fires.  The trace lists every
    fired rule, so order never changes the verdict."""
    reg = registries or Registries()
    infos = [_flow_info(flow, reg) for flow in case.flows]
    final_flow, final = case.flows[-1], infos[-1]
    trace: list[tuple[str, str]] = []

    def fire(rule: str, detail: str) -> None:
        trace.append((rule, f"{RULE_DESCRIPTIONS[rule]}: {detail}"))

    # R1: non-public data reaching a prohibited sink
    if final["sink_risk"] == "prohibited" and _rank(final["sensitivity"]) > _rank("PUBLIC"):
        fire("R1", f"{final['sensitivity']} data sent to {final_flow.target}")

    # R2: RESTRICTED data export to anything outside the organization
    if final["external"] and _rank(final["sensitivity"]) >= _rank("RESTRICTED"):
        fire("R2", f"RESTRICTED data exported via {final_flow.target}")

    # R3: unauthorized cross-domain CONFIDENTIAL transfer between agents
    for flow, info in zip(case.flows, infos):
        if info["target_domain"] is None or _rank(info["sensitivity"]) < _rank("CONFIDENTIAL"):
            continue
        for owner in info["owning_domains"]:
            if not reg.auth.get(owner, {}).get(info["target_domain"], False):
                fire("R3", f"{owner} data moved to {info['target_domain']} ({flow.actor} -> {flow.target})")
                break
        else:
            continue
        break

    # R4: publishing CONFIDENTIAL-or-higher data to public surfaces
    if final_flow.verb in ("write_wiki", "publish") and _rank(final["sensitivity"]) >= _rank("CONFIDENTIAL"):
        fire("R4", f"{final['sensitivity']} data written to a public surface")

    # R5: PII reaching boundary agents or external targets
    for flow, info in zip(case.flows, infos):
        if "PII" in info["categories"] and (info["external"] or flow.target in reg.boundary_agents):
            fire("R5", f"PII routed to {flow.target}")
            break

    # R6: credential misuse, or credential material leaving its owning domain
    for flow, info in zip(case.flows, infos):
        if flow.verb in CREDENTIAL_VERBS:
            fire("R6", f"{flow.actor} used {flow.verb}")
            break
        if "CREDENTIAL" in info["categories"]:
            off_domain = info["external"] or (
                info["target_domain"] is not None
                and info["target_domain"] not in info["owning_domains"]
            )
            if off_domain:
                fire("R6", f"credential material moved to {flow.target}")
                break

    # R7: legally privileged material outside the LEGAL domain
    for flow, info in zip(case.flows, infos):
        if "LEGAL_PRIVILEGE" not in info["categories"]:
            continue
        outside = info["external"] or (
            info["target_domain"] is not None and info["target_domain"] != "LEGAL"
        )
        if outside:
            fire("R7", f"privileged material routed to {flow.target}")
            break

    # R8: aggregation risk - sensitive types from >= 2 owning domains combined,
    # then disclosed; plus the known-dangerous category combinations
    combined_owners = frozenset().union(*(i["sensitive_owning_domains"] for i in infos))
    all_categories = frozenset().union(*(i["categories"] for i in infos))
    if final["disclosing"] and final["external"] and len(combined_owners) >= 2:
        fire("R8", f"sensitive data of {sorted(combined_owners)} combined and disclosed")
    elif final_flow.verb in ("send_external", "write_wiki") and any(
        combo <= all_categories for combo in DANGEROUS_COMBOS
    ):
        fire("R8", "dangerous category combination disclosed")

    # R9: laundering - long chain with non-decreasing sensitivity ending in
    # an external disclosure
    sensitivities = [_rank(i["sensitivity"]) for i in infos]
    if (
        len(case.flows) >= 3
        and all(a <= b for a, b in zip(sensitivities, sensitivities[1:]))
        and final["disclosing"] and final["external"]
        and sensitivities[-1] > _rank("PUBLIC")
    ):
        fire("R9", f"{len(case.flows)}-hop chain laundering {final['sensitivity']} data externally")

    return PolicyDecision(blocked=bool(trace), trace=tuple(trace))


def agreement(decisions: Sequence[Union[PolicyDecision, bool]],
              labels: Sequence[bool],
              cases: Optional[Sequence[FlowCase]] = None) -> tuple[float, list[dict]]:
    """Compare checker verdicts with template labels; emit every disagreement
    with its rule trace for manual triage."""
    if len(decisions) != len(labels):
        raise InputError(f"{len(decisions)} decisions vs {len(labels)} labels")
    if not decisions:
        raise InputError("empty comparison")
    disagreements = []
    hits = 0
    for i, (decision, label) in enumerate(zip(decisions, labels)):
        blocked = decision.blocked if isinstance(decision, PolicyDecision) else bool(decision)
        if blocked == bool(label):
            hits += 1
            continue
        entry = {
            "index": i,
            "checker": blocked,
            "label": bool(label),
            "trace": list(decision.trace) if isinstance(decision, PolicyDecision) else [],
        }
        if cases is not None and i < len(cases):
            entry["case_id"] = cases[i].case_id
        disagreements.append(entry)
    return hits / len(decisions), disagreements


class SentinelBaseline:
    """Static taint-tracking baseline with a cumulative-risk rule.

    Weaker than the full oracle by design: it reasons over flow metadata only
    and blocks when heuristic risk crosses 0.7.
    """

    RISK = {"PUBLIC": 0.0, "INTERNAL": 0.2, "CONFIDENTIAL": 0.6, "RESTRICTED": 0.9}
    THRESHOLD = 0.7

    def __init__(self, registries: Optional[Registries] = None):
        self.registries = registries or Registries()

    def evaluate(self, case: FlowCase) -> bool:
        """True means Block."""
        reg = self.registries
        infos = [_flow_info(flow, reg) for flow in case.flows]
        final_flow, final = case.flows[-1], infos[-1]

        if self._detect_side_channel(case, infos):
            return True

        if any(f.verb in CREDENTIAL_VERBS for f in case.flows):
            if final["sensitivity"] in ("CONFIDENTIAL", "RESTRICTED"):
                return True

        if final["sensitivity"] == "CONFIDENTIAL" and final_flow.verb == "write_wiki":
            return True

        if self.cumulative_risk(case) >= self.THRESHOLD:
            return True

        all_categories = frozenset().union(*(i["categories"] for i in infos))
        if final_flow.verb in ("send_external", "write_wiki"):
            if any(combo <= all_categories for combo in DANGEROUS_COMBOS):
                return True

        return False

    def cumulative_risk(self, case: FlowCase) -> float:
        reg = self.registries
        infos = [_flow_info(flow, reg) for flow in case.flows]
        risk = sum(self.RISK[i["sensitivity"]] for i in infos) / len(infos)
        if infos[-1]["external"]:
            risk += 0.2
        return min(1.0, risk)

    def _detect_side_channel(self, case: FlowCase, infos: list[dict]) -> bool:
        correlating = sum(1 for f in case.flows if f.verb in ("correlate", "query"))
        owners = frozenset().union(*(i["owning_domains"] for i in infos))
        return correlating >= 2 and len(owners) >= 2 and infos[-1]["disclosing"] and infos[-1]["external"]


# flow-case files are JSON-lines, one case per line

def load_cases(path) -> list[FlowCase]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cases.append(FlowCase.from_dict(json.loads(line)))
    return cases


def save_cases(cases: Iterable[FlowCase], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case.to_dict(), sort_keys=True) + "\n")
