import json
from collections import Counter

import pytest

from sentinelmesh.bench.generate import (
    ATTACK_COUNTS,
    CATEGORIES,
    CONTROL_COUNTS,
    FORBIDDEN_MARKERS,
    generate,
    keyword_hit,
    keyword_list,
    load_scenarios,
    save_scenarios,
    validate_cases,
)
from sentinelmesh.bench.mesh import (
    MESH_LAYOUTS,
    audience_for_target,
    build_mesh,
    layout_for,
    run_case,
)
from sentinelmesh.bench.methods import (
    METHOD_NAMES,
    run_method,
    run_sentinel,
    write_report_csv,
    write_report_json,
)
from sentinelmesh.bench.world import GRAPH_TARGETS, build_world


def test_world_graph_sizes_match_targets(world):
    for domain, (nodes, edges, constraints) in GRAPH_TARGETS.items():
        stats = world.stats()[domain]
        assert (stats["nodes"], stats["edges"], stats["constraints"]) == (
            nodes, edges, constraints), domain


def test_world_generation_is_deterministic(world):
    again = build_world(seed=0)
    for domain, graph in world.graphs.items():
        assert again.graphs[domain].content_hash() == graph.content_hash()


def test_generation_counts_and_labels(cases):
    assert len(cases) == 200
    attacks = [c for c in cases if c.label == "attack"]
    controls = [c for c in cases if c.label == "legitimate"]
    assert len(attacks) == sum(ATTACK_COUNTS.values()) == 160
    assert len(controls) == sum(CONTROL_COUNTS.values()) == 40
    per_cat = Counter(c.category for c in attacks)
    assert dict(per_cat) == dict(ATTACK_COUNTS)
    assert set(per_cat) == set(CATEGORIES)
    assert Counter(c.difficulty for c in cases) == Counter(
        {"easy": 62, "medium": 84, "hard": 54})


def test_every_attack_is_paired_with_a_control(cases):
    control_ids = {c.case_id for c in cases if c.label == "legitimate"}
    for attack in (c for c in cases if c.label == "attack"):
        assert attack.paired_control_id in control_ids
    for control in (c for c in cases if c.label == "legitimate"):
        assert not control.paired_control_id


def test_no_forbidden_markers(cases):
    for case in cases:
        for text in case.texts:
            assert not any(marker in text for marker in FORBIDDEN_MARKERS), case.case_id


def test_side_channel_texts_are_keyword_free(cases):
    kws = keyword_list()
    assert kws
    for case in cases:
        if case.category == "side_channel" and case.label == "attack":
            assert not any(keyword_hit(t, kws) for t in case.texts), case.case_id


def test_generation_is_deterministic_and_round_trips(cases, tmp_path):
    again = generate(seed=0)
    assert again == cases
    path = tmp_path / "scenarios.jsonl"
    save_scenarios(cases, path)
    first = path.read_bytes()
    assert load_scenarios(path) == cases
    save_scenarios(again, path)
    assert path.read_bytes() == first  # byte-identical for a fixed seed


def test_validate_cases_accepts_default_corpus(cases):
    validate_cases(cases)


def test_mesh_layouts():
    assert set(MESH_LAYOUTS) == {4, 7}
    assert len(layout_for(4)) == 4
    assert len(layout_for(7)) == 7
    big = layout_for(16)
    assert len(big) == 16
    assert sum(1 for group in big if group[0].startswith("AUX_")) == 9


def test_audience_for_target():
    assert audience_for_target("partner_crm_sync") == "partner"
    assert audience_for_target("press_release_wire") == "public"
    assert audience_for_target("internal_wiki") == "internal"
    assert audience_for_target("external_contractor_email") == "external"
    assert audience_for_target("public_relations") == "external"   # boundary agent
    assert audience_for_target("finance_analyst") == "internal"


def test_run_case_blocks_attack_and_passes_control(cases, world):
    attack = next(c for c in cases if c.label == "attack"
                  and c.category == "direct_leak" and c.variant == "exact")
    control = next(c for c in cases if c.label == "legitimate")
    mesh = build_mesh(world)
    try:
        blocked = run_case(mesh, attack)
        assert blocked.predicted_attack
        assert blocked.blocked_flow is not None
        passed = run_case(mesh, control)
        assert not passed.predicted_attack
        assert passed.blocked_flow is None
    finally:
        mesh.close()


def test_run_method_names_are_closed():
    with pytest.raises(ValueError):
        run_method("nonexistent_method", [])


def test_report_writers(cases, world, tmp_path):
    subset = [c for c in cases if c.category == "direct_leak"][:6]
    report = run_method("keyword_dlp", subset, world)
    assert report.method == "keyword_dlp"
    assert report.tp + report.fp + report.tn + report.fn == len(subset)
    json_path = tmp_path / "report.json"
    csv_path = tmp_path / "report.csv"
    write_report_json([report], json_path)
    write_report_csv([report], csv_path)
    loaded = json.loads(json_path.read_text())
    assert loaded[0]["method"] == "keyword_dlp"
    assert "precision" in loaded[0] and "config_hash" in loaded[0]
    header = csv_path.read_text().splitlines()[0]
    assert "method" in header and "f1" in header


def test_sentinel_on_subset_is_perfect(cases, world):
    subset = [c for c in cases
              if c.category in ("direct_leak", "cross_org", "token_manipulation")]
    results, report = run_sentinel(subset, world)
    assert report.fn == 0 and report.fp == 0
    assert len(results) == len(subset)
    assert report.f1 == 1.0
    assert all(name in METHOD_NAMES for name in ("sentinel_full", "no_protection"))
