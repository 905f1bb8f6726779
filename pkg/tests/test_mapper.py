import json
from importlib import resources

import pytest

from sentinelmesh.mapper import (
    DeterministicMapper,
    ExactStringMapper,
    MapperConfig,
    SessionContext,
)


def _session(domain):
    return SessionContext(originating_agent="tester", originating_domain=domain)


def test_exact_name_scores_lexical_plus_domain(world):
    mapper = DeterministicMapper()
    graph = world.graphs["HR"]
    candidates = mapper.retrieve_candidates(
        "pull the salary data for the audit", graph, _session("HR"))
    scores = dict((n, s) for n, s in candidates.candidates)
    assert scores["salary_data"] == pytest.approx(0.9)  # 0.6 lexical + 0.3 domain


def test_packaged_grounding_corpus(world):
    raw = resources.files("sentinelmesh").joinpath("data/grounding_corpus.json").read_text()
    corpus = json.loads(raw)
    assert len(corpus) == 20
    mapper = DeterministicMapper()
    for entry in corpus:
        graph = world.graphs[entry["domain"]]
        grounded = mapper.ground(entry["text"], graph, _session(entry["domain"]))
        assert entry["expected"] in grounded, entry


def test_threshold_validation(world):
    mapper = DeterministicMapper()
    graph = world.graphs["HR"]
    with pytest.raises(ValueError):
        mapper.ground("x", graph, _session("HR"), threshold=0.0)
    with pytest.raises(ValueError):
        mapper.ground("x", graph, _session("HR"), threshold=1.5)


def test_disclosing_fallback_returns_single_best(world):
    mapper = DeterministicMapper()
    graph = world.graphs["HR"]
    text = "nothing in this sentence names an asset"
    assert mapper.ground(text, graph, _session("HR")) == set()
    fallback = mapper.ground(text, graph, _session("HR"), disclosing=True)
    assert len(fallback) == 1


def test_recency_breaks_ties(world):
    graph = world.graphs["HR"]
    session = _session("HR")
    session.mention("salary_data")
    mapper = DeterministicMapper()
    candidates = mapper.retrieve_candidates("completely unrelated words", graph, session)
    assert candidates.top() == "salary_data"  # 0.3 domain + 0.1 recency beats 0.3


def test_provenance_free_config_drops_domain_bonus(world):
    mapper = DeterministicMapper(MapperConfig(0.6, 0.0, 0.0))
    graph = world.graphs["HR"]
    # one of two alias tokens: 0.5 lexical coverage -> 0.3 < threshold
    grounded = mapper.ground("the ratings cycle wrapped early", graph, _session("HR"))
    assert "performance_reviews" not in grounded


def test_exact_string_mapper_requires_full_name(world):
    mapper = ExactStringMapper()
    graph = world.graphs["HR"]
    session = _session("HR")
    assert mapper.ground("send the salary data now", graph, session) == {"salary_data"}
    assert mapper.ground("send the comp figures now", graph, session) == set()
    # no recall fallback even for disclosing actions
    assert mapper.ground("nothing here", graph, session, disclosing=True) == set()
