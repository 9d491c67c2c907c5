"""Roundtable evolution: role parsing, the loop, trace persistence."""

from __future__ import annotations

import pytest

import helpers
from graphforge import golden_demo, legislator
from graphforge.client import BackendConfig, ChatResponse, write_transcript
from graphforge.errors import (
    CritiqueUnparseable,
    DecisionUnparseable,
    ProposalUnparseable,
)
from graphforge.graphs import StyleTokens, complexity, graph_from_dict
from graphforge.initializer import SeedDraw, sample_seed
from graphforge.legislator import (
    EvolutionPolicy,
    critique,
    evolve,
    initial_graph,
    load_trace,
    moderate,
    parse_critique,
    parse_decision,
    propose,
    save_trace,
    split_sections,
)

STYLE = StyleTokens(golden_demo.GOLDEN_STYLE)
DUMMY = BackendConfig(kind="scripted", transcript_path="unused.jsonl")


def fake_calls(monkeypatch, responses: list[str]) -> list[str]:
    seen: list[str] = []

    def fake(cfg, request):
        seen.append(request.messages[-1].content)
        index = min(len(seen), len(responses)) - 1
        return ChatResponse(content=responses[index])

    monkeypatch.setattr(legislator, "complete_with_retry", fake)
    return seen


def golden_draw() -> SeedDraw:
    seed = golden_demo.find_golden_seed()
    return sample_seed(golden_demo.GOLDEN_POOL, seed)


# --- section splitting -------------------------------------------------------------


def test_split_sections_with_bullets_and_case():
    text = "- analysis: first\nmore\n* DECISION: Suspend\n- Final Graph: N/A"
    sections = split_sections(text, ["Analysis", "Decision", "Final Graph"])
    assert sections["Analysis"] == "first\nmore"
    assert sections["Decision"] == "Suspend"
    assert sections["Final Graph"] == "N/A"


def test_split_sections_name_opens_only_once():
    text = "- Analysis: real\n- Suggestions:\n- Analysis: this is content, not a header\n- Utility: High"
    sections = split_sections(text, ["Analysis", "Suggestions", "Utility"])
    assert sections["Analysis"] == "real"
    assert "Analysis: this is content" in sections["Suggestions"]


# --- propose ---------------------------------------------------------------------------


def test_propose_from_seed_yields_first_blueprint(monkeypatch):
    fake_calls(monkeypatch, [golden_demo.PROPOSER_RESPONSE_1])
    g = propose(DUMMY, STYLE, initial_graph(golden_draw()), "")
    assert len(g.nodes) == 5 and len(g.edges) == 4


def test_propose_with_guidance_yields_revision(monkeypatch):
    seen = fake_calls(monkeypatch, [golden_demo.PROPOSER_RESPONSE_2])
    g1 = graph_from_dict(golden_demo.GRAPH_1)
    g = propose(DUMMY, STYLE, g1, golden_demo.GOLDEN_GUIDANCE)
    assert any(n.concept == "Partial Derivative Calculation" for n in g.nodes)
    assert golden_demo.GOLDEN_GUIDANCE in seen[0]


def test_propose_retry_exhaustion_counts_calls(monkeypatch):
    seen = fake_calls(monkeypatch, ["prose with no json at all"])
    with pytest.raises(ProposalUnparseable):
        propose(DUMMY, STYLE, initial_graph(golden_draw()), "", parse_retries=2)
    assert len(seen) == 3
    # Retries carry the appended format reminder; the first call does not.
    assert "output only the JSON" not in seen[0]
    assert "output only the JSON" in seen[1]


def test_propose_recovers_on_retry(monkeypatch):
    responses = ["garbage", golden_demo.PROPOSER_RESPONSE_1]
    seen: list[str] = []

    def fake(cfg, request):
        seen.append(request.messages[-1].content)
        return ChatResponse(content=responses[len(seen) - 1])

    monkeypatch.setattr(legislator, "complete_with_retry", fake)
    g = propose(DUMMY, STYLE, initial_graph(golden_draw()), "", parse_retries=2)
    assert len(g.nodes) == 5 and len(seen) == 2


# --- critique -----------------------------------------------------------------------------


def test_critique_flags_difficulty_overshoot(monkeypatch):
    fake_calls(monkeypatch, [golden_demo.CRITIQUE_RESPONSE_1])
    report = critique(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_1))
    assert report.critical_flaws and "elliptic integrals" in report.critical_flaws[0]
    assert any("a = b" in s for s in report.refinement_suggestions)
    assert report.expected_utility == "High"


def test_critique_clean_graph_maps_none_to_empty(monkeypatch):
    fake_calls(monkeypatch, [golden_demo.CRITIQUE_RESPONSE_2])
    report = critique(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_2))
    assert report.critical_flaws == ()
    assert len(report.refinement_suggestions) == 3
    assert report.expected_utility in ("High", "Medium", "Low")


def test_critique_missing_utility_section_unparseable(monkeypatch):
    fake_calls(monkeypatch, ["- Analysis: x\n- Critical Flaws: None\n- Refinement Suggestions:\n- y"])
    with pytest.raises(CritiqueUnparseable):
        critique(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_2))


def test_critique_injects_structural_violations(monkeypatch):
    seen = fake_calls(monkeypatch, [golden_demo.CRITIQUE_RESPONSE_2])
    broken = graph_from_dict(golden_demo.GRAPH_2)
    broken = type(broken)(
        graph_id=broken.graph_id,
        nodes=broken.nodes,
        edges=broken.edges + (broken.edges[0],),
        mutation_log=broken.mutation_log,
    )
    critique(DUMMY, STYLE, broken)
    assert "duplicate-edge" in seen[0]


def test_parse_critique_utility_prefix_matching():
    base = "- Analysis: a\n- Critical Flaws: None\n- Refinement Suggestions:\n- s\n- Expected Utility: {u}"
    assert parse_critique(base.format(u="medium, mostly polish")).expected_utility == "Medium"
    assert parse_critique(base.format(u="[Low]")).expected_utility == "Low"
    with pytest.raises(CritiqueUnparseable):
        parse_critique(base.format(u="substantial"))


# --- moderate ------------------------------------------------------------------------------


def golden_report():
    return parse_critique(golden_demo.CRITIQUE_RESPONSE_2)


def test_moderate_suspend_takes_final_graph_from_response(monkeypatch):
    fake_calls(monkeypatch, [golden_demo.MODERATOR_RESPONSE_2])
    decision = moderate(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_2), golden_report())
    assert decision.decision == "Terminate"
    assert decision.guidance == ""
    assert decision.final_graph == graph_from_dict(golden_demo.GRAPH_2)


def test_moderate_iterate_with_guidance(monkeypatch):
    fake_calls(monkeypatch, [golden_demo.MODERATOR_RESPONSE_1])
    decision = moderate(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_1), golden_report())
    assert decision.decision == "Iterate"
    assert decision.final_graph is None
    assert "symmetric case" in decision.guidance


def test_moderate_unknown_token_unparseable(monkeypatch):
    fake_calls(monkeypatch, ["- Analysis: x\n- Decision: Maybe\n- Guidance for the Proposer: y\n- Final Graph: N/A"])
    with pytest.raises(DecisionUnparseable):
        moderate(DUMMY, STYLE, graph_from_dict(golden_demo.GRAPH_1), golden_report())


def test_parse_decision_synonyms():
    g = graph_from_dict(golden_demo.GRAPH_2)
    for token in ("Suspend", "TERMINATE", "terminate."):
        d = parse_decision(f"- Decision: {token}\n- Final Graph: N/A", g)
        assert d.decision == "Terminate" and d.final_graph == g
    for token in ("Continue Iteration", "Iterate", "ITERATE"):
        d = parse_decision(f"- Decision: {token}\n- Guidance for the Proposer: push on", g)
        assert d.decision == "Iterate" and d.guidance == "push on"


def test_parse_decision_terminate_defaults_to_input_graph():
    g = graph_from_dict(golden_demo.GRAPH_2)
    d = parse_decision("- Decision: Suspend\n- Final Graph: not json", g)
    assert d.final_graph == g


def test_parse_decision_iterate_without_guidance_unparseable():
    g = graph_from_dict(golden_demo.GRAPH_1)
    with pytest.raises(DecisionUnparseable):
        parse_decision("- Decision: Iterate\n- Guidance for the Proposer: None", g)


# --- evolve -----------------------------------------------------------------------------------


def golden_backend(tmp_path) -> BackendConfig:
    seed = golden_demo.find_golden_seed()
    path = tmp_path / "golden.jsonl"
    write_transcript(path, golden_demo.golden_transcript_entries(seed))
    return BackendConfig(kind="scripted", transcript_path=str(path))


def test_evolve_golden_episode_two_rounds(tmp_path):
    backend = golden_backend(tmp_path)
    trace = evolve(backend, golden_draw(), EvolutionPolicy(max_iterations=5, parse_retries=2))
    assert trace.outcome == "Truncated"
    assert [step.t for step in trace.steps] == [1, 2]
    assert trace.final_graph is not None
    assert len(trace.final_graph.nodes) == 6 and len(trace.final_graph.edges) == 5
    assert trace.forced_truncation is False
    # Replay determinism: a second run is identical.
    assert evolve(backend, golden_draw(), EvolutionPolicy(5, 2)) == trace


def test_evolve_golden_complexity_strictly_increases(tmp_path):
    backend = golden_backend(tmp_path)
    trace = evolve(backend, golden_draw(), EvolutionPolicy(5, 2))
    g0 = initial_graph(golden_draw())
    scores = [complexity(g0)] + [complexity(step.proposed) for step in trace.steps]
    assert scores == [1, 12, 15]
    assert scores[0] < scores[1] < scores[2]


def test_evolve_cap_forced_when_moderator_never_stops(tmp_path):
    pool = helpers.many_leaf_pool(4)
    draw = sample_seed(pool, 7)
    entries = helpers.always_iterate_episode_entries(draw, 3, question="Q?", answer="A. \\boxed{1}")
    path = tmp_path / "iterate.jsonl"
    write_transcript(path, entries)
    backend = BackendConfig(kind="scripted", transcript_path=str(path))
    trace = evolve(backend, draw, EvolutionPolicy(max_iterations=3, parse_retries=0))
    assert trace.outcome == "CapForced"
    assert trace.forced_truncation is True
    assert len(trace.steps) == 3
    assert trace.final_graph == trace.steps[-1].proposed


def test_evolve_garbage_proposer_fails_with_zero_steps(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_transcript(path, [])
    backend = BackendConfig(kind="scripted", transcript_path=str(path))
    trace = evolve(backend, golden_draw(), EvolutionPolicy(2, 0))
    assert trace.outcome == "Failed"
    assert trace.steps == ()
    assert trace.final_graph is None
    assert trace.error and "NoTranscriptMatch" in trace.error


def test_trace_round_trip_file(tmp_path):
    backend = golden_backend(tmp_path)
    trace = evolve(backend, golden_draw(), EvolutionPolicy(5, 2))
    path = tmp_path / "trace.json"
    save_trace(trace, path, "ep-x")
    assert load_trace(path) == trace
