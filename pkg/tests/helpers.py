"""Shared builders for scripted-episode fixtures.

Everything here composes transcripts through the package's own prompt
renderers and parsers, so a fixture stays in sync with the prompts by
construction; the *content* of each scripted response is authored here.
"""

from __future__ import annotations

import json
from pathlib import Path

from graphforge import prompts
from graphforge.client import Message, match_key_for
from graphforge.graphs import ConstraintGraph, Edge, Node, graph_to_dict, validate
from graphforge.initializer import InitialPool, SeedDraw, TaxonomyNode, sample_seed
from graphforge.legislator import (
    initial_graph,
    parse_critique,
    render_report,
    structural_notes,
)


def entry(prompt: str, content: str, **extra) -> dict:
    record = {
        "match_key": match_key_for((Message("user", prompt),)),
        "content": content,
        "prompt_tokens": max(1, len(prompt) // 4),
        "completion_tokens": max(1, len(content) // 4),
    }
    record.update(extra)
    return record


def chain_graph(concept: str, length: int, graph_id: str) -> ConstraintGraph:
    """A depth-``length`` chain rooted at the concept node."""
    nodes = [Node("v_1", concept, "seed concept")]
    edges = []
    for i in range(2, length + 2):
        nodes.append(Node(f"v_{i}", f"{concept} aspect {i}", f"derived facet {i} of the concept"))
        edges.append(Edge(f"v_{i - 1}", f"v_{i}", "depends_on"))
    return ConstraintGraph(graph_id=graph_id, nodes=tuple(nodes), edges=tuple(edges), mutation_log="extended the chain")


def critique_text(flaws: list[str] | None, suggestions: list[str], utility: str) -> str:
    lines = ["- Analysis: Routine structural review of the proposal."]
    if flaws:
        lines.append("- Critical Flaws:")
        lines.extend(f"- {f}" for f in flaws)
    else:
        lines.append("- Critical Flaws: None")
    lines.append("- Refinement Suggestions:")
    lines.extend(f"- {s}" for s in suggestions)
    lines.append(f"- Expected Utility: {utility}")
    return "\n".join(lines)


def terminate_text(graph: ConstraintGraph) -> str:
    return (
        "- Analysis: The graph satisfies the style tokens; marginal gain from further rounds.\n"
        "- Decision: Suspend\n"
        "- Guidance for the Proposer: None\n"
        f"- Final Graph:\n{json.dumps(graph_to_dict(graph), indent=2)}"
    )


def iterate_text(guidance: str) -> str:
    return (
        "- Analysis: The structure has not yet reached the target complexity.\n"
        "- Decision: Continue Iteration\n"
        f"- Guidance for the Proposer: {guidance}\n"
        "- Final Graph: N/A"
    )


def proposer_text(graph: ConstraintGraph) -> str:
    return (
        "Analysis and Planning: Apply the requested mutations to the blueprint.\n"
        "Final Optimized Graph (JSON):\n"
        f"{json.dumps(graph_to_dict(graph), indent=2)}"
    )


def executor_text(question: str) -> str:
    return f"- Analysis: Map each node onto the narrative.\n- Question: {question}"


def judge_text(passes: bool, failing_check: str = "answer_correct") -> str:
    checks = {"question_valid": "yes", "answer_correct": "yes", "qa_consistent": "yes"}
    if not passes:
        checks[failing_check] = "no"
    lines = [f"{name}: {value}" for name, value in checks.items()]
    lines.append("rationale: Scripted verdict for the test corpus.")
    return "\n".join(lines)


def one_round_episode_entries(
    draw: SeedDraw,
    *,
    question: str,
    answer: str,
    judge_passes: bool,
) -> list[dict]:
    """Entries for one episode that terminates after a single round."""
    style = draw.style
    g0 = initial_graph(draw)
    g1 = chain_graph(draw.concept, 1, "G_1")
    report = parse_critique(critique_text(None, ["Deepen the chain.", "Add a constraint."], "Low"))
    entries = [
        entry(prompts.proposer_prompt(style, g0, ""), proposer_text(g1)),
        entry(prompts.critic_prompt(style, g1, structural_notes(validate(g1))),
              critique_text(None, ["Deepen the chain.", "Add a constraint."], "Low")),
        entry(prompts.moderator_prompt(style, g1, render_report(report)), terminate_text(g1)),
        entry(prompts.executor_prompt(g1, style), executor_text(question)),
        entry(prompts.solver_prompt(question), answer),
        entry(prompts.verifier_prompt(question, answer), judge_text(judge_passes)),
    ]
    return entries


def always_iterate_episode_entries(
    draw: SeedDraw,
    max_iterations: int,
    *,
    question: str,
    answer: str,
    judge_passes: bool = True,
) -> list[dict]:
    """Entries for an episode whose moderator never truncates."""
    style = draw.style
    prev = initial_graph(draw)
    guidance = ""
    entries = []
    for t in range(1, max_iterations + 1):
        proposed = chain_graph(draw.concept, t, f"G_{t}")
        next_guidance = f"Deepen the chain once more (round {t})."
        report = parse_critique(critique_text(None, ["Keep going."], "High"))
        entries += [
            entry(prompts.proposer_prompt(style, prev, guidance), proposer_text(proposed)),
            entry(prompts.critic_prompt(style, proposed, structural_notes(validate(proposed))),
                  critique_text(None, ["Keep going."], "High")),
            entry(prompts.moderator_prompt(style, proposed, render_report(report)),
                  iterate_text(next_guidance)),
        ]
        prev, guidance = proposed, next_guidance
    entries += [
        entry(prompts.executor_prompt(prev, style), executor_text(question)),
        entry(prompts.solver_prompt(question), answer),
        entry(prompts.verifier_prompt(question, answer), judge_text(judge_passes)),
    ]
    return entries


def many_leaf_pool(n_leaves: int = 200) -> InitialPool:
    return InitialPool(
        style_dimensions={"difficulty": ["Easy", "Hard"]},
        concept_taxonomy=TaxonomyNode(
            name="mathematics",
            children=(
                TaxonomyNode(name="topics", concepts=tuple(f"Topic {i:03d}" for i in range(n_leaves))),
            ),
        ),
    )


def distinct_draw_base(pool: InitialPool, episodes: int, start: int = 0) -> int:
    """Smallest seed base giving pairwise-distinct (style, concept) draws."""
    base = start
    while True:
        draws = [sample_seed(pool, base + i) for i in range(episodes)]
        keys = {(tuple(d.style.dimensions.items()), d.concept) for d in draws}
        if len(keys) == episodes:
            return base
        base += 1


def scripted_run_config(
    workdir: Path,
    transcript_path: Path,
    pool_path: Path,
    *,
    run_id: str = "test",
    target_samples: int,
    rng_seed: int,
    max_iterations: int = 5,
    concurrency: int = 1,
) -> dict:
    return {
        "run_id": run_id,
        "backends": {
            "default": {"kind": "scripted", "transcript_path": str(transcript_path)},
            "embedder": {"kind": "fallback"},
        },
        "pool_source": str(pool_path),
        "target_samples": target_samples,
        "policy": {"max_iterations": max_iterations, "parse_retries": 2},
        "sampling": {"temperature": 0.3, "max_tokens": 4096},
        "concurrency": concurrency,
        "output_dir": str(workdir / "out"),
        "rng_seed": rng_seed,
    }
