"""Bundled offline demo episode: the saddle-surface chip problem.

A complete two-round evolution (proposal, critique, guidance, revised
proposal, truncation) plus instantiation, solution, and verification, all as
scripted transcript entries. The builder renders every prompt through the
same functions the pipeline uses and keys entries by the content hash, so the
demo run and the golden replay tests exercise the real code path end to end
with zero network.
"""

from __future__ import annotations

import json
from pathlib import Path

from graphforge import prompts
from graphforge.client import Message, match_key_for, write_transcript
from graphforge.graphs import StyleTokens, graph_from_dict, validate
from graphforge.initializer import InitialPool, TaxonomyNode, sample_seed, save_pool
from graphforge.legislator import (
    initial_graph,
    parse_critique,
    render_report,
    structural_notes,
)

GOLDEN_STYLE = {
    "difficulty": "Medium",
    "question_type": "Calculation",
    "context": "Real-world Application",
    "knowledge_level": "Undergraduate",
}

GOLDEN_CONCEPT = "Saddle Surface"

GOLDEN_POOL = InitialPool(
    style_dimensions={
        "difficulty": ["Easy", "Medium", "Hard"],
        "question_type": ["Calculation", "Proof"],
        "context": ["Abstract", "Real-world Application"],
        "knowledge_level": ["High School", "Undergraduate"],
    },
    concept_taxonomy=TaxonomyNode(
        name="mathematics",
        children=(
            TaxonomyNode(
                name="geometry",
                concepts=("Saddle Surface", "Minimal Surfaces"),
            ),
        ),
    ),
)

GRAPH_1 = {
    "graph_id": "G_1",
    "nodes": [
        {
            "id": "v_1",
            "concept": "Saddle Surface",
            "description": "The abstract geometric primitive characterized by opposing curvatures.",
        },
        {
            "id": "v_2",
            "concept": "Potato Chip Context",
            "description": "Real-world physical object (e.g., Pringles) used to frame the problem.",
        },
        {
            "id": "v_3",
            "concept": "Hyperbolic Paraboloid Equation",
            "description": "The specific algebraic model, e.g., z = x^2/a^2 - y^2/b^2.",
        },
        {
            "id": "v_4",
            "concept": "Cylindrical Domain Constraint",
            "description": "The boundary condition restricting the surface to a finite disk, x^2 + y^2 <= R^2.",
        },
        {
            "id": "v_5",
            "concept": "Surface Area Integral",
            "description": "The double integral calculation required to find the total area of the curved surface.",
        },
    ],
    "edges": [
        {"source": "v_2", "target": "v_1", "relation": "instantiates"},
        {"source": "v_1", "target": "v_3", "relation": "formalized_by"},
        {"source": "v_3", "target": "v_5", "relation": "integrand_source"},
        {"source": "v_4", "target": "v_5", "relation": "defines_limits"},
    ],
    "mutation_log": "Expanded the seed concept into a five-node blueprint: real-world framing, algebraic model, bounded domain, and target integral.",
}

GRAPH_2 = {
    "graph_id": "G_2",
    "nodes": [
        {
            "id": "v_1",
            "concept": "Saddle Surface",
            "description": "The abstract geometric primitive characterized by opposing curvatures.",
        },
        {
            "id": "v_2",
            "concept": "Potato Chip Context",
            "description": "Real-world physical object (e.g., Pringles) used to frame the problem.",
        },
        {
            "id": "v_3",
            "concept": "Hyperbolic Paraboloid Equation",
            "description": "Simplified symmetric model: z = c(x^2 - y^2) with c > 0 constant, or equivalently a = b = 1 in the form z = (x^2 - y^2)/a^2.",
        },
        {
            "id": "v_4",
            "concept": "Cylindrical Domain Constraint",
            "description": "The boundary condition restricting the surface to a finite disk, x^2 + y^2 <= R^2.",
        },
        {
            "id": "v_5",
            "concept": "Surface Area Integral",
            "description": "The double integral calculation for the total area of the curved surface. Now includes symmetry exploitation: integrate over the first quadrant and multiply by 4.",
        },
        {
            "id": "v_6",
            "concept": "Partial Derivative Calculation",
            "description": "Compute dz/dx and dz/dy for the surface area element dS = sqrt(1 + (dz/dx)^2 + (dz/dy)^2) dx dy.",
        },
    ],
    "edges": [
        {"source": "v_2", "target": "v_1", "relation": "instantiates"},
        {"source": "v_1", "target": "v_3", "relation": "formalized_by"},
        {"source": "v_3", "target": "v_6", "relation": "differentiated_to"},
        {"source": "v_6", "target": "v_5", "relation": "integrand_source"},
        {"source": "v_4", "target": "v_5", "relation": "defines_limits"},
    ],
    "mutation_log": "Constrained the equation to the symmetric case a = b (z = c(x^2 - y^2)), inserted a partial-derivative node between the equation and the integral, and noted the quadrant-symmetry simplification.",
}

PROPOSER_RESPONSE_1 = f"""Analysis and Planning: The seed concept is a bare geometric primitive. To reach a Medium, real-world, undergraduate calculation problem, I will ground it in a physical context, formalize it algebraically, bound the domain, and target a surface-area computation.
Final Optimized Graph (JSON):
{json.dumps(GRAPH_1, indent=2)}"""

CRITIQUE_RESPONSE_1 = """- Analysis: The five-node blueprint grounds the saddle surface in a tangible context and names the target integral, which fits a real-world calculation task. Whether the Medium difficulty level holds depends entirely on the algebraic form of the surface.
- Critical Flaws:
- If the parameters a and b in the surface equation z = x^2/a^2 - y^2/b^2 are left unconstrained, the surface area integral involves elliptic integrals, exceeding the intended Medium difficulty.
- Refinement Suggestions:
- Constrain the equation to the symmetric case a = b so the integral stays elementary.
- Add an explicit node for the partial derivative computation that feeds the surface area element.
- Exploit the four-fold symmetry of the domain to simplify the evaluation.
- Expected Utility: High"""

GOLDEN_GUIDANCE = (
    "Constrain the saddle equation to the symmetric case a = b, equivalently "
    "z = c(x^2 - y^2). Insert a partial-derivative node between the equation node "
    "and the surface-integral node. Note the quadrant-symmetry simplification in "
    "the integral node."
)

MODERATOR_RESPONSE_1 = f"""- Analysis: The critic identified a real difficulty overshoot; the graph needs the symmetric constraint and an explicit derivative stage before instantiation is worthwhile.
- Decision: Continue Iteration
- Guidance for the Proposer: {GOLDEN_GUIDANCE}
- Final Graph: N/A"""

PROPOSER_RESPONSE_2 = f"""Analysis and Planning: The guidance asks for the symmetric model, an explicit derivative stage, and a symmetry note on the integral. I will rewrite the equation node, insert the derivative node on the path from the model to the integral, and annotate the integral node.
Final Optimized Graph (JSON):
{json.dumps(GRAPH_2, indent=2)}"""

CRITIQUE_RESPONSE_2 = """- Analysis: The revised blueprint resolves the difficulty overshoot: the symmetric model keeps the radical integrable in closed form, and the derivative node makes the computational chain explicit. No logical contradictions remain.
- Critical Flaws: None
- Refinement Suggestions:
- Introduce a dedicated symmetry-argument node, possibly referencing group actions, for theoretical depth.
- Incorporate a dimensionless scaling analysis of the constants c and R.
- Strengthen the association between the context node and the domain-constraint node.
- Expected Utility: Low"""

MODERATOR_RESPONSE_2 = f"""- Analysis: The remaining suggestions are non-essential for the current specification and risk diverting the problem from its core objective. The graph satisfies the style tokens and further iteration offers marginal gain, so evolution stops here.
- Decision: Suspend
- Guidance for the Proposer: None
- Final Graph:
{json.dumps(GRAPH_2, indent=2)}"""

GOLDEN_QUESTION = (
    "A gourmet potato chip manufacturer designs its product to follow the precise geometry "
    "of a saddle surface, known mathematically as a hyperbolic paraboloid. When centered at "
    "the origin, the surface of a single chip is modeled by the equation z = c(x^2 - y^2), "
    "where c is a positive constant. To ensure uniformity, each chip is trimmed so that its "
    "vertical projection onto the xy-plane is bounded by the circle x^2 + y^2 <= R^2.\n\n"
    "By first calculating the partial derivatives dz/dx and dz/dy to determine the surface "
    "area element dS, set up and evaluate a double integral to find the total surface area "
    "of the chip. In your calculation, exploit the symmetry of the surface by integrating "
    "over the first quadrant of the cylindrical domain and multiplying the result by four. "
    "Express your final answer in terms of c and R."
)

EXECUTOR_RESPONSE = f"""- Analysis: Open with the manufacturer context instantiating the saddle geometry, state the symmetric model and the disk constraint, then ask for the partial derivatives feeding the surface integral with the quadrant symmetry made explicit.
- Question: {GOLDEN_QUESTION}"""

GOLDEN_ANSWER = """Step 1. Partial derivatives of the surface z = c(x^2 - y^2):
dz/dx = 2cx and dz/dy = -2cy.

Step 2. Surface area element:
dS = sqrt(1 + (dz/dx)^2 + (dz/dy)^2) dx dy = sqrt(1 + 4c^2 x^2 + 4c^2 y^2) dx dy
   = sqrt(1 + 4c^2 (x^2 + y^2)) dx dy.

Step 3. Set up the double integral in polar coordinates over the disk x^2 + y^2 <= R^2.
With x = r cos(theta), y = r sin(theta), the integrand depends only on r:
A = 4 * Integral[theta = 0 .. pi/2] Integral[r = 0 .. R] sqrt(1 + 4c^2 r^2) r dr dtheta,
using the four-fold symmetry of the domain (first quadrant times four).

Step 4. Evaluate the radial integral with u = 1 + 4c^2 r^2, du = 8c^2 r dr:
Integral[r = 0 .. R] sqrt(1 + 4c^2 r^2) r dr = (1 / (8c^2)) Integral[u = 1 .. 1 + 4c^2 R^2] sqrt(u) du
 = (1 / (12c^2)) * ((1 + 4c^2 R^2)^(3/2) - 1).

Step 5. Assemble:
A = 4 * (pi/2) * (1 / (12c^2)) * ((1 + 4c^2 R^2)^(3/2) - 1)
  = (pi / (6c^2)) * ((1 + 4c^2 R^2)^(3/2) - 1).

The total surface area of the chip is
\\boxed{\\dfrac{\\pi}{6c^2}\\left[\\left(1 + 4c^2R^2\\right)^{3/2} - 1\\right]}"""

JUDGE_RESPONSE = """question_valid: yes
answer_correct: yes
qa_consistent: yes
rationale: The problem is well-posed with complete conditions. The derivation computes the correct partial derivatives, builds the right surface area element, applies the stated quadrant symmetry, and the substitution yields the closed form; the boxed result answers exactly what was asked in terms of c and R."""


def find_golden_seed(limit: int = 100_000) -> int:
    """Smallest rng seed whose draw lands on the golden style and concept."""
    for seed in range(limit):
        draw = sample_seed(GOLDEN_POOL, seed)
        if draw.concept == GOLDEN_CONCEPT and dict(draw.style.dimensions) == GOLDEN_STYLE:
            return seed
    raise RuntimeError("no seed reproduces the golden draw within the search limit")


def _entry(prompt: str, content: str) -> dict:
    return {
        "match_key": match_key_for((Message("user", prompt),)),
        "content": content,
        "prompt_tokens": max(1, len(prompt) // 4),
        "completion_tokens": max(1, len(content) // 4),
    }


def golden_transcript_entries(rng_seed: int) -> list[dict]:
    """Script the full two-round episode for the draw under ``rng_seed``."""
    draw = sample_seed(GOLDEN_POOL, rng_seed)
    if draw.concept != GOLDEN_CONCEPT or dict(draw.style.dimensions) != GOLDEN_STYLE:
        raise ValueError(f"seed {rng_seed} does not reproduce the golden draw")
    style = StyleTokens(GOLDEN_STYLE)
    g0 = initial_graph(draw)
    g1 = graph_from_dict(GRAPH_1)
    g2 = graph_from_dict(GRAPH_2)

    entries = [
        _entry(prompts.proposer_prompt(style, g0, ""), PROPOSER_RESPONSE_1),
        _entry(
            prompts.critic_prompt(style, g1, structural_notes(validate(g1))),
            CRITIQUE_RESPONSE_1,
        ),
        _entry(
            prompts.moderator_prompt(style, g1, render_report(parse_critique(CRITIQUE_RESPONSE_1))),
            MODERATOR_RESPONSE_1,
        ),
    ]
    entries += [
        _entry(prompts.proposer_prompt(style, g1, GOLDEN_GUIDANCE), PROPOSER_RESPONSE_2),
        _entry(
            prompts.critic_prompt(style, g2, structural_notes(validate(g2))),
            CRITIQUE_RESPONSE_2,
        ),
        _entry(
            prompts.moderator_prompt(style, g2, render_report(parse_critique(CRITIQUE_RESPONSE_2))),
            MODERATOR_RESPONSE_2,
        ),
        _entry(prompts.executor_prompt(g2, style), EXECUTOR_RESPONSE),
        _entry(prompts.solver_prompt(GOLDEN_QUESTION), GOLDEN_ANSWER),
        _entry(prompts.verifier_prompt(GOLDEN_QUESTION, GOLDEN_ANSWER), JUDGE_RESPONSE),
    ]
    return entries


def write_golden_run(workdir: str | Path) -> Path:
    """Materialize transcript, pool, and run config under ``workdir``.

    Returns the config path; running ``synthesize`` against it replays the
    episode offline and yields a one-sample corpus.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rng_seed = find_golden_seed()
    transcript_path = workdir / "golden_transcript.jsonl"
    write_transcript(transcript_path, golden_transcript_entries(rng_seed))
    pool_path = workdir / "golden_pool.json"
    save_pool(GOLDEN_POOL, pool_path)
    config = {
        "run_id": "golden",
        "backends": {
            "default": {"kind": "scripted", "transcript_path": str(transcript_path)},
            "embedder": {"kind": "fallback"},
        },
        "pool_source": str(pool_path),
        "target_samples": 1,
        "policy": {"max_iterations": 5, "parse_retries": 2},
        "sampling": {"temperature": 0.3, "max_tokens": 4096},
        "concurrency": 1,
        "output_dir": str(workdir / "out"),
        "rng_seed": rng_seed,
    }
    config_path = workdir / "golden_config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path
