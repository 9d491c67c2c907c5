"""Tri-agent roundtable that evolves a constraint graph until truncation.

One episode is a strictly sequential proposer -> critic -> moderator loop over
the graph, starting from a single seed-concept node. The moderator either
terminates (adaptive truncation, yielding the final graph) or sends distilled
guidance back to the proposer. The proposer sees only that guidance, never the
raw critique. Episodes share nothing but the backend client, so any number of
them can run concurrently.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from graphforge import prompts
from graphforge.client import BackendConfig, ChatRequest, Message, complete_with_retry
from graphforge.errors import (
    AgentOutputError,
    BackendError,
    CritiqueUnparseable,
    DecisionUnparseable,
    GraphError,
    ProposalUnparseable,
)
from graphforge.graphs import (
    ConstraintGraph,
    Node,
    StyleTokens,
    ValidationReport,
    graph_from_dict,
    graph_to_dict,
    parse_graph,
    validate,
)
from graphforge.initializer import SeedDraw

logger = logging.getLogger(__name__)

UTILITY_LEVELS = ("High", "Medium", "Low")
TERMINATE_TOKENS = ("suspend", "terminate")
ITERATE_TOKENS = ("continue", "iterate")


@dataclass(frozen=True)
class EvolutionPolicy:
    max_iterations: int = 5
    parse_retries: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.parse_retries < 0:
            raise ValueError("parse_retries must be >= 0")


@dataclass(frozen=True)
class CritiqueReport:
    analysis: str
    critical_flaws: tuple[str, ...]
    refinement_suggestions: tuple[str, ...]
    expected_utility: str

    def __post_init__(self):
        if self.expected_utility not in UTILITY_LEVELS:
            raise ValueError(f"expected_utility must be one of {UTILITY_LEVELS}")


@dataclass(frozen=True)
class ModeratorDecision:
    decision: str  # "Terminate" | "Iterate"
    guidance: str = ""
    final_graph: ConstraintGraph | None = None

    def __post_init__(self):
        if self.decision == "Terminate":
            if self.final_graph is None or self.guidance:
                raise ValueError("Terminate requires a final graph and empty guidance")
        elif self.decision == "Iterate":
            if self.final_graph is not None or not self.guidance:
                raise ValueError("Iterate requires guidance and no final graph")
        else:
            raise ValueError(f"unknown decision {self.decision!r}")


@dataclass(frozen=True)
class EpisodeStep:
    t: int
    proposed: ConstraintGraph
    structural: ValidationReport
    critique: CritiqueReport
    decision: ModeratorDecision


@dataclass(frozen=True)
class EvolutionTrace:
    seed: SeedDraw
    steps: tuple[EpisodeStep, ...]
    outcome: str  # "Truncated" | "CapForced" | "Failed"
    final_graph: ConstraintGraph | None = None
    forced_truncation: bool = False
    error: str | None = None


# --- sectioned-response parsing ------------------------------------------------

_HEADER_RE = re.compile(r"^\s*(?:[-*#]+\s*)?(?P<name>[A-Za-z][A-Za-z' ]*?)\s*:\s*(?P<rest>.*)$")
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*)$")
_NONE_TOKENS = {"none", "n/a", "na", "no critical flaws", "no flaws"}


def split_sections(text: str, names: list[str]) -> dict[str, str]:
    """Cut a labeled agent response into named sections.

    A section opens at a line starting with one of ``names`` followed by a
    colon (bullet prefixes tolerated, case-insensitive). A name only opens a
    section once; later lookalike lines stay inside the current section, which
    keeps JSON payloads and list items from hijacking the split.
    """
    lower_map = {n.lower(): n for n in names}
    sections: dict[str, str] = {}
    current: str | None = None
    buf: list[str] = []
    for line in text.splitlines():
        m = _HEADER_RE.match(line)
        opened = None
        if m:
            candidate = m.group("name").strip().lower()
            if candidate in lower_map and lower_map[candidate] not in sections:
                opened = lower_map[candidate]
        if opened is not None:
            if current is not None:
                sections[current] = "\n".join(buf).strip()
            current = opened
            sections[current] = ""  # reserve so the name cannot reopen
            buf = [m.group("rest")]
        elif current is not None:
            buf.append(line)
    if current is not None:
        sections[current] = "\n".join(buf).strip()
    return sections


def _parse_item_list(section: str) -> list[str]:
    items: list[str] = []
    for line in section.splitlines():
        line = line.strip()
        if not line:
            continue
        m = _BULLET_RE.match(line)
        items.append(m.group(1).strip() if m else line)
    if len(items) == 1 and items[0].rstrip(".").strip("[]").strip().lower() in _NONE_TOKENS:
        return []
    return [item for item in items if item]


def _call(
    backend: BackendConfig,
    prompt: str,
    *,
    model: str,
    temperature: float,
    max_tokens: int,
) -> str:
    request = ChatRequest(
        model=model,
        messages=(Message("user", prompt),),
        temperature=temperature,
        max_tokens=max_tokens,
    )
    return complete_with_retry(backend, request).content


# --- the three roles --------------------------------------------------------------

def propose(
    backend: BackendConfig,
    style: StyleTokens,
    prev: ConstraintGraph,
    guidance: str,
    *,
    parse_retries: int = 2,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 4096,
) -> ConstraintGraph:
    """Ask the proposer for the next graph; nag with a format reminder on
    undecodable output, up to ``parse_retries`` extra calls."""
    base = prompts.proposer_prompt(style, prev, guidance)
    last_error: GraphError | None = None
    for attempt in range(parse_retries + 1):
        prompt = base + ("\n\n" + prompts.JSON_FORMAT_REMINDER) * attempt
        content = _call(backend, prompt, model=model, temperature=temperature, max_tokens=max_tokens)
        try:
            return parse_graph(content)
        except GraphError as exc:
            last_error = exc
            logger.debug("proposal attempt %d undecodable: %s", attempt + 1, exc)
    raise ProposalUnparseable(
        f"no decodable graph after {parse_retries + 1} calls: {last_error}"
    ) from last_error


def structural_notes(report: ValidationReport) -> str:
    if report.valid:
        return "no structural violations"
    return "; ".join(f"{rule}: {message}" for rule, message in report.violations)


def parse_critique(content: str) -> CritiqueReport:
    """Decode the critic's sectioned response; "None" under flaws means clean."""
    sections = split_sections(
        content, ["Analysis", "Critical Flaws", "Refinement Suggestions", "Expected Utility"]
    )
    if "Critical Flaws" not in sections or "Expected Utility" not in sections:
        raise CritiqueUnparseable("response is missing the Critical Flaws or Expected Utility section")
    utility_text = sections["Expected Utility"].strip().strip("[]*").strip()
    utility = next(
        (level for level in UTILITY_LEVELS if utility_text.lower().startswith(level.lower())),
        None,
    )
    if utility is None:
        raise CritiqueUnparseable(f"unrecognized expected utility {utility_text!r}")
    return CritiqueReport(
        analysis=sections.get("Analysis", ""),
        critical_flaws=tuple(_parse_item_list(sections["Critical Flaws"])),
        refinement_suggestions=tuple(_parse_item_list(sections.get("Refinement Suggestions", ""))),
        expected_utility=utility,
    )


def critique(
    backend: BackendConfig,
    style: StyleTokens,
    graph: ConstraintGraph,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 4096,
) -> CritiqueReport:
    """Run the critic over a proposed graph (structural facts injected)."""
    notes = structural_notes(validate(graph))
    content = _call(
        backend,
        prompts.critic_prompt(style, graph, notes),
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    return parse_critique(content)


def render_report(report: CritiqueReport) -> str:
    """Deterministic text form of a critique, fed to the moderator prompt."""
    flaws = "\n".join(f"- {flaw}" for flaw in report.critical_flaws) or "None"
    suggestions = "\n".join(f"- {s}" for s in report.refinement_suggestions) or "None"
    return (
        f"Analysis: {report.analysis}\n"
        f"Critical Flaws:\n{flaws}\n"
        f"Refinement Suggestions:\n{suggestions}\n"
        f"Expected Utility: {report.expected_utility}"
    )


def parse_decision(content: str, graph: ConstraintGraph) -> ModeratorDecision:
    """Decode the moderator's verdict; on truncation the final graph defaults
    to the adjudicated graph when the response embeds none."""
    sections = split_sections(
        content, ["Analysis", "Decision", "Guidance for the Proposer", "Final Graph"]
    )
    if "Decision" not in sections:
        raise DecisionUnparseable("response has no Decision section")
    token = sections["Decision"].splitlines()[0].strip().strip("[]*.").lower() if sections["Decision"] else ""
    wants_terminate = any(t in token for t in TERMINATE_TOKENS)
    wants_iterate = any(t in token for t in ITERATE_TOKENS)
    if wants_terminate == wants_iterate:
        raise DecisionUnparseable(f"ambiguous decision token {token!r}")
    if wants_terminate:
        final = graph
        final_section = sections.get("Final Graph", "")
        if final_section:
            try:
                final = parse_graph(final_section)
            except GraphError:
                final = graph
        return ModeratorDecision(decision="Terminate", guidance="", final_graph=final)
    guidance = sections.get("Guidance for the Proposer", "").strip()
    if not guidance or guidance.rstrip(".").strip("[]").strip().lower() in _NONE_TOKENS:
        raise DecisionUnparseable("iterate decision carries no guidance")
    return ModeratorDecision(decision="Iterate", guidance=guidance, final_graph=None)


def moderate(
    backend: BackendConfig,
    style: StyleTokens,
    graph: ConstraintGraph,
    report: CritiqueReport,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 4096,
) -> ModeratorDecision:
    """Adjudicate: adaptive truncation (with the final graph) or guidance."""
    content = _call(
        backend,
        prompts.moderator_prompt(style, graph, render_report(report)),
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    return parse_decision(content, graph)


# --- the evolution loop --------------------------------------------------------------

def initial_graph(seed: SeedDraw) -> ConstraintGraph:
    """The t=0 blueprint: a single node holding the drawn concept."""
    return ConstraintGraph(
        graph_id="G_0",
        nodes=(Node(id="v_1", concept=seed.concept, description="seed concept"),),
        edges=(),
        mutation_log="",
    )


def _backend_for(backends, role: str) -> BackendConfig:
    if isinstance(backends, BackendConfig):
        return backends
    return backends[role]


def evolve(
    backends: BackendConfig | Mapping[str, BackendConfig],
    seed: SeedDraw,
    policy: EvolutionPolicy = EvolutionPolicy(),
    *,
    sampling: Mapping[str, dict] | None = None,
) -> EvolutionTrace:
    """Drive the roundtable from the seed until truncation, cap, or failure.

    Failures never raise: the partial trace comes back with outcome "Failed"
    and the error recorded, so the pipeline counts it and moves on.
    """
    sampling = sampling or {}

    def kwargs_for(role: str) -> dict:
        opts = dict(sampling.get(role, {}))
        opts.setdefault("model", "default")
        opts.setdefault("temperature", 0.3)
        opts.setdefault("max_tokens", 4096)
        return opts

    style = seed.style
    prev = initial_graph(seed)
    guidance = ""
    steps: list[EpisodeStep] = []
    for t in range(1, policy.max_iterations + 1):
        try:
            proposed = propose(
                _backend_for(backends, "proposer"),
                style,
                prev,
                guidance,
                parse_retries=policy.parse_retries,
                **kwargs_for("proposer"),
            )
            structural = validate(proposed)
            report = critique(
                _backend_for(backends, "critic"), style, proposed, **kwargs_for("critic")
            )
            decision = moderate(
                _backend_for(backends, "moderator"), style, proposed, report, **kwargs_for("moderator")
            )
        except (AgentOutputError, BackendError) as exc:
            logger.warning("episode failed at step %d: %s", t, exc)
            return EvolutionTrace(
                seed=seed,
                steps=tuple(steps),
                outcome="Failed",
                final_graph=None,
                error=f"{type(exc).__name__}: {exc}",
            )
        steps.append(EpisodeStep(t=t, proposed=proposed, structural=structural, critique=report, decision=decision))
        if decision.decision == "Terminate":
            return EvolutionTrace(
                seed=seed, steps=tuple(steps), outcome="Truncated", final_graph=decision.final_graph
            )
        prev, guidance = proposed, decision.guidance
    return EvolutionTrace(
        seed=seed,
        steps=tuple(steps),
        outcome="CapForced",
        final_graph=steps[-1].proposed,
        forced_truncation=True,
    )


# --- trace persistence ------------------------------------------------------------------

def trace_to_dict(trace: EvolutionTrace, episode_id: str | None = None) -> dict:
    doc = {
        "episode_id": episode_id,
        "seed": {
            "style": dict(trace.seed.style.dimensions),
            "concept": trace.seed.concept,
            "rng_seed": trace.seed.rng_seed,
        },
        "steps": [
            {
                "t": step.t,
                "proposed": graph_to_dict(step.proposed),
                "structural": step.structural.as_dict(),
                "critique": {
                    "analysis": step.critique.analysis,
                    "critical_flaws": list(step.critique.critical_flaws),
                    "refinement_suggestions": list(step.critique.refinement_suggestions),
                    "expected_utility": step.critique.expected_utility,
                },
                "decision": {
                    "decision": step.decision.decision,
                    "guidance": step.decision.guidance,
                    "final_graph": (
                        graph_to_dict(step.decision.final_graph)
                        if step.decision.final_graph is not None
                        else None
                    ),
                },
            }
            for step in trace.steps
        ],
        "outcome": trace.outcome,
        "final_graph": graph_to_dict(trace.final_graph) if trace.final_graph is not None else None,
        "forced_truncation": trace.forced_truncation,
        "error": trace.error,
    }
    return doc


def trace_from_dict(doc: dict) -> EvolutionTrace:
    seed = SeedDraw(
        style=StyleTokens(dimensions=dict(doc["seed"]["style"])),
        concept=doc["seed"]["concept"],
        rng_seed=int(doc["seed"]["rng_seed"]),
    )
    steps = []
    for raw in doc["steps"]:
        decision_doc = raw["decision"]
        steps.append(
            EpisodeStep(
                t=int(raw["t"]),
                proposed=graph_from_dict(raw["proposed"]),
                structural=ValidationReport(
                    violations=tuple((r, m) for r, m in raw["structural"]["violations"])
                ),
                critique=CritiqueReport(
                    analysis=raw["critique"]["analysis"],
                    critical_flaws=tuple(raw["critique"]["critical_flaws"]),
                    refinement_suggestions=tuple(raw["critique"]["refinement_suggestions"]),
                    expected_utility=raw["critique"]["expected_utility"],
                ),
                decision=ModeratorDecision(
                    decision=decision_doc["decision"],
                    guidance=decision_doc["guidance"],
                    final_graph=(
                        graph_from_dict(decision_doc["final_graph"])
                        if decision_doc["final_graph"] is not None
                        else None
                    ),
                ),
            )
        )
    return EvolutionTrace(
        seed=seed,
        steps=tuple(steps),
        outcome=doc["outcome"],
        final_graph=graph_from_dict(doc["final_graph"]) if doc["final_graph"] is not None else None,
        forced_truncation=bool(doc.get("forced_truncation", False)),
        error=doc.get("error"),
    )


def save_trace(trace: EvolutionTrace, path: str | Path, episode_id: str) -> None:
    """Atomic write so a half-written trace never looks complete on resume."""
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(trace_to_dict(trace, episode_id), ensure_ascii=False, indent=2), encoding="utf-8")
    tmp.replace(path)


def load_trace(path: str | Path) -> EvolutionTrace:
    return trace_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
