"""Semantic instantiation: graph blueprint -> question -> solution -> verdict.

The three calls are sequential within one sample (the solver needs the
question, the judge needs both texts) but samples for distinct episodes are
independent. Only judge-approved samples are retained; rejected ones are
persisted with the same schema so pre-filter analysis stays possible.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from graphforge import prompts
from graphforge.client import BackendConfig, ChatRequest, Message, complete_with_retry
from graphforge.errors import EmptyResponse, QuestionUnextractable, VerdictUnparseable
from graphforge.graphs import ConstraintGraph, StyleTokens, graph_from_dict, graph_to_dict
from graphforge.legislator import EvolutionTrace

logger = logging.getLogger(__name__)

_QUESTION_MARKER_RE = re.compile(r"Question\s*:")
_BOXED_RE = re.compile(r"\\boxed\{")
_CHECKS = ("question_valid", "answer_correct", "qa_consistent")
_YES_TOKENS = {"yes", "true", "pass"}
_NO_TOKENS = {"no", "false", "fail"}


@dataclass(frozen=True)
class VerificationVerdict:
    checks: dict[str, bool]
    judge_rationale: str = ""

    @property
    def passed(self) -> bool:
        return all(self.checks.get(name, False) for name in _CHECKS)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": dict(self.checks), "judge_rationale": self.judge_rationale}


@dataclass(frozen=True)
class SynthesizedSample:
    sample_id: str
    question: str
    answer: str
    style: StyleTokens
    graph: ConstraintGraph
    trace_ref: str
    verification: VerificationVerdict
    created_at: str
    forced_truncation: bool = False


def sample_to_dict(sample: SynthesizedSample) -> dict:
    return {
        "sample_id": sample.sample_id,
        "question": sample.question,
        "answer": sample.answer,
        "style": dict(sample.style.dimensions),
        "graph": graph_to_dict(sample.graph),
        "trace_ref": sample.trace_ref,
        "verification": sample.verification.as_dict(),
        "created_at": sample.created_at,
        "forced_truncation": sample.forced_truncation,
    }


def sample_from_dict(doc: dict) -> SynthesizedSample:
    return SynthesizedSample(
        sample_id=doc["sample_id"],
        question=doc["question"],
        answer=doc["answer"],
        style=StyleTokens(dimensions=dict(doc["style"])),
        graph=graph_from_dict(doc["graph"]),
        trace_ref=doc["trace_ref"],
        verification=VerificationVerdict(
            checks=dict(doc["verification"]["checks"]),
            judge_rationale=doc["verification"].get("judge_rationale", ""),
        ),
        created_at=doc["created_at"],
        forced_truncation=bool(doc.get("forced_truncation", False)),
    )


def _call(backend: BackendConfig, prompt: str, *, model: str, temperature: float, max_tokens: int) -> str:
    request = ChatRequest(
        model=model,
        messages=(Message("user", prompt),),
        temperature=temperature,
        max_tokens=max_tokens,
    )
    return complete_with_retry(backend, request).content


def instantiate(
    backend: BackendConfig,
    graph: ConstraintGraph,
    style: StyleTokens,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 4096,
) -> str:
    """Render the blueprint into a natural-language question.

    The response carries an analysis preamble; the question is whatever
    follows the final "Question:" marker.
    """
    content = _call(
        backend,
        prompts.executor_prompt(graph, style),
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    matches = list(_QUESTION_MARKER_RE.finditer(content))
    if not matches:
        raise QuestionUnextractable("response has no Question marker")
    question = content[matches[-1].end() :].strip()
    if not question:
        raise QuestionUnextractable("Question marker present but no text follows")
    return question


def has_boxed_answer(text: str) -> bool:
    return bool(_BOXED_RE.search(text))


def solve(
    backend: BackendConfig,
    question: str,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 8192,
) -> str:
    """One solver call with the boxed-answer instruction; the chain comes back
    verbatim. A missing boxed answer is noted but not fatal (the judge decides)."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    content = _call(
        backend,
        prompts.solver_prompt(question),
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    if not content.strip():
        raise EmptyResponse("solver returned empty content")
    if not has_boxed_answer(content):
        logger.debug("solver answer has no boxed final value")
    return content


def verify(
    backend: BackendConfig,
    question: str,
    answer: str,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 2048,
) -> VerificationVerdict:
    """Judge the pair on three labeled yes/no checks; passed is their conjunction."""
    if not question.strip() or not answer.strip():
        raise ValueError("question and answer must be non-empty")
    content = _call(
        backend,
        prompts.verifier_prompt(question, answer),
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    checks: dict[str, bool] = {}
    for name in _CHECKS:
        # The trailing guard rejects an echoed "[yes/no]" placeholder.
        m = re.search(rf"{name}\s*:\s*\[?\s*([A-Za-z]+)(?![A-Za-z]|\s*/)", content, re.IGNORECASE)
        if not m:
            raise VerdictUnparseable(f"judge response is missing the {name} label")
        token = m.group(1).lower()
        if token in _YES_TOKENS:
            checks[name] = True
        elif token in _NO_TOKENS:
            checks[name] = False
        else:
            raise VerdictUnparseable(f"{name} has non-boolean value {token!r}")
    rationale_match = re.search(r"rationale\s*:\s*(.+)", content, re.IGNORECASE | re.DOTALL)
    rationale = rationale_match.group(1).strip() if rationale_match else content.strip()
    return VerificationVerdict(checks=checks, judge_rationale=rationale)


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def attempt_sample(
    backends: dict[str, BackendConfig],
    episode: EvolutionTrace,
    style: StyleTokens,
    *,
    sample_id: str,
    trace_ref: str,
    sampling: dict[str, dict] | None = None,
    created_at: str | None = None,
) -> SynthesizedSample:
    """Instantiate, solve, and verify one episode's final graph.

    Always returns the full record (verdict may be failed); callers route it
    to the corpus or the rejects file.
    """
    if episode.final_graph is None:
        raise ValueError(f"episode {trace_ref} has no final graph (outcome {episode.outcome})")
    sampling = sampling or {}

    def kwargs_for(role: str, default_max: int) -> dict:
        opts = dict(sampling.get(role, {}))
        opts.setdefault("model", "default")
        opts.setdefault("temperature", 0.3)
        opts.setdefault("max_tokens", default_max)
        return opts

    question = instantiate(backends["executor"], episode.final_graph, style, **kwargs_for("executor", 4096))
    answer = solve(backends["solver"], question, **kwargs_for("solver", 8192))
    verdict = verify(backends["judge"], question, answer, **kwargs_for("judge", 2048))
    return SynthesizedSample(
        sample_id=sample_id,
        question=question,
        answer=answer,
        style=style,
        graph=episode.final_graph,
        trace_ref=trace_ref,
        verification=verdict,
        created_at=created_at or utc_now_iso(),
        forced_truncation=episode.forced_truncation,
    )


def synthesize_sample(
    backends: dict[str, BackendConfig],
    episode: EvolutionTrace,
    style: StyleTokens,
    *,
    sample_id: str,
    trace_ref: str,
    rejects_path: str | Path | None = None,
    sampling: dict[str, dict] | None = None,
) -> SynthesizedSample | None:
    """Retention filter over :func:`attempt_sample`: return the sample when the
    judge passes it, otherwise append the rejected record and return None."""
    sample = attempt_sample(
        backends, episode, style, sample_id=sample_id, trace_ref=trace_ref, sampling=sampling
    )
    if sample.verification.passed:
        return sample
    if rejects_path is not None:
        with open(rejects_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(sample_to_dict(sample), ensure_ascii=False) + "\n")
    logger.info("sample %s rejected by judge", sample_id)
    return None
