"""Corpus auditing: embeddings, similarity metrics, judge ratings, tags.

Similarity math deliberately runs pair-by-pair on the same ``np.dot``
primitive everywhere. BLAS matrix products reassociate sums and drift from
per-pair dots by a few ulps, which would break the exact-equality contract
the metric tests hold these paths to; exact search at desk scale is cheap
enough that the loop wins.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graphforge import prompts
from graphforge.client import BackendConfig, ChatRequest, Message, complete_with_retry
from graphforge.errors import (
    DimMismatch,
    EmptySet,
    EmptyText,
    LabelUnparseable,
    MalformedResponse,
    TagsUnparseable,
    TooFewItems,
)

logger = logging.getLogger(__name__)

FALLBACK_DIM = 1024
INTRA_SUBSAMPLE_CAP = 20_000

QUALITY_LABELS = {
    "very poor": "VeryPoor",
    "poor": "Poor",
    "average": "Average",
    "good": "Good",
    "excellent": "Excellent",
}
DIFFICULTY_LABELS = {
    "very easy": "VeryEasy",
    "easy": "Easy",
    "medium": "Medium",
    "hard": "Hard",
    "very hard": "VeryHard",
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class EmbedderConfig:
    """Provider boundary: a remote embeddings endpoint or the offline fallback."""

    kind: str = "fallback"  # "fallback" | "remote"
    base_url: str | None = None
    api_key_env: str | None = None
    model: str = "default"
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.kind == "remote" and not self.base_url:
            raise ValueError("remote embedder requires base_url")
        if self.kind not in ("fallback", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")

    @property
    def provider_id(self) -> str:
        if self.kind == "fallback":
            return f"hashed-tf-{FALLBACK_DIM}"
        return f"remote:{self.model}"


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    dim: int
    provider_id: str

    def __post_init__(self):
        if self.dim != len(self.values):
            raise ValueError("dim must equal len(values)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding entries must be finite")


@dataclass(frozen=True)
class QualityRating:
    label: str
    explanation: str = ""


@dataclass(frozen=True)
class DifficultyRating:
    label: str
    knowledge: tuple[str, ...] = ()
    explanation: str = ""


@dataclass(frozen=True)
class SimilarityReport:
    metric: str
    provider_id: str
    per_item: tuple[tuple[str, float], ...]
    aggregate: float
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "provider_id": self.provider_id,
            "per_item": [{"item_id": item_id, "score": score} for item_id, score in self.per_item],
            "aggregate": self.aggregate,
            "params": dict(self.params),
        }


# --- embeddings ---------------------------------------------------------------

def _hash_bucket(token: str) -> int:
    import hashlib

    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % FALLBACK_DIM


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt(np.dot(vector, vector)))
    if norm == 0.0:
        raise EmptyText("text produced a zero vector")
    out = vector / norm
    out.flags.writeable = False
    return out


def _embed_fallback(texts: list[str]) -> list[np.ndarray]:
    vectors = []
    for text in texts:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise EmptyText(f"no embeddable tokens in text starting {text[:40]!r}")
        vec = np.zeros(FALLBACK_DIM, dtype=np.float64)
        for token in tokens:
            vec[_hash_bucket(token)] += 1.0
        vectors.append(_normalize(vec))
    return vectors


def _embed_remote(cfg: EmbedderConfig, texts: list[str]) -> list[np.ndarray]:
    import os

    import requests

    from graphforge.errors import AuthError, RateLimited, TransportError

    url = cfg.base_url.rstrip("/") + "/embeddings"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env, "") if cfg.api_key_env else ""
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    try:
        resp = requests.post(
            url, json={"model": cfg.model, "input": texts}, headers=headers, timeout=cfg.timeout_s
        )
    except requests.RequestException as exc:
        raise TransportError(f"request to {url} failed: {type(exc).__name__}") from exc
    if resp.status_code in (401, 403):
        raise AuthError(f"HTTP {resp.status_code} from {url}")
    if resp.status_code == 429:
        raise RateLimited(f"HTTP 429 from {url}")
    if resp.status_code >= 500:
        raise TransportError(f"HTTP {resp.status_code} from {url}")
    if resp.status_code != 200:
        raise MalformedResponse(f"unexpected HTTP {resp.status_code} from {url}")
    try:
        rows = sorted(resp.json()["data"], key=lambda row: row["index"])
        raw = [np.asarray(row["embedding"], dtype=np.float64) for row in rows]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponse(f"cannot decode embeddings body: {exc}") from exc
    if len(raw) != len(texts):
        raise MalformedResponse(f"expected {len(texts)} embeddings, got {len(raw)}")
    return [_normalize(vec) for vec in raw]


def embed(provider: EmbedderConfig, texts: list[str]) -> list[EmbeddingVector]:
    """One L2-normalized vector per input text, order preserved."""
    if not texts:
        raise EmptyText("texts must be non-empty")
    if any(not t for t in texts):
        raise EmptyText("every text must be non-empty")
    if provider.kind == "fallback":
        vectors = _embed_fallback(texts)
    else:
        vectors = _embed_remote(provider, texts)
    return [
        EmbeddingVector(values=vec, dim=len(vec), provider_id=provider.provider_id)
        for vec in vectors
    ]


# --- similarity metrics ------------------------------------------------------------

def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimMismatch(f"dim {a.dim} vs {b.dim}")
    na = float(np.sqrt(np.dot(a.values, a.values)))
    nb = float(np.sqrt(np.dot(b.values, b.values)))
    return float(np.dot(a.values, b.values) / (na * nb))


def _ids_for(vectors, ids) -> list[str]:
    if ids is None:
        return [str(i) for i in range(len(vectors))]
    if len(ids) != len(vectors):
        raise ValueError("ids and vectors length mismatch")
    return [str(i) for i in ids]


def intra_similarity(
    vectors: list[EmbeddingVector],
    ids: list[str] | None = None,
    *,
    subsample_cap: int = INTRA_SUBSAMPLE_CAP,
    subsample_seed: int = 0,
) -> SimilarityReport:
    """Mean cosine of each item against every other item; lower = more diverse.

    Above ``subsample_cap`` items, a seeded uniform subsample keeps the O(n^2)
    sweep bounded; the seed lands in the report params.
    """
    if len(vectors) < 2:
        raise TooFewItems("intra-similarity needs at least 2 vectors")
    item_ids = _ids_for(vectors, ids)
    params: dict = {"n": len(vectors)}
    if len(vectors) > subsample_cap:
        rng = random.Random(subsample_seed)
        keep = sorted(rng.sample(range(len(vectors)), subsample_cap))
        vectors = [vectors[i] for i in keep]
        item_ids = [item_ids[i] for i in keep]
        params.update({"subsample_cap": subsample_cap, "subsample_seed": subsample_seed})
    arrays = [v.values for v in vectors]
    norms = [float(np.sqrt(np.dot(a, a))) for a in arrays]
    per_item = []
    for i, (a, na) in enumerate(zip(arrays, norms)):
        others = [
            float(np.dot(a, b) / (na * nb))
            for j, (b, nb) in enumerate(zip(arrays, norms))
            if j != i
        ]
        per_item.append((item_ids[i], float(np.mean(others))))
    aggregate = float(np.mean([score for _, score in per_item]))
    return SimilarityReport(
        metric="intra_similarity",
        provider_id=vectors[0].provider_id,
        per_item=tuple(per_item),
        aggregate=aggregate,
        params=params,
    )


def ams(
    train: list[EmbeddingVector],
    test: list[EmbeddingVector],
    test_ids: list[str] | None = None,
) -> SimilarityReport:
    """Average maximum similarity: per test item, the best cosine against the
    train set; the mean of those maxima measures train/test leakage."""
    if not train or not test:
        raise EmptySet("ams needs non-empty train and test sets")
    item_ids = _ids_for(test, test_ids)
    train_arrays = [v.values for v in train]
    train_norms = [float(np.sqrt(np.dot(a, a))) for a in train_arrays]
    per_item = []
    for item_id, vector in zip(item_ids, test):
        a = vector.values
        na = float(np.sqrt(np.dot(a, a)))
        best = max(
            float(np.dot(a, b) / (na * nb)) for b, nb in zip(train_arrays, train_norms)
        )
        per_item.append((item_id, best))
    aggregate = float(np.mean([score for _, score in per_item]))
    return SimilarityReport(
        metric="ams",
        provider_id=test[0].provider_id,
        per_item=tuple(per_item),
        aggregate=aggregate,
        params={"train_n": len(train), "test_n": len(test)},
    )


# --- judge ratings -----------------------------------------------------------------

def _call(backend: BackendConfig, prompt: str, *, model: str, temperature: float, max_tokens: int) -> str:
    request = ChatRequest(
        model=model,
        messages=(Message("user", prompt),),
        temperature=temperature,
        max_tokens=max_tokens,
    )
    return complete_with_retry(backend, request).content


def _extract_field(content: str, name: str) -> str | None:
    m = re.search(rf'"{name}"\s*:\s*"([^"]*)"', content, re.IGNORECASE)
    if m:
        return m.group(1)
    # Tolerate an unquoted value up to end of line.
    m = re.search(rf'"{name}"\s*:\s*([^,\n"]+)', content, re.IGNORECASE)
    if m:
        return m.group(1).strip()
    return None


def _parse_label(content: str, name: str, scale: dict[str, str]) -> str:
    raw = _extract_field(content, name)
    if raw is None:
        raise LabelUnparseable(f"response has no {name} field")
    normalized = " ".join(raw.lower().split()).strip(" .[]")
    label = scale.get(normalized)
    if label is None:
        raise LabelUnparseable(f"{name} value {raw!r} is not on the five-level scale")
    return label


def rate_quality(
    backend: BackendConfig,
    problem: str,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 2048,
) -> QualityRating:
    if not problem.strip():
        raise ValueError("problem must be non-empty")
    content = _call(backend, prompts.quality_prompt(problem), model=model, temperature=temperature, max_tokens=max_tokens)
    return QualityRating(
        label=_parse_label(content, "quality", QUALITY_LABELS),
        explanation=_extract_field(content, "explanation") or "",
    )


def _parse_knowledge(content: str) -> tuple[str, ...]:
    m = re.search(r'"knowledge"\s*:\s*(\[.*?\])', content, re.IGNORECASE | re.DOTALL)
    if m:
        try:
            items = json.loads(m.group(1))
            return tuple(str(item).strip() for item in items if str(item).strip())
        except json.JSONDecodeError:
            pass
    raw = _extract_field(content, "knowledge")
    if not raw:
        return ()
    return tuple(part.strip() for part in re.split(r"[;,]", raw) if part.strip())


def rate_difficulty(
    backend: BackendConfig,
    problem: str,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 2048,
) -> DifficultyRating:
    if not problem.strip():
        raise ValueError("problem must be non-empty")
    content = _call(backend, prompts.difficulty_prompt(problem), model=model, temperature=temperature, max_tokens=max_tokens)
    return DifficultyRating(
        label=_parse_label(content, "difficulty", DIFFICULTY_LABELS),
        knowledge=_parse_knowledge(content),
        explanation=_extract_field(content, "explanation") or "",
    )


def _balanced_span(text: str, start: int, open_ch: str, close_ch: str) -> int | None:
    """Index just past the bracket closing ``text[start]``, string-aware."""
    depth, j, in_string, escaped = 0, start, False, False
    while j < len(text):
        ch = text[j]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return j + 1
        j += 1
    return None


def _first_json_array(text: str):
    for start, ch in enumerate(text):
        if ch != "[":
            continue
        end = _balanced_span(text, start, "[", "]")
        if end is None:
            continue
        try:
            return json.loads(text[start:end])
        except json.JSONDecodeError:
            continue
    return None


def extract_tags(
    backend: BackendConfig,
    problem: str,
    *,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 1024,
) -> list[str]:
    """Short knowledge-point tags, lowercased and deduplicated (order kept)."""
    if not problem.strip():
        raise ValueError("problem must be non-empty")
    content = _call(backend, prompts.tags_prompt(problem), model=model, temperature=temperature, max_tokens=max_tokens)
    array = _first_json_array(content)
    if array is None or not isinstance(array, list):
        raise TagsUnparseable("response carries no JSON array")
    if not all(isinstance(item, str) for item in array):
        raise TagsUnparseable("tag array has non-string entries")
    seen: set[str] = set()
    tags = []
    for item in array:
        tag = item.strip().lower()
        if tag and tag not in seen:
            seen.add(tag)
            tags.append(tag)
    return tags


# --- report persistence ---------------------------------------------------------------

def write_report_json(report: SimilarityReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.as_dict(), ensure_ascii=False, indent=2), encoding="utf-8")


def write_scores_csv(per_item, path: str | Path) -> None:
    """Two-column item_id,score CSV; float scores keep full repr precision."""
    lines = ["item_id,score"]
    for item_id, score in per_item:
        rendered = repr(score) if isinstance(score, float) else str(score)
        lines.append(f"{item_id},{rendered}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
