"""Orchestration: configuration, episode scheduling, persistence, export.

Layout of a run directory:

    manifest.json     counts, config snapshot, wall time, per-role token usage
    pool.json         the pool actually used (generated or copied from file)
    corpus.jsonl      accepted samples, one per line
    rejects.jsonl     judge-rejected samples, same schema
    errors.jsonl      episodes whose sample stage errored out
    traces/ep-*.json  one evolution trace per episode

Workers evolve episodes concurrently, but results are consumed strictly in
episode-index order by a single writer, so output files, sample ids, and the
stop decision are deterministic for a given (config, transcripts). Every
artifact needed for resume is reconstructed from the files themselves, never
from the manifest, which makes a rerun after any crash point converge to the
uninterrupted run.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from graphforge import client as client_mod
from graphforge.analysis import (
    DIFFICULTY_LABELS,
    QUALITY_LABELS,
    EmbedderConfig,
    ams,
    embed,
    extract_tags,
    intra_similarity,
    rate_difficulty,
    rate_quality,
    write_report_json,
    write_scores_csv,
)
from graphforge.client import BackendConfig, RetryPolicy
from graphforge.errors import (
    AgentOutputError,
    BackendError,
    BudgetExhausted,
    ConfigError,
    EmptyPool,
    MissingMetric,
    PoolError,
    SchemaError,
)
from graphforge.executor import attempt_sample, sample_to_dict
from graphforge.initializer import InitialPool, build_pool, load_pool, sample_seed, save_pool
from graphforge.legislator import EvolutionPolicy, evolve, save_trace

logger = logging.getLogger(__name__)

CHAT_ROLES = ("proposer", "critic", "moderator", "executor", "solver", "judge")
ALL_ROLES = CHAT_ROLES + ("embedder",)
EPISODE_BUDGET_FACTOR = 4

MARKER_SETS = {
    "chatml": ("<|im_start|>", "<|im_end|>"),
    "qwen": ("<|im_start|>", "<|im_end|>"),
}

SIMPLE_PROMPT_SUFFIX = "Answer:\nLet's think step by step."


class InjectedCrash(RuntimeError):
    """Raised by the crash-injection hook; simulates a kill mid-run in tests."""


@dataclass(frozen=True)
class RoleBinding:
    backend: BackendConfig
    model: str = "default"


@dataclass(frozen=True)
class RunConfig:
    backends: dict[str, RoleBinding]
    embedder: EmbedderConfig
    pool_source: str  # "generate" or a pool file path
    target_samples: int
    policy: EvolutionPolicy
    temperatures: dict[str, float]
    max_tokens: int
    concurrency: int
    output_dir: str
    rng_seed: int
    run_id: str = "run0"
    init_rounds: int = 3
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        missing = [role for role in CHAT_ROLES if role not in self.backends]
        if missing:
            raise ConfigError(f"roles without a backend: {', '.join(missing)}")
        if self.target_samples < 1:
            raise ConfigError("target_samples must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")

    def sampling_map(self, roles) -> dict[str, dict]:
        return {
            role: {
                "model": self.backends[role].model,
                "temperature": self.temperatures.get(role, 0.3),
                "max_tokens": self.max_tokens,
            }
            for role in roles
        }


@dataclass
class RunManifest:
    run_id: str
    config: dict
    counts: dict[str, int]
    wall_time_s: float = 0.0
    token_usage: dict[str, dict[str, int]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "counts": dict(self.counts),
            "wall_time_s": self.wall_time_s,
            "token_usage": {k: dict(v) for k, v in self.token_usage.items()},
        }


def _zero_counts() -> dict[str, int]:
    return {
        "episodes_started": 0,
        "truncated": 0,
        "cap_forced": 0,
        "failed": 0,
        "samples_accepted": 0,
        "samples_rejected": 0,
        "sample_errors": 0,
    }


# --- configuration ---------------------------------------------------------------

def _backend_from_dict(doc: dict, role: str) -> BackendConfig:
    kind = doc.get("kind")
    retry_doc = doc.get("retry", {})
    retry = RetryPolicy(
        max_attempts=int(retry_doc.get("max_attempts", 3)),
        base_backoff_ms=int(retry_doc.get("base_backoff_ms", 250)),
    )
    try:
        if kind == "remote":
            return BackendConfig(
                kind="remote",
                base_url=doc.get("base_url"),
                api_key_env=doc.get("api_key_env"),
                retry=retry,
                timeout_s=float(doc.get("timeout_s", 60.0)),
            )
        if kind == "scripted":
            return BackendConfig(kind="scripted", transcript_path=doc.get("transcript_path"), retry=retry)
    except ValueError as exc:
        raise ConfigError(f"backend for role {role!r}: {exc}") from exc
    raise ConfigError(f"backend for role {role!r} has unknown kind {kind!r}")


def _embedder_from_dict(doc: dict) -> EmbedderConfig:
    kind = doc.get("kind", "fallback")
    if kind == "fallback":
        return EmbedderConfig(kind="fallback")
    if kind == "remote":
        try:
            return EmbedderConfig(
                kind="remote",
                base_url=doc.get("base_url"),
                api_key_env=doc.get("api_key_env"),
                model=doc.get("model", "default"),
                timeout_s=float(doc.get("timeout_s", 60.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"embedder: {exc}") from exc
    raise ConfigError(f"embedder has unknown kind {kind!r}")


def config_from_dict(doc: dict) -> RunConfig:
    backends_doc = doc.get("backends")
    if not isinstance(backends_doc, dict):
        raise ConfigError("config needs a 'backends' object")
    default_doc = backends_doc.get("default")
    bindings: dict[str, RoleBinding] = {}
    for role in CHAT_ROLES:
        role_doc = backends_doc.get(role, default_doc)
        if role_doc is None:
            raise ConfigError(f"no backend for role {role!r} and no 'default' entry")
        # A fresh BackendConfig per role keeps usage attribution unambiguous.
        bindings[role] = RoleBinding(
            backend=_backend_from_dict(role_doc, role),
            model=str(role_doc.get("model", "default")),
        )
    embedder_doc = backends_doc.get("embedder") or {"kind": "fallback"}
    embedder = _embedder_from_dict(embedder_doc)

    sampling_doc = doc.get("sampling", {})
    raw_temp = sampling_doc.get("temperature", 0.3)
    if isinstance(raw_temp, dict):
        temperatures = {role: float(raw_temp.get(role, 0.3)) for role in CHAT_ROLES}
    else:
        temperatures = {role: float(raw_temp) for role in CHAT_ROLES}

    policy_doc = doc.get("policy", {})
    policy = EvolutionPolicy(
        max_iterations=int(policy_doc.get("max_iterations", 5)),
        parse_retries=int(policy_doc.get("parse_retries", 2)),
    )
    if "output_dir" not in doc:
        raise ConfigError("config needs 'output_dir'")
    return RunConfig(
        backends=bindings,
        embedder=embedder,
        pool_source=str(doc.get("pool_source", "generate")),
        target_samples=int(doc.get("target_samples", 1)),
        policy=policy,
        temperatures=temperatures,
        max_tokens=int(sampling_doc.get("max_tokens", 4096)),
        concurrency=int(doc.get("concurrency", 1)),
        output_dir=str(doc["output_dir"]),
        rng_seed=int(doc.get("rng_seed", 0)),
        run_id=str(doc.get("run_id", "run0")),
        init_rounds=int(doc.get("init_rounds", 3)),
        raw=doc,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    return config_from_dict(doc)


# --- jsonl helpers ------------------------------------------------------------------

def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    path = Path(path)
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _read_jsonl_tolerant(path: Path) -> list[dict]:
    """Read a jsonl file, truncating a torn trailing line left by a crash."""
    if not path.exists():
        return []
    raw = path.read_text(encoding="utf-8")
    records = []
    good_upto = 0
    for line in raw.splitlines(keepends=True):
        stripped = line.strip()
        if not stripped:
            good_upto += len(line)
            continue
        try:
            records.append(json.loads(stripped))
        except json.JSONDecodeError:
            logger.warning("truncating torn trailing line in %s", path)
            path.write_text(raw[:good_upto], encoding="utf-8")
            break
        good_upto += len(line)
    return records


def _append_jsonl(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        fh.flush()


# --- synthesis run ---------------------------------------------------------------------

@dataclass
class _EpisodeResult:
    index: int
    episode_id: str
    trace: object
    sample: object = None
    sample_error: str | None = None


def _episode_id(run_id: str, index: int) -> str:
    return f"{run_id}-ep{index:05d}"


def _run_episode(config: RunConfig, pool: InitialPool, index: int) -> _EpisodeResult:
    draw = sample_seed(pool, config.rng_seed + index)
    backends = {role: config.backends[role].backend for role in CHAT_ROLES}
    trace = evolve(
        backends,
        draw,
        config.policy,
        sampling=config.sampling_map(("proposer", "critic", "moderator")),
    )
    episode_id = _episode_id(config.run_id, index)
    result = _EpisodeResult(index=index, episode_id=episode_id, trace=trace)
    if trace.final_graph is not None:
        try:
            result.sample = attempt_sample(
                backends,
                trace,
                draw.style,
                sample_id="pending",
                trace_ref=episode_id,
                sampling=config.sampling_map(("executor", "solver", "judge")),
            )
        except (AgentOutputError, BackendError, ValueError) as exc:
            result.sample_error = f"{type(exc).__name__}: {exc}"
    return result


def _resolve_pool(config: RunConfig, out_dir: Path) -> InitialPool:
    pool_path = out_dir / "pool.json"
    if pool_path.exists():
        return load_pool(pool_path)
    try:
        if config.pool_source == "generate":
            pool = build_pool(
                config.backends["proposer"].backend,
                config.init_rounds,
                critic_backend=config.backends["critic"].backend,
                model=config.backends["proposer"].model,
                temperature=config.temperatures.get("proposer", 0.3),
                max_tokens=config.max_tokens,
            )
        else:
            pool = load_pool(config.pool_source)
    except (EmptyPool, OSError, json.JSONDecodeError, ValueError) as exc:
        raise PoolError(f"cannot obtain pool: {exc}") from exc
    save_pool(pool, pool_path)
    return pool


def _reconcile(out_dir: Path, run_id: str):
    """Rebuild run state from files; the manifest is never trusted for counts."""
    corpus = _read_jsonl_tolerant(out_dir / "corpus.jsonl")
    rejects = _read_jsonl_tolerant(out_dir / "rejects.jsonl")
    errors = _read_jsonl_tolerant(out_dir / "errors.jsonl")
    lined_refs = {rec["trace_ref"] for rec in corpus + rejects if "trace_ref" in rec}
    lined_refs |= {rec["episode_id"] for rec in errors if "episode_id" in rec}

    counts = _zero_counts()
    counts["samples_accepted"] = len(corpus)
    counts["samples_rejected"] = len(rejects)
    counts["sample_errors"] = len(errors)
    done: set[int] = set()
    traces_dir = out_dir / "traces"
    for trace_path in sorted(traces_dir.glob(f"{run_id}-ep*.json")):
        try:
            doc = json.loads(trace_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            logger.warning("discarding unreadable trace %s", trace_path)
            trace_path.unlink(missing_ok=True)
            continue
        episode_id = doc.get("episode_id") or trace_path.stem
        outcome = doc.get("outcome")
        complete = outcome == "Failed" or episode_id in lined_refs
        if not complete:
            continue
        index = int(episode_id.rsplit("ep", 1)[1])
        done.add(index)
        counts["episodes_started"] += 1
        key = {"Truncated": "truncated", "CapForced": "cap_forced", "Failed": "failed"}.get(outcome)
        if key:
            counts[key] += 1
    return counts, done


def _checkpoint_manifest(manifest: RunManifest, out_dir: Path) -> None:
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest.as_dict(), ensure_ascii=False, indent=2), encoding="utf-8")
    tmp.replace(out_dir / "manifest.json")


def run_synthesis(config: RunConfig, *, crash_after_accepts: int | None = None) -> RunManifest:
    """Run episodes until the accepted-sample target or the episode budget.

    Rerunning against the same output directory resumes: completed episodes
    are detected from their persisted artifacts and never re-run, so sample
    ids stay unique and the final corpus matches an uninterrupted run.

    ``crash_after_accepts`` aborts the process after that many newly accepted
    samples (right after the corpus append, before the manifest checkpoint:
    the least convenient crash window). Tests use it to exercise resume.
    """
    started = time.monotonic()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "traces").mkdir(exist_ok=True)

    prior_wall = 0.0
    token_usage: dict[str, dict[str, int]] = {}
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        try:
            prior = json.loads(manifest_path.read_text(encoding="utf-8"))
            if prior.get("run_id") not in (None, config.run_id):
                raise ConfigError(
                    f"output dir {out_dir} belongs to run {prior.get('run_id')!r}, not {config.run_id!r}"
                )
            prior_wall = float(prior.get("wall_time_s", 0.0))
            token_usage = {k: dict(v) for k, v in prior.get("token_usage", {}).items()}
        except (json.JSONDecodeError, OSError):
            logger.warning("ignoring unreadable manifest at %s", manifest_path)

    pool = _resolve_pool(config, out_dir)
    counts, done = _reconcile(out_dir, config.run_id)
    budget = EPISODE_BUDGET_FACTOR * config.target_samples
    manifest = RunManifest(
        run_id=config.run_id,
        config=config.raw,
        counts=counts,
        wall_time_s=prior_wall,
        token_usage=token_usage,
    )

    usage_lock = threading.Lock()
    id_to_role = {id(config.backends[role].backend): role for role in CHAT_ROLES}

    def usage_hook(cfg, req, resp):
        role = id_to_role.get(id(cfg), "unknown")
        with usage_lock:
            entry = token_usage.setdefault(role, {"prompt_tokens": 0, "completion_tokens": 0})
            entry["prompt_tokens"] += resp.usage.prompt_tokens
            entry["completion_tokens"] += resp.usage.completion_tokens

    def finish(elapsed_base: float) -> None:
        manifest.wall_time_s = prior_wall + (time.monotonic() - elapsed_base)
        manifest.token_usage = token_usage
        _checkpoint_manifest(manifest, out_dir)

    pending = [i for i in range(budget) if i not in done]
    new_accepts = 0
    client_mod.set_usage_hook(usage_hook)
    try:
        if counts["samples_accepted"] >= config.target_samples:
            finish(started)
            return manifest
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.concurrency) as executor:
            futures: dict[int, concurrent.futures.Future] = {}
            cursor = 0  # next pending position to submit

            def top_up():
                nonlocal cursor
                if counts["samples_accepted"] >= config.target_samples:
                    return
                while cursor < len(pending) and len(futures) < config.concurrency:
                    index = pending[cursor]
                    futures[index] = executor.submit(_run_episode, config, pool, index)
                    cursor += 1

            top_up()
            for index in pending:
                if counts["samples_accepted"] >= config.target_samples:
                    break
                result: _EpisodeResult = futures.pop(index).result()

                save_trace(result.trace, out_dir / "traces" / f"{result.episode_id}.json", result.episode_id)
                counts["episodes_started"] += 1
                outcome_key = {"Truncated": "truncated", "CapForced": "cap_forced", "Failed": "failed"}[
                    result.trace.outcome
                ]
                counts[outcome_key] += 1

                if result.sample_error is not None:
                    counts["sample_errors"] += 1
                    _append_jsonl(
                        out_dir / "errors.jsonl",
                        {"episode_id": result.episode_id, "error": result.sample_error},
                    )
                elif result.sample is not None:
                    if result.sample.verification.passed:
                        sid = f"{config.run_id}-s{counts['samples_accepted'] + 1:06d}"
                        record = replace(result.sample, sample_id=sid)
                        _append_jsonl(out_dir / "corpus.jsonl", sample_to_dict(record))
                        counts["samples_accepted"] += 1
                        new_accepts += 1
                        if crash_after_accepts is not None and new_accepts >= crash_after_accepts:
                            raise InjectedCrash(f"injected crash after {new_accepts} accepts")
                    else:
                        sid = f"{config.run_id}-r{counts['samples_rejected'] + 1:06d}"
                        record = replace(result.sample, sample_id=sid)
                        _append_jsonl(out_dir / "rejects.jsonl", sample_to_dict(record))
                        counts["samples_rejected"] += 1
                finish(started)
                top_up()
            for future in futures.values():
                future.cancel()
    finally:
        client_mod.set_usage_hook(None)

    finish(started)
    if counts["samples_accepted"] < config.target_samples:
        raise BudgetExhausted(
            f"accepted {counts['samples_accepted']}/{config.target_samples} within "
            f"{budget}-episode budget",
            manifest=manifest,
        )
    return manifest


# --- SFT export -----------------------------------------------------------------------

def _read_corpus_lines(corpus_path: str | Path) -> list[tuple[int, dict]]:
    lines = []
    with open(corpus_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                lines.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: not valid JSON: {exc}") from exc
    return lines


def simple_prompt(question: str) -> str:
    return f"Question:\n{question}\n{SIMPLE_PROMPT_SUFFIX}"


def complex_prompt(question: str, marker_set: str = "chatml") -> str:
    if marker_set not in MARKER_SETS:
        raise ConfigError(f"unknown marker set {marker_set!r}; known: {sorted(MARKER_SETS)}")
    start, end = MARKER_SETS[marker_set]
    return (
        f"{start}system\nYou are a helpful assistant.{end}\n"
        f"{start}user\n{question}\n"
        f"Please reason step by step, and put your final answer within \\boxed{{}}.{end}\n"
        f"{start}assistant\n"
    )


def export_sft(
    corpus_path: str | Path,
    template: str = "simple",
    assistant_marker_set: str = "chatml",
    out_path: str | Path | None = None,
    *,
    truncated_only: bool = False,
) -> Path:
    """Reformat the corpus into prompt/response training records.

    Line order is preserved and the output has one line per corpus line
    (unless ``truncated_only`` drops cap-forced episodes' samples).
    """
    if template not in ("simple", "complex"):
        raise ConfigError(f"unknown template {template!r}")
    corpus_path = Path(corpus_path)
    out_path = Path(out_path) if out_path else corpus_path.with_name(f"sft_{template}.jsonl")
    records = []
    for lineno, doc in _read_corpus_lines(corpus_path):
        for key in ("question", "answer"):
            if not doc.get(key):
                raise SchemaError(f"line {lineno}: missing or empty {key!r}")
        if truncated_only and doc.get("forced_truncation", False):
            continue
        question, answer = doc["question"], doc["answer"]
        prompt = simple_prompt(question) if template == "simple" else complex_prompt(question, assistant_marker_set)
        records.append({"prompt": prompt, "response": answer})
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return out_path


# --- corpus analysis artifacts ------------------------------------------------------------

_ORDINALS = {
    "quality": ["very poor", "poor", "average", "good", "excellent"],
    "difficulty": ["very easy", "easy", "medium", "hard", "very hard"],
}
_LABEL_DISPLAY = {
    "quality": {v: k for k, v in QUALITY_LABELS.items()},
    "difficulty": {v: k for k, v in DIFFICULTY_LABELS.items()},
}


def _load_corpus_items(corpus_path: str | Path) -> list[tuple[str, str]]:
    items = []
    for lineno, doc in _read_corpus_lines(corpus_path):
        if not doc.get("question"):
            raise SchemaError(f"line {lineno}: missing or empty 'question'")
        items.append((str(doc.get("sample_id", lineno)), doc["question"]))
    return items


def analyze_corpus(
    metric: str,
    corpus_path: str | Path,
    out_dir: str | Path,
    *,
    config: RunConfig | None = None,
    test_path: str | Path | None = None,
    subsample_seed: int = 0,
) -> list[Path]:
    """Compute a metric over the corpus and persist the JSON + CSV report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = _load_corpus_items(corpus_path)
    written: list[Path] = []

    if metric in ("quality", "difficulty"):
        if config is None:
            raise ConfigError(f"{metric} rating needs a config with a judge backend")
        binding = config.backends["judge"]
        call_kwargs = {
            "model": binding.model,
            "temperature": config.temperatures.get("judge", 0.3),
            "max_tokens": config.max_tokens,
        }
        per_item = []
        for item_id, question in items:
            if metric == "quality":
                rating = rate_quality(binding.backend, question, **call_kwargs)
                entry = {"item_id": item_id, "score": _LABEL_DISPLAY["quality"][rating.label]}
            else:
                rating = rate_difficulty(binding.backend, question, **call_kwargs)
                entry = {
                    "item_id": item_id,
                    "score": _LABEL_DISPLAY["difficulty"][rating.label],
                    "knowledge": list(rating.knowledge),
                }
            entry["explanation"] = rating.explanation
            per_item.append(entry)
        scale = _ORDINALS[metric]
        aggregate = (
            sum(scale.index(entry["score"]) + 1 for entry in per_item) / len(per_item)
            if per_item
            else 0.0
        )
        report = {
            "metric": metric,
            "provider_id": binding.model,
            "per_item": per_item,
            "aggregate": aggregate,
            "params": {"scale": scale},
        }
        json_path = out_dir / f"{metric}.json"
        json_path.write_text(json.dumps(report, ensure_ascii=False, indent=2), encoding="utf-8")
        csv_path = out_dir / f"{metric}.csv"
        write_scores_csv([(e["item_id"], e["score"]) for e in per_item], csv_path)
        written.extend([json_path, csv_path])
        return written

    if metric == "tags":
        if config is None:
            raise ConfigError("tag extraction needs a config with a judge backend")
        binding = config.backends["judge"]
        per_item = []
        for item_id, question in items:
            tags = extract_tags(
                binding.backend,
                question,
                model=binding.model,
                temperature=config.temperatures.get("judge", 0.3),
                max_tokens=config.max_tokens,
            )
            per_item.append({"item_id": item_id, "tags": tags})
        report = {
            "metric": "tags",
            "provider_id": binding.model,
            "per_item": per_item,
            "aggregate": (
                sum(len(e["tags"]) for e in per_item) / len(per_item) if per_item else 0.0
            ),
            "params": {},
        }
        json_path = out_dir / "tags.json"
        json_path.write_text(json.dumps(report, ensure_ascii=False, indent=2), encoding="utf-8")
        csv_path = out_dir / "tags.csv"
        write_scores_csv([(e["item_id"], ";".join(e["tags"])) for e in per_item], csv_path)
        written.extend([json_path, csv_path])
        return written

    embedder = config.embedder if config is not None else EmbedderConfig(kind="fallback")
    ids = [item_id for item_id, _ in items]
    vectors = embed(embedder, [question for _, question in items])
    if metric == "intra_similarity":
        report = intra_similarity(vectors, ids, subsample_seed=subsample_seed)
    elif metric == "ams":
        if test_path is None:
            raise MissingMetric("ams needs a test-set path")
        test_items = _load_test_items(test_path)
        test_vectors = embed(embedder, [text for _, text in test_items])
        report = ams(vectors, test_vectors, [item_id for item_id, _ in test_items])
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    json_path = out_dir / f"{metric}.json"
    write_report_json(report, json_path)
    csv_path = out_dir / f"{metric}.csv"
    write_scores_csv(report.per_item, csv_path)
    written.extend([json_path, csv_path])
    return written


def _load_test_items(test_path: str | Path) -> list[tuple[str, str]]:
    items = []
    for lineno, doc in _read_corpus_lines(test_path):
        text = doc.get("question") or doc.get("text")
        if not text:
            raise SchemaError(f"line {lineno}: test item needs 'question' or 'text'")
        items.append((str(doc.get("sample_id", doc.get("id", lineno))), text))
    return items


# --- plot-data emission ----------------------------------------------------------------------

def emit_plot_data(
    corpus_path: str | Path,
    metric: str,
    *,
    out_dir: str | Path,
    analysis_dir: str | Path | None = None,
    test_path: str | Path | None = None,
    config: RunConfig | None = None,
    subsample_seed: int = 0,
) -> list[Path]:
    """Write the CSV file(s) the plotting component consumes.

    Ratings and tags must have been computed by ``analyze_corpus`` first
    (MissingMetric otherwise); similarity metrics are computed on the fly
    because embeddings are always computable offline.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    analysis_dir = Path(analysis_dir) if analysis_dir else Path(corpus_path).parent / "analysis"

    if metric in ("quality", "difficulty"):
        report_path = analysis_dir / f"{metric}.json"
        if not report_path.exists():
            raise MissingMetric(f"{metric} ratings not computed; run analyze {metric} first")
        report = json.loads(report_path.read_text(encoding="utf-8"))
        counts = {label: 0 for label in _ORDINALS[metric]}
        for entry in report["per_item"]:
            label = str(entry["score"]).lower()
            if label in counts:
                counts[label] += 1
        path = out_dir / f"{metric}_hist.csv"
        lines = ["label,count"] + [f"{label},{count}" for label, count in counts.items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return [path]

    if metric in ("intra_similarity", "ams"):
        if metric == "ams" and test_path is None:
            raise MissingMetric("ams needs a test-set path")
        embedder = config.embedder if config is not None else EmbedderConfig(kind="fallback")
        items = _load_corpus_items(corpus_path)
        vectors = embed(embedder, [q for _, q in items])
        if metric == "intra_similarity":
            report = intra_similarity(vectors, [i for i, _ in items], subsample_seed=subsample_seed)
        else:
            test_items = _load_test_items(test_path)
            test_vectors = embed(embedder, [t for _, t in test_items])
            report = ams(vectors, test_vectors, [i for i, _ in test_items])
        path = out_dir / f"{metric}_scores.csv"
        write_scores_csv(report.per_item, path)
        return [path]

    if metric == "tags":
        report_path = analysis_dir / "tags.json"
        if not report_path.exists():
            raise MissingMetric("tags not computed; run analyze tags first")
        report = json.loads(report_path.read_text(encoding="utf-8"))
        tags: list[str] = []
        seen = set()
        for entry in report["per_item"]:
            for tag in entry["tags"]:
                if tag not in seen:
                    seen.add(tag)
                    tags.append(tag)
        if not tags:
            raise MissingMetric("tag report is empty")
        embedder = config.embedder if config is not None else EmbedderConfig(kind="fallback")
        vectors = embed(embedder, tags)
        dim = vectors[0].dim
        path = out_dir / "tag_embeddings.csv"
        header = "label," + ",".join(f"d{i}" for i in range(dim))
        lines = [header]
        for tag, vector in zip(tags, vectors):
            rendered = ",".join(repr(float(x)) for x in vector.values)
            lines.append(f"{tag},{rendered}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return [path]

    raise ConfigError(f"unknown metric {metric!r}")
