"""Embeddings, similarity metrics (against brute-force oracles), ratings."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphforge import analysis as analysis_mod
from graphforge.analysis import (
    DIFFICULTY_LABELS,
    QUALITY_LABELS,
    EmbedderConfig,
    EmbeddingVector,
    ams,
    cosine,
    embed,
    extract_tags,
    intra_similarity,
    rate_difficulty,
    rate_quality,
)
from graphforge.client import BackendConfig, ChatResponse
from graphforge.errors import (
    DimMismatch,
    EmptySet,
    EmptyText,
    LabelUnparseable,
    TagsUnparseable,
    TooFewItems,
)

FALLBACK = EmbedderConfig(kind="fallback")
DUMMY = BackendConfig(kind="scripted", transcript_path="unused.jsonl")


def vec(*values) -> EmbeddingVector:
    arr = np.asarray(values, dtype=np.float64)
    return EmbeddingVector(values=arr, dim=len(arr), provider_id="test")


def fake_judge(monkeypatch, responses: list[str]):
    calls = []

    def fake(cfg, request):
        calls.append(request.messages[-1].content)
        return ChatResponse(content=responses[min(len(calls), len(responses)) - 1])

    monkeypatch.setattr(analysis_mod, "complete_with_retry", fake)
    return calls


# --- brute-force oracles (kept deliberately independent of the library paths) ---


def oracle_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    return float(np.dot(a, b) / (na * nb))


def oracle_intra(arrays: list[np.ndarray]):
    per = []
    for i in range(len(arrays)):
        vals = [oracle_cosine(arrays[i], arrays[j]) for j in range(len(arrays)) if j != i]
        per.append(float(np.mean(vals)))
    return per, float(np.mean(per))


def oracle_ams(train: list[np.ndarray], test: list[np.ndarray]):
    per = [max(oracle_cosine(t, s) for s in train) for t in test]
    return per, float(np.mean(per))


# --- fallback embedder ---------------------------------------------------------------


def test_fallback_identical_texts_identical_vectors():
    a, b = embed(FALLBACK, ["x", "x"])
    assert np.array_equal(a.values, b.values)
    assert a.dim == 1024 and a.provider_id == "hashed-tf-1024"


def test_fallback_disjoint_tokens_orthogonal():
    a, b = embed(FALLBACK, ["alpha", "beta"])
    assert cosine(a, b) == 0.0


def test_fallback_half_overlap_cosine():
    # Hand-computed: hashed TF of "a b" and "a c" are unit vectors sharing one
    # of two buckets, so the dot product is exactly 1/2.
    a, b = embed(FALLBACK, ["a b", "a c"])
    assert cosine(a, b) == pytest.approx(0.5, abs=1e-12)


def test_fallback_deterministic_pure_function():
    first = embed(FALLBACK, ["surface integrals over a disk"])[0]
    second = embed(FALLBACK, ["surface integrals over a disk"])[0]
    assert np.array_equal(first.values, second.values)


def test_fallback_normalized():
    (v,) = embed(FALLBACK, ["one two three four"])
    assert np.sqrt(np.dot(v.values, v.values)) == pytest.approx(1.0, abs=1e-12)


def test_fallback_empty_text_rejected():
    with pytest.raises(EmptyText):
        embed(FALLBACK, [""])
    with pytest.raises(EmptyText):
        embed(FALLBACK, ["!!!"])
    with pytest.raises(EmptyText):
        embed(FALLBACK, [])


def test_fallback_case_and_split_rules():
    a, b = embed(FALLBACK, ["Saddle-Surface", "saddle surface"])
    assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)


# --- cosine -----------------------------------------------------------------------------


def test_cosine_self_is_one():
    v = vec(3.0, 4.0)
    assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal_zero():
    assert cosine(vec(1.0, 0.0), vec(0.0, 1.0)) == 0.0


def test_cosine_analytic_45_degrees():
    # Analytic oracle is 1/sqrt(2); its 8-digit decimal spelling 0.70710678 is
    # itself 1.2e-9 away, so the tight bound must target the exact constant.
    v = vec(1.0, 0.0)
    w = vec(1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))
    assert cosine(v, w) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-9)


def test_cosine_dim_mismatch():
    with pytest.raises(DimMismatch):
        cosine(vec(1.0, 0.0), vec(1.0, 0.0, 0.0))


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_cosine_symmetry_and_bound(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 32))
    a, b = vec(*rng.standard_normal(d)), vec(*rng.standard_normal(d))
    assert abs(cosine(a, b) - cosine(b, a)) <= 1e-12
    assert abs(cosine(a, b)) <= 1.0 + 1e-12


# --- intra similarity --------------------------------------------------------------------


def test_intra_identical_vectors_all_ones():
    vs = [vec(1.0, 2.0, 2.0)] * 3
    report = intra_similarity(vs)
    assert all(score == 1.0 for _, score in report.per_item)
    assert report.aggregate == 1.0


def test_intra_two_orthogonal():
    report = intra_similarity([vec(1.0, 0.0), vec(0.0, 1.0)])
    assert [score for _, score in report.per_item] == [0.0, 0.0]


def test_intra_three_vector_fixture():
    # Hand-derived from the 3x3 cosine matrix:
    #   cos(v1,v2)=0, cos(v1,v3)=cos(v2,v3)=1/sqrt(2)
    #   per-item means: (0.35355, 0.35355, 0.70711)
    s = 1.0 / np.sqrt(2.0)
    report = intra_similarity([vec(1.0, 0.0), vec(0.0, 1.0), vec(s, s)])
    scores = [score for _, score in report.per_item]
    assert scores[0] == pytest.approx(0.35355, abs=1e-5)
    assert scores[1] == pytest.approx(0.35355, abs=1e-5)
    assert scores[2] == pytest.approx(0.70711, abs=1e-5)
    assert report.aggregate == pytest.approx(np.mean(scores), abs=0)


def test_intra_too_few():
    with pytest.raises(TooFewItems):
        intra_similarity([vec(1.0, 0.0)])


def test_intra_subsample_recorded_and_deterministic():
    rng = np.random.default_rng(3)
    vs = [vec(*rng.standard_normal(4)) for _ in range(12)]
    a = intra_similarity(vs, subsample_cap=6, subsample_seed=9)
    b = intra_similarity(vs, subsample_cap=6, subsample_seed=9)
    assert a == b
    assert len(a.per_item) == 6
    assert a.params["subsample_seed"] == 9 and a.params["n"] == 12


# --- ams -------------------------------------------------------------------------------------


def test_ams_test_subset_of_train_is_one():
    train = [vec(1.0, 2.0), vec(0.0, 1.0), vec(3.0, 1.0)]
    report = ams(train, [train[1]])
    assert report.aggregate == pytest.approx(1.0, abs=1e-12)


def test_ams_analytic_diagonal():
    s = 1.0 / np.sqrt(2.0)
    report = ams([vec(1.0, 0.0), vec(0.0, 1.0)], [vec(s, s)])
    assert report.aggregate == pytest.approx(0.70711, abs=1e-5)


def test_ams_empty_sets():
    with pytest.raises(EmptySet):
        ams([], [vec(1.0, 0.0)])
    with pytest.raises(EmptySet):
        ams([vec(1.0, 0.0)], [])


def test_ams_monotone_in_train_superset():
    rng = np.random.default_rng(11)
    train = [vec(*rng.standard_normal(6)) for _ in range(8)]
    test = [vec(*rng.standard_normal(6)) for _ in range(5)]
    smaller = ams(train[:4], test).aggregate
    larger = ams(train, test).aggregate
    assert larger >= smaller


def test_oracle_equivalence_exact_on_random_instances():
    # 200 random instances, n,m <= 50: production must match the exhaustive
    # double-loop oracles bit-for-bit (same dot-product primitive, different path).
    rng = np.random.default_rng(20260809)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        m = int(rng.integers(1, 51))
        d = int(rng.integers(2, 24))
        arrays = [rng.standard_normal(d) for _ in range(n)]
        test_arrays = [rng.standard_normal(d) for _ in range(m)]
        vs = [vec(*a) for a in arrays]
        ts = [vec(*a) for a in test_arrays]

        report = intra_similarity(vs)
        per, agg = oracle_intra(arrays)
        assert [score for _, score in report.per_item] == per
        assert report.aggregate == agg

        report = ams(vs, ts)
        per, agg = oracle_ams(arrays, test_arrays)
        assert [score for _, score in report.per_item] == per
        assert report.aggregate == agg


# --- judge ratings -----------------------------------------------------------------------------


def quality_response(label: str) -> str:
    return f'"explanation": "[it is rated]",\n"quality": "{label}".'


def test_rate_quality_all_labels_case_insensitive(monkeypatch):
    for raw, expected in [
        ("very poor", "VeryPoor"), ("VERY POOR", "VeryPoor"), ("Poor", "Poor"),
        ("average", "Average"), ("GOOD", "Good"), ("Excellent", "Excellent"),
    ]:
        calls = fake_judge(monkeypatch, [quality_response(raw)])
        rating = rate_quality(DUMMY, "Compute 1 + 1.")
        assert rating.label == expected
        assert rating.explanation == "[it is rated]"
        # The fixed rubric goes out verbatim with the problem inlined.
        assert "rate the quality of the math problem" in calls[0]
        assert "Compute 1 + 1." in calls[0]


def test_rate_quality_off_scale_unparseable(monkeypatch):
    fake_judge(monkeypatch, [quality_response("superb")])
    with pytest.raises(LabelUnparseable):
        rate_quality(DUMMY, "Compute 1 + 1.")


def test_rate_quality_missing_field_unparseable(monkeypatch):
    fake_judge(monkeypatch, ['"explanation": "words but no rating field"'])
    with pytest.raises(LabelUnparseable):
        rate_quality(DUMMY, "Compute 1 + 1.")


def test_rate_difficulty_with_knowledge_list(monkeypatch):
    fake_judge(
        monkeypatch,
        ['"explanation": "multi-step", "knowledge": ["surface integrals", "partial derivatives"], "difficulty": "medium"'],
    )
    rating = rate_difficulty(DUMMY, "The saddle-surface chip problem.")
    assert rating.label == "Medium"
    assert rating.knowledge == ("surface integrals", "partial derivatives")


def test_rate_difficulty_all_labels(monkeypatch):
    for raw, expected in DIFFICULTY_LABELS.items():
        fake_judge(monkeypatch, [f'"knowledge": [], "difficulty": "{raw.upper()}"'])
        assert rate_difficulty(DUMMY, "p").label == expected


def test_rate_difficulty_empty_knowledge(monkeypatch):
    fake_judge(monkeypatch, ['"knowledge": [], "difficulty": "hard"'])
    rating = rate_difficulty(DUMMY, "p")
    assert rating.label == "Hard" and rating.knowledge == ()


def test_rate_difficulty_missing_key_unparseable(monkeypatch):
    fake_judge(monkeypatch, ['"knowledge": ["algebra"]'])
    with pytest.raises(LabelUnparseable):
        rate_difficulty(DUMMY, "p")


def test_quality_scale_covers_five_levels():
    assert len(QUALITY_LABELS) == 5 and len(DIFFICULTY_LABELS) == 5


# --- tags ----------------------------------------------------------------------------------------


def test_extract_tags_golden_topics(monkeypatch):
    fake_judge(monkeypatch, ['["Hyperbolic Paraboloid", "surface integrals", "partial derivatives"]'])
    tags = extract_tags(DUMMY, "the chip problem")
    assert "hyperbolic paraboloid" in tags


def test_extract_tags_dedup_case_insensitive(monkeypatch):
    fake_judge(monkeypatch, ['["Algebra", "algebra"]'])
    assert extract_tags(DUMMY, "p") == ["algebra"]


def test_extract_tags_non_array_unparseable(monkeypatch):
    fake_judge(monkeypatch, ["these are tags: algebra, geometry"])
    with pytest.raises(TagsUnparseable):
        extract_tags(DUMMY, "p")


# --- remote embeddings endpoint -----------------------------------------------------


def test_remote_embeddings_round_trip():
    import json as json_mod
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json_mod.loads(self.rfile.read(length))
            assert self.path == "/embeddings"
            data = [
                {"index": i, "embedding": [float(i + 1), 1.0, 0.0]}
                for i, _ in enumerate(body["input"])
            ]
            payload = json_mod.dumps({"data": data}).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        cfg = EmbedderConfig(
            kind="remote",
            base_url=f"http://127.0.0.1:{server.server_address[1]}",
            model="emb-model",
        )
        vectors = embed(cfg, ["first", "second"])
        assert [v.provider_id for v in vectors] == ["remote:emb-model"] * 2
        # Returned in input order and L2-normalized.
        assert np.sqrt(np.dot(vectors[0].values, vectors[0].values)) == pytest.approx(1.0, abs=1e-12)
        assert vectors[1].values[0] > vectors[0].values[0]
    finally:
        server.shutdown()
