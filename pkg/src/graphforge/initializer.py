"""Self-organized initial pool: style dimensions plus a concept taxonomy.

The pool is built from scratch by a propose-then-filter exchange (the proposer
surfaces candidate attributes, the critic rejects items that are not
orthogonal, valid, and diverse) or loaded from a user-supplied JSON file with
the same schema. Episodes start by drawing one value per dimension and one
leaf concept, all under a recorded seed.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from graphforge import prompts
from graphforge.client import BackendConfig, ChatRequest, Message, complete_with_retry
from graphforge.errors import EmptyPool
from graphforge.graphs import StyleTokens, iter_json_candidates

logger = logging.getLogger(__name__)

MAX_TAXONOMY_DEPTH = 3
DEFAULT_ROUNDS = 3


@dataclass(frozen=True)
class TaxonomyNode:
    name: str
    children: tuple["TaxonomyNode", ...] = ()
    concepts: tuple[str, ...] = ()

    def leaves(self) -> list[str]:
        """All leaf concepts in depth-first preorder."""
        found = list(self.concepts)
        for child in self.children:
            found.extend(child.leaves())
        return found


@dataclass(frozen=True)
class InitialPool:
    style_dimensions: dict[str, list[str]]
    concept_taxonomy: TaxonomyNode


@dataclass(frozen=True)
class SeedDraw:
    style: StyleTokens
    concept: str
    rng_seed: int


# --- persistence ----------------------------------------------------------------

def _node_to_dict(node: TaxonomyNode) -> dict:
    return {
        "name": node.name,
        "children": [_node_to_dict(c) for c in node.children],
        "concepts": list(node.concepts),
    }


def _node_from_dict(doc: dict, depth: int = 1) -> TaxonomyNode:
    name = str(doc.get("name", ""))
    concepts = [str(c) for c in doc.get("concepts", []) if str(c).strip()]
    raw_children = doc.get("children", []) or []
    children = []
    for child_doc in raw_children:
        if not isinstance(child_doc, dict):
            continue
        child = _node_from_dict(child_doc, depth + 1)
        if depth >= MAX_TAXONOMY_DEPTH:
            # Deeper structure gets flattened into this node's concepts.
            concepts.extend(child.leaves())
        else:
            children.append(child)
    return TaxonomyNode(name=name, children=tuple(children), concepts=tuple(concepts))


def pool_to_dict(pool: InitialPool) -> dict:
    return {
        "style_dimensions": {k: list(v) for k, v in pool.style_dimensions.items()},
        "concept_taxonomy": _node_to_dict(pool.concept_taxonomy),
    }


def pool_from_dict(doc: dict) -> InitialPool:
    dims = {
        str(name): [str(v) for v in values]
        for name, values in (doc.get("style_dimensions") or {}).items()
    }
    taxonomy = _node_from_dict(doc.get("concept_taxonomy") or {"name": "mathematics"})
    pool = InitialPool(style_dimensions=dims, concept_taxonomy=taxonomy)
    check_pool(pool)
    return pool


def save_pool(pool: InitialPool, path: str | Path) -> None:
    Path(path).write_text(json.dumps(pool_to_dict(pool), ensure_ascii=False, indent=2), encoding="utf-8")


def load_pool(path: str | Path) -> InitialPool:
    return pool_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def check_pool(pool: InitialPool) -> None:
    """Raise unless the pool satisfies every invariant."""
    if not pool.style_dimensions:
        raise EmptyPool("pool has no style dimensions")
    for name, values in pool.style_dimensions.items():
        if len(values) < 2:
            raise EmptyPool(f"dimension {name!r} has fewer than 2 values")
        lowered = [v.lower() for v in values]
        if len(set(lowered)) != len(lowered):
            raise ValueError(f"dimension {name!r} has duplicate values")
    leaves = pool.concept_taxonomy.leaves()
    if not leaves:
        raise EmptyPool("taxonomy has no leaf concepts")
    if any(not leaf.strip() for leaf in leaves):
        raise ValueError("taxonomy contains empty leaf concepts")
    _check_sibling_names(pool.concept_taxonomy)


def _check_sibling_names(node: TaxonomyNode) -> None:
    names = [c.name.lower() for c in node.children]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate sibling names under {node.name!r}")
    for child in node.children:
        _check_sibling_names(child)


# --- adversarial pool construction -------------------------------------------------

class _PoolAccumulator:
    """Case-insensitive merge of per-round survivors."""

    def __init__(self):
        # lower name -> (display name, {lower value -> display value})
        self.dims: dict[str, tuple[str, dict[str, str]]] = {}
        self.root_name = "mathematics"
        # lower path -> (display name, concepts {lower -> display})
        self.tax_nodes: dict[tuple[str, ...], tuple[str, dict[str, str]]] = {}

    def add_dimension(self, name: str, values: list[str]) -> None:
        key = name.strip().lower()
        if not key:
            return
        display, known = self.dims.setdefault(key, (name.strip(), {}))
        for value in values:
            vkey = value.strip().lower()
            if vkey and vkey not in known:
                known[vkey] = value.strip()

    def add_taxonomy(self, node: TaxonomyNode, path: tuple[str, ...] = ()) -> None:
        if not path and node.name.strip() and () not in self.tax_nodes:
            self.root_name = node.name.strip()
        display = node.name.strip() or self.root_name
        _, concepts = self.tax_nodes.setdefault(path, (display, {}))
        for concept in node.concepts:
            ckey = concept.strip().lower()
            if ckey and ckey not in concepts:
                concepts[ckey] = concept.strip()
        for child in node.children:
            if child.name.strip():
                self.add_taxonomy(child, path + (child.name.strip().lower(),))

    def build(self) -> InitialPool:
        dims = {
            display: list(values.values())
            for display, values in self.dims.values()
            if len(values) >= 2
        }
        root_display = self.tax_nodes.get((), (self.root_name, {}))[0]
        pool = InitialPool(style_dimensions=dims, concept_taxonomy=self._build_node((), root_display))
        check_pool(pool)
        return pool

    def _build_node(self, path: tuple[str, ...], display: str) -> TaxonomyNode:
        _, concepts = self.tax_nodes.get(path, (display, {}))
        child_paths = sorted(
            p for p in self.tax_nodes if len(p) == len(path) + 1 and p[: len(path)] == path
        )
        children = tuple(
            self._build_node(p, self.tax_nodes[p][0]) for p in child_paths
        )
        return TaxonomyNode(name=display, children=children, concepts=tuple(concepts.values()))


def _first_json_object(text: str) -> dict | None:
    for decoded, _raw in iter_json_candidates(text):
        if isinstance(decoded, dict):
            return decoded
    return None


def _candidates_from_proposal(doc: dict) -> tuple[dict[str, list[str]], TaxonomyNode]:
    dims = {
        str(name): [str(v) for v in values]
        for name, values in (doc.get("style_dimensions") or {}).items()
        if isinstance(values, list)
    }
    taxonomy = _node_from_dict(doc.get("concept_taxonomy") or {"name": "mathematics"})
    return dims, taxonomy


def _apply_rejections(
    dims: dict[str, list[str]], taxonomy: TaxonomyNode, rejections: dict
) -> tuple[dict[str, list[str]], TaxonomyNode]:
    rejected_dims = {str(d).lower() for d in rejections.get("rejected_dimensions", [])}
    rejected_values = {
        str(dim).lower(): {str(v).lower() for v in values}
        for dim, values in (rejections.get("rejected_values") or {}).items()
    }
    rejected_concepts = {str(c).lower() for c in rejections.get("rejected_concepts", [])}

    kept_dims: dict[str, list[str]] = {}
    for name, values in dims.items():
        if name.lower() in rejected_dims:
            continue
        bad = rejected_values.get(name.lower(), set())
        kept_dims[name] = [v for v in values if v.lower() not in bad]

    def prune(node: TaxonomyNode) -> TaxonomyNode:
        return TaxonomyNode(
            name=node.name,
            children=tuple(prune(c) for c in node.children),
            concepts=tuple(c for c in node.concepts if c.lower() not in rejected_concepts),
        )

    return kept_dims, prune(taxonomy)


def build_pool(
    backend: BackendConfig,
    rounds: int = DEFAULT_ROUNDS,
    *,
    critic_backend: BackendConfig | None = None,
    model: str = "default",
    temperature: float = 0.3,
    max_tokens: int = 4096,
) -> InitialPool:
    """Run ``rounds`` propose-filter exchanges and merge the survivors.

    The proposer and critic may sit on different backends (the pipeline binds
    them per role); by default both use ``backend``. Rounds whose output
    cannot be decoded contribute nothing rather than failing the build.
    """
    critic_backend = critic_backend or backend
    acc = _PoolAccumulator()
    for round_index in range(1, rounds + 1):
        summary = _known_summary(acc)
        proposal_text = complete_with_retry(
            backend,
            ChatRequest(
                model=model,
                messages=(Message("user", prompts.init_proposer_prompt(round_index, rounds, summary)),),
                temperature=temperature,
                max_tokens=max_tokens,
            ),
        ).content
        proposal_doc = _first_json_object(proposal_text)
        if proposal_doc is None:
            logger.warning("initialization round %d: proposer output not decodable, skipping", round_index)
            continue
        dims, taxonomy = _candidates_from_proposal(proposal_doc)
        candidates_json = json.dumps(
            {"style_dimensions": dims, "concept_taxonomy": _node_to_dict(taxonomy)},
            ensure_ascii=False,
        )
        critique_text = complete_with_retry(
            critic_backend,
            ChatRequest(
                model=model,
                messages=(Message("user", prompts.init_critic_prompt(candidates_json)),),
                temperature=temperature,
                max_tokens=max_tokens,
            ),
        ).content
        rejections = _first_json_object(critique_text) or {}
        dims, taxonomy = _apply_rejections(dims, taxonomy, rejections)
        for name, values in dims.items():
            acc.add_dimension(name, values)
        acc.add_taxonomy(taxonomy)
    return acc.build()


def _known_summary(acc: _PoolAccumulator) -> str:
    parts = []
    for display, values in acc.dims.values():
        parts.append(f"dimension {display}: {', '.join(values.values())}")
    leaves = [c for _, concepts in acc.tax_nodes.values() for c in concepts.values()]
    if leaves:
        parts.append("concepts: " + ", ".join(leaves))
    return "\n".join(parts)


# --- seed sampling --------------------------------------------------------------

def _check_drawable(pool: InitialPool) -> None:
    # Weaker than check_pool: a 1-value dimension just forces the draw.
    if not pool.style_dimensions:
        raise EmptyPool("pool has no style dimensions")
    for name, values in pool.style_dimensions.items():
        if not values:
            raise EmptyPool(f"dimension {name!r} has no values")
    if not pool.concept_taxonomy.leaves():
        raise EmptyPool("taxonomy has no leaf concepts")


def sample_seed(pool: InitialPool, rng_seed: int) -> SeedDraw:
    """Deterministic draw: one value per dimension (in pool order), then one
    leaf concept from the depth-first leaf list."""
    _check_drawable(pool)
    rng = random.Random(rng_seed)
    picked: dict[str, str] = {}
    for name, values in pool.style_dimensions.items():
        picked[name] = values[rng.randrange(len(values))]
    leaves = pool.concept_taxonomy.leaves()
    concept = leaves[rng.randrange(len(leaves))]
    return SeedDraw(style=StyleTokens(dimensions=picked), concept=concept, rng_seed=rng_seed)
