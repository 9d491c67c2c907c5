"""Offline figure renderer for metric CSV files.

Three kinds, matched to the CSV schemas the synthesis CLI emits:

- ``bars``      <- label,count            (rating distributions)
- ``hist_kde``  <- item_id,score          (similarity score distributions)
- ``scatter2d`` <- label,d0,...,dN        (tag-embedding matrix)

Every render also writes a sidecar CSV with the exact plotted values
(bar counts, density samples, projected coordinates), because images are
for humans and assertions belong on data. Same input and seed, same
sidecar bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__version__ = "0.1.0"

KINDS = ("bars", "hist_kde", "scatter2d")
DENSITY_SAMPLES = 256
DEFAULT_PERPLEXITY = 30.0


class SchemaMismatch(Exception):
    """Input CSV does not fit the declared plot kind."""


@dataclass(frozen=True)
class PlotSpec:
    input_path: str
    kind: str
    output_path: str
    title: str = ""
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaMismatch(f"unknown plot kind {self.kind!r}; choose from {KINDS}")


def sidecar_path(output_path: str | Path) -> Path:
    out = Path(output_path)
    return out.with_name(out.stem + "_sidecar.csv")


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise SchemaMismatch(f"{path}: need a header row plus at least one data row")
    return rows[0], rows[1:]


def _render_bars(spec: PlotSpec) -> Path:
    header, rows = _read_rows(spec.input_path)
    if [h.strip() for h in header] != ["label", "count"]:
        raise SchemaMismatch(f"bars input must have header label,count, got {header}")
    labels = [row[0] for row in rows]
    try:
        counts = [int(row[1]) for row in rows]
    except (ValueError, IndexError) as exc:
        raise SchemaMismatch(f"bars input has a non-integer count: {exc}") from exc

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(labels)), counts, color="#4878cf")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("count")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)

    side = sidecar_path(spec.output_path)
    lines = ["label,count"] + [f"{label},{count}" for label, count in zip(labels, counts)]
    side.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return side


def _render_hist_kde(spec: PlotSpec) -> Path:
    from scipy.stats import gaussian_kde

    header, rows = _read_rows(spec.input_path)
    if len(header) < 2 or header[1].strip() != "score":
        raise SchemaMismatch(f"hist_kde input must have a score column, got {header}")
    try:
        scores = np.asarray([float(row[1]) for row in rows], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise SchemaMismatch(f"hist_kde input has a non-numeric score: {exc}") from exc
    if len(scores) < 3 or np.std(scores) == 0.0:
        raise SchemaMismatch("hist_kde needs at least 3 scores with nonzero spread")

    kde = gaussian_kde(scores)  # Scott's rule bandwidth
    xs = np.linspace(float(scores.min()), float(scores.max()), DENSITY_SAMPLES)
    density = kde(xs)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(scores, bins=40, density=True, alpha=0.45, color="#4878cf", label="scores")
    ax.plot(xs, density, color="#d1495b", label="kde")
    ax.set_xlabel("score")
    ax.set_ylabel("density")
    ax.legend()
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)

    side = sidecar_path(spec.output_path)
    lines = [f"# kde_bandwidth_factor={float(kde.factor)!r}", "x,density"]
    lines += [f"{float(x)!r},{float(d)!r}" for x, d in zip(xs, density)]
    side.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return side


def _render_scatter2d(spec: PlotSpec) -> Path:
    from sklearn.manifold import TSNE

    header, rows = _read_rows(spec.input_path)
    if header[0].strip() != "label" or len(header) < 3:
        raise SchemaMismatch(f"scatter2d input must have header label,d0,...,dN, got {header[:4]}")
    labels = [row[0] for row in rows]
    try:
        matrix = np.asarray([[float(v) for v in row[1:]] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise SchemaMismatch(f"scatter2d input has a non-numeric entry: {exc}") from exc
    n = matrix.shape[0]
    if n < 3:
        raise SchemaMismatch("scatter2d needs at least 3 rows")

    perplexity = max(1.0, min(DEFAULT_PERPLEXITY, (n - 1) / 3))
    projector = TSNE(
        n_components=2,
        perplexity=perplexity,
        random_state=spec.rng_seed,
        init="pca",
        method="exact" if n < 3000 else "barnes_hut",
    )
    coords = projector.fit_transform(matrix)

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(coords[:, 0], coords[:, 1], s=18, color="#1b365d", alpha=0.8)
    ax.set_xlabel("dim 1")
    ax.set_ylabel("dim 2")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)

    side = sidecar_path(spec.output_path)
    lines = [f"# perplexity={perplexity!r} seed={spec.rng_seed}", "label,x,y"]
    lines += [f"{label},{float(x)!r},{float(y)!r}" for label, (x, y) in zip(labels, coords)]
    side.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return side


def render(spec: PlotSpec) -> Path:
    """Write the image and its sidecar CSV; returns the sidecar path."""
    renderers = {"bars": _render_bars, "hist_kde": _render_hist_kde, "scatter2d": _render_scatter2d}
    sidecar = renderers[spec.kind](spec)
    out = Path(spec.output_path)
    if not out.exists() or out.stat().st_size == 0:
        raise OSError(f"renderer produced no image at {out}")
    return sidecar
