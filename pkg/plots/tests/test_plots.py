"""Renderer tests: all assertions run on sidecar data, images only checked
for existence/non-emptiness."""

from __future__ import annotations

import numpy as np
import pytest

from gfplots import PlotSpec, SchemaMismatch, render, sidecar_path
from gfplots.cli import main


def write_bars_csv(path):
    path.write_text("label,count\ngood,2\nexcellent,1\n")


def test_bars_renders_nonempty_image_and_sidecar(tmp_path):
    src = tmp_path / "hist.csv"
    write_bars_csv(src)
    out = tmp_path / "bars.png"
    sidecar = render(PlotSpec(input_path=str(src), kind="bars", output_path=str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert sidecar.read_text() == "label,count\ngood,2\nexcellent,1\n"


def test_bars_rejects_wrong_schema(tmp_path):
    src = tmp_path / "scores.csv"
    src.write_text("item_id,score\na,0.5\nb,0.6\nc,0.7\n")
    with pytest.raises(SchemaMismatch):
        render(PlotSpec(input_path=str(src), kind="bars", output_path=str(tmp_path / "x.png")))


def test_hist_kde_bimodal_density(tmp_path):
    # 1000 scores drawn near 0.3 and 0.7 with a fixed seed; the KDE curve in
    # the sidecar must show exactly two local maxima.
    rng = np.random.default_rng(5)
    scores = np.concatenate([
        rng.normal(0.3, 0.04, 500),
        rng.normal(0.7, 0.04, 500),
    ])
    src = tmp_path / "scores.csv"
    src.write_text("item_id,score\n" + "\n".join(f"i{k},{float(s)!r}" for k, s in enumerate(scores)) + "\n")
    out = tmp_path / "kde.png"
    sidecar = render(PlotSpec(input_path=str(src), kind="hist_kde", output_path=str(out)))
    assert out.stat().st_size > 0

    lines = sidecar.read_text().splitlines()
    assert lines[0].startswith("# kde_bandwidth_factor=")
    assert lines[1] == "x,density"
    density = np.asarray([float(line.split(",")[1]) for line in lines[2:]])
    interior = density[1:-1]
    maxima = int(np.sum((interior > density[:-2]) & (interior > density[2:])))
    assert maxima == 2


def test_hist_kde_rejects_degenerate_input(tmp_path):
    src = tmp_path / "flat.csv"
    src.write_text("item_id,score\na,0.5\nb,0.5\nc,0.5\n")
    with pytest.raises(SchemaMismatch):
        render(PlotSpec(input_path=str(src), kind="hist_kde", output_path=str(tmp_path / "x.png")))


def write_matrix_csv(path, n=10, dim=1024, seed=3):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((n, dim))
    header = "label," + ",".join(f"d{i}" for i in range(dim))
    rows = [header]
    for i in range(n):
        rows.append(f"tag{i}," + ",".join(repr(float(v)) for v in matrix[i]))
    path.write_text("\n".join(rows) + "\n")


def test_scatter2d_deterministic_sidecar(tmp_path):
    src = tmp_path / "emb.csv"
    write_matrix_csv(src, n=10, dim=1024)
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    side_a = render(PlotSpec(input_path=str(src), kind="scatter2d", output_path=str(out_a), rng_seed=7))
    side_b = render(PlotSpec(input_path=str(src), kind="scatter2d", output_path=str(out_b), rng_seed=7))
    assert side_a.read_bytes() == side_b.read_bytes()
    assert out_a.stat().st_size > 0

    lines = side_a.read_text().splitlines()
    assert lines[1] == "label,x,y"
    assert len(lines) == 2 + 10
    assert lines[2].split(",")[0] == "tag0"


def test_scatter2d_seed_changes_projection(tmp_path):
    src = tmp_path / "emb.csv"
    write_matrix_csv(src, n=10, dim=32)
    side_a = render(PlotSpec(input_path=str(src), kind="scatter2d", output_path=str(tmp_path / "a.png"), rng_seed=1))
    side_b = render(PlotSpec(input_path=str(src), kind="scatter2d", output_path=str(tmp_path / "b.png"), rng_seed=2))
    assert side_a.read_bytes() != side_b.read_bytes()


def test_rendering_never_mutates_input(tmp_path):
    src = tmp_path / "hist.csv"
    write_bars_csv(src)
    before = src.read_bytes()
    render(PlotSpec(input_path=str(src), kind="bars", output_path=str(tmp_path / "x.png")))
    assert src.read_bytes() == before


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaMismatch):
        PlotSpec(input_path="x.csv", kind="pie", output_path="x.png")


def test_cli_roundtrip_and_exit_codes(tmp_path, capsys):
    src = tmp_path / "hist.csv"
    write_bars_csv(src)
    out = tmp_path / "bars.png"
    assert main(["--kind", "bars", "--input", str(src), "--output", str(out)]) == 0
    assert out.exists()
    assert sidecar_path(out).exists()

    bad = tmp_path / "bad.csv"
    bad.write_text("item_id,score\na,0.1\nb,0.2\nc,0.3\n")
    assert main(["--kind", "bars", "--input", str(bad), "--output", str(tmp_path / "no.png")]) == 1
