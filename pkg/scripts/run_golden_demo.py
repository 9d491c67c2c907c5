#!/usr/bin/env python3
"""Offline end-to-end demo: replay the bundled saddle-surface episode.

Materializes the scripted transcript, pool, and config under ./demo_out,
runs the full pipeline (zero network), then exports SFT records and emits
plot-data CSVs for the plotting tool.

Usage:
    python3 scripts/run_golden_demo.py [workdir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from graphforge.golden_demo import write_golden_run
from graphforge.pipeline import (
    analyze_corpus,
    emit_plot_data,
    export_sft,
    load_config,
    run_synthesis,
)


def main() -> int:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    config_path = write_golden_run(workdir)
    config = load_config(config_path)
    manifest = run_synthesis(config)
    print("run counts:", json.dumps(manifest.counts))

    out = Path(config.output_dir)
    corpus = out / "corpus.jsonl"
    record = json.loads(corpus.read_text().splitlines()[0])
    print("\nsynthesized question:\n" + record["question"][:400])

    sft_simple = export_sft(corpus, template="simple")
    sft_complex = export_sft(corpus, template="complex", out_path=out / "sft_complex.jsonl")
    print(f"\nsft exports: {sft_simple}, {sft_complex}")

    # The intra metric needs multiple items (and the kde plot needs >= 3
    # scores), so pad contrasting ones for the demo.
    audit_corpus = out / "audit_corpus.jsonl"
    contrasts = []
    for i, question in enumerate([
        "A bakery sells prime-numbered batches of rolls; count the primes below 100.",
        "A ladder leans against a wall at a given angle; find its height.",
        "Evaluate the sum of the first fifty odd integers.",
    ]):
        contrast = dict(record)
        contrast["sample_id"], contrast["question"] = f"demo-contrast-{i}", question
        contrasts.append(json.dumps(contrast, ensure_ascii=False))
    audit_corpus.write_text(corpus.read_text() + "\n".join(contrasts) + "\n")
    analyze_corpus("intra_similarity", audit_corpus, out / "analysis")
    paths = emit_plot_data(audit_corpus, "intra_similarity", out_dir=out / "plotdata")
    print(f"plot data: {', '.join(str(p) for p in paths)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
