"""Command-line entry point.

Exit codes: 0 on success, 2 when the episode budget runs out before the
sample target (partial corpus retained), 1 on any other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from graphforge.errors import BudgetExhausted, GraphforgeError
from graphforge.initializer import build_pool, save_pool
from graphforge.pipeline import (
    analyze_corpus,
    emit_plot_data,
    export_sft,
    load_config,
    run_synthesis,
)

logger = logging.getLogger(__name__)

METRICS = ("quality", "difficulty", "intra_similarity", "ams", "tags")


def _metric(name: str) -> str:
    normalized = name.replace("-", "_")
    if normalized not in METRICS:
        raise argparse.ArgumentTypeError(f"unknown metric {name!r}; choose from {', '.join(METRICS)}")
    return normalized


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphforge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pool = sub.add_parser("init-pool", help="build the style/concept pool adversarially")
    p_pool.add_argument("--config", required=True, help="run config JSON")
    p_pool.add_argument("--rounds", type=int, default=None, help="propose/filter rounds")
    p_pool.add_argument("--out", required=True, help="pool JSON output path")

    p_syn = sub.add_parser("synthesize", help="run episodes until the sample target")
    p_syn.add_argument("--config", required=True, help="run config JSON")
    p_syn.add_argument("--output-dir", default=None)
    p_syn.add_argument("--target-samples", type=int, default=None)
    p_syn.add_argument("--concurrency", type=int, default=None)
    p_syn.add_argument("--rng-seed", type=int, default=None)
    p_syn.add_argument("--run-id", default=None)
    p_syn.add_argument("--pool", default=None, help="pool file path (overrides pool_source)")

    p_sft = sub.add_parser("export-sft", help="emit prompt/response training records")
    p_sft.add_argument("--corpus", required=True)
    p_sft.add_argument("--template", choices=("simple", "complex"), default="simple")
    p_sft.add_argument("--markers", default="chatml", help="assistant marker token set")
    p_sft.add_argument("--out", default=None)
    p_sft.add_argument(
        "--truncated-only",
        action="store_true",
        help="keep only moderator-truncated episodes' samples (drop cap-forced ones)",
    )

    p_ana = sub.add_parser("analyze", help="compute a corpus metric report")
    p_ana.add_argument("metric", type=_metric)
    p_ana.add_argument("--corpus", required=True)
    p_ana.add_argument("--config", default=None, help="needed for judge-based metrics")
    p_ana.add_argument("--out-dir", default=None, help="default: <corpus dir>/analysis")
    p_ana.add_argument("--test-path", default=None, help="test-set JSONL (ams only)")
    p_ana.add_argument("--subsample-seed", type=int, default=0)

    p_plot = sub.add_parser("emit-plot-data", help="write the CSVs the plot tool consumes")
    p_plot.add_argument("--metric", type=_metric, required=True)
    p_plot.add_argument("--corpus", required=True)
    p_plot.add_argument("--analysis-dir", default=None)
    p_plot.add_argument("--out-dir", default=None, help="default: <corpus dir>/plotdata")
    p_plot.add_argument("--test-path", default=None)
    p_plot.add_argument("--config", default=None)
    p_plot.add_argument("--subsample-seed", type=int, default=0)
    return parser


def _apply_overrides(config, args):
    doc = dict(config.raw)
    for key, value in (
        ("output_dir", args.output_dir),
        ("target_samples", args.target_samples),
        ("concurrency", args.concurrency),
        ("rng_seed", args.rng_seed),
        ("run_id", args.run_id),
        ("pool_source", args.pool),
    ):
        if value is not None:
            doc[key] = value
    from graphforge.pipeline import config_from_dict

    return config_from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "init-pool":
            config = load_config(args.config)
            pool = build_pool(
                config.backends["proposer"].backend,
                args.rounds if args.rounds is not None else config.init_rounds,
                critic_backend=config.backends["critic"].backend,
                model=config.backends["proposer"].model,
                temperature=config.temperatures.get("proposer", 0.3),
                max_tokens=config.max_tokens,
            )
            save_pool(pool, args.out)
            print(f"pool written to {args.out}")
            return 0

        if args.command == "synthesize":
            config = _apply_overrides(load_config(args.config), args)
            manifest = run_synthesis(config)
            print(json.dumps(manifest.counts, indent=2))
            return 0

        if args.command == "export-sft":
            out = export_sft(
                args.corpus,
                template=args.template,
                assistant_marker_set=args.markers,
                out_path=args.out,
                truncated_only=args.truncated_only,
            )
            print(f"sft records written to {out}")
            return 0

        if args.command == "analyze":
            config = load_config(args.config) if args.config else None
            out_dir = args.out_dir or str(Path(args.corpus).parent / "analysis")
            written = analyze_corpus(
                args.metric,
                args.corpus,
                out_dir,
                config=config,
                test_path=args.test_path,
                subsample_seed=args.subsample_seed,
            )
            for path in written:
                print(f"wrote {path}")
            return 0

        if args.command == "emit-plot-data":
            config = load_config(args.config) if args.config else None
            out_dir = args.out_dir or str(Path(args.corpus).parent / "plotdata")
            written = emit_plot_data(
                args.corpus,
                args.metric,
                out_dir=out_dir,
                analysis_dir=args.analysis_dir,
                test_path=args.test_path,
                config=config,
                subsample_seed=args.subsample_seed,
            )
            for path in written:
                print(f"wrote {path}")
            return 0
    except BudgetExhausted as exc:
        logger.error("budget exhausted: %s", exc)
        return 2
    except GraphforgeError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except OSError as exc:
        logger.error("io error: %s", exc)
        return 1
    raise AssertionError("unhandled command")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
