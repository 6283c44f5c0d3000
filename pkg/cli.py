"""
Command-line entry point.

Usage:
    python cli.py generate --preset fine --seed 0 --out-dir data/fine
    python cli.py train --preset coarse --loss triplet --epochs 50 --out-dir runs/triplet
    python cli.py train --config configs/scl.json --seed 3
    python cli.py suite --preset fine --losses contrastive triplet --seeds 0 1 2 --out-dir runs/suite
    python cli.py diagnose runs/triplet/embeddings.json
    python cli.py evaluate runs/triplet/embeddings.json --ks 1 5 10
    python cli.py charts runs/triplet/train_log.csv --out-dir runs/triplet/charts --symlog

Exit codes: 0 ok, 2 configuration, 3 data, 4 numeric / contract failure,
5 suite finished with failed members.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from analytics.charts import render_charts
from core.config import ExperimentConfig
from core.exceptions import BenchError, ConfigError, DataError, ParameterError
from data.dataset import SPLITS
from data.feature_io import save_features
from data.synthetic import SyntheticSpec, generate_synthetic
from experiment import (
    diagnose,
    evaluate,
    format_comparison_table,
    format_recall_table,
    format_variance_table,
    print_recall,
    print_variance,
    run_experiment,
    run_suite,
)
from losses import LOSS_REGISTRY

logger = logging.getLogger('cli')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_PARTIAL_SUITE = 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(exc, BenchError):
        return EXIT_NUMERIC
    return 1


# ---------------------------------------------------------------------------
# Config assembly
# ---------------------------------------------------------------------------

def _raw_config(args: argparse.Namespace) -> Dict[str, Any]:
    raw: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        try:
            with open(args.config, 'r') as f:
                raw = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")

    def _nested(key: str) -> Dict[str, Any]:
        raw[key] = dict(raw.get(key) or {})
        return raw[key]

    for flag, key in (('preset', 'preset'), ('loss', 'loss'), ('seed', 'seed'),
                      ('epochs', 'epochs'), ('out_dir', 'out_dir'),
                      ('train_path', 'train_path'), ('test_path', 'test_path')):
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = value
    if getattr(args, 'full_scale', False):
        raw['full_scale'] = True
    if getattr(args, 'ks', None):
        raw['ks'] = args.ks
    if getattr(args, 'margin', None) is not None:
        _nested('loss_config')['margin'] = args.margin
    if getattr(args, 'lr', None) is not None:
        _nested('optimizer')['lr'] = args.lr
    if getattr(args, 'P', None) is not None:
        _nested('batch')['P'] = args.P
    if getattr(args, 'K', None) is not None:
        _nested('batch')['K'] = args.K
    return raw


def build_config(args: argparse.Namespace, **overrides: Any) -> ExperimentConfig:
    """CLI flags override the --config file, which overrides preset defaults."""
    raw = _raw_config(args)
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    spec = SyntheticSpec.preset(args.preset or 'default', seed=args.seed or 0)
    os.makedirs(args.out_dir, exist_ok=True)
    ext = '.csv' if args.format == 'csv' else '.json'
    for split in SPLITS:
        path = save_features(generate_synthetic(spec, split), os.path.join(args.out_dir, split + ext))
        print(f"{split:<5} -> {path}")
    with open(os.path.join(args.out_dir, 'synthetic_spec.json'), 'w') as f:
        json.dump(spec.to_dict(), f, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    summary = run_experiment(build_config(args))
    summary.print_report()
    return EXIT_OK


def cmd_suite(args: argparse.Namespace) -> int:
    losses = args.losses or list(LOSS_REGISTRY)
    unknown = [name for name in losses if name not in LOSS_REGISTRY]
    if unknown:
        raise ConfigError(f"Unknown loss(es) {unknown}. Available: {list(LOSS_REGISTRY)}")
    seeds = args.seeds if args.seeds else [args.seed or 0]
    cfgs = [build_config(args, loss=name, seed=seed) for seed in seeds for name in losses]

    out_dir = args.out_dir or 'runs/suite'
    result = run_suite(cfgs, out_dir=out_dir)
    print(format_comparison_table(result.table))
    print()
    print(format_variance_table(result.table))
    print()
    print(format_recall_table(result))
    if result.failures:
        logger.error("%d of %d suite member(s) failed", result.failures, len(cfgs))
        return EXIT_PARTIAL_SUITE
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    report, recall = diagnose(args.embedding_file, args.ks or (1, 5, 10))
    print_variance(report)
    print_recall(recall)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    print_recall(evaluate(args.embedding_file, args.ks or (1, 5, 10)))
    return EXIT_OK


def cmd_charts(args: argparse.Namespace) -> int:
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.log_csv))
    for path in render_charts(args.log_csv, out_dir, symlog=args.symlog, title=args.title):
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument('--config', help='JSON experiment config')
    p.add_argument('--preset', choices=['fine', 'coarse', 'default'], help='synthetic dataset preset')
    p.add_argument('--full-scale', action='store_true', help='768->512->128 head, batch 512, 100 epochs')
    p.add_argument('--seed', type=int)
    p.add_argument('--epochs', type=int)
    p.add_argument('--out-dir')
    p.add_argument('--margin', type=float)
    p.add_argument('--lr', type=float)
    p.add_argument('--train-path')
    p.add_argument('--test-path')
    p.add_argument('--P', type=int, help='classes per batch')
    p.add_argument('--K', type=int, help='samples per class')
    p.add_argument('--ks', type=int, nargs='+')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='dml-bench', description='Deep metric learning diagnostics bench')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', help='write synthetic train/test feature files')
    p.add_argument('--preset', choices=['fine', 'coarse', 'default'])
    p.add_argument('--seed', type=int)
    p.add_argument('--out-dir', required=True)
    p.add_argument('--format', choices=['binary', 'csv'], default='binary')
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('train', help='run one experiment')
    _add_experiment_flags(p)
    p.add_argument('--loss', choices=list(LOSS_REGISTRY))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('suite', help='compare several losses')
    _add_experiment_flags(p)
    p.add_argument('--losses', nargs='+', help='default: all seven')
    p.add_argument('--seeds', type=int, nargs='+')
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser('diagnose', help='variance and recall of an embedding file')
    p.add_argument('embedding_file')
    p.add_argument('--ks', type=int, nargs='+')
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser('evaluate', help='recall@k of an embedding file')
    p.add_argument('embedding_file')
    p.add_argument('--ks', type=int, nargs='+')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('charts', help='TrainLog CSV -> SVG line charts')
    p.add_argument('log_csv')
    p.add_argument('--out-dir')
    p.add_argument('--symlog', action='store_true')
    p.add_argument('--title', default='')
    p.set_defaults(func=cmd_charts)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler()],
    )
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        logger.error("%s failed (exit %d): %s", args.command, code, exc)
        return code


if __name__ == '__main__':
    sys.exit(main())
