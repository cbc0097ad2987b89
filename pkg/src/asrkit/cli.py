"""Batch command-line surface: freq | filter | segment | score | loss | budget.

Exit codes: 0 success, 1 usage/config error, 2 data/validation error,
3 numerical infeasibility (infeasible band or a failed --check).
Diagnostics go to stderr; data goes to stdout or the --out/--report files.
Output files are written to a temp file and renamed on success, so a
failing run never leaves partial output behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import budget, manifest, metrics, rnnt, selection
from ._parallel import default_threads
from .errors import (AsrkitError, ConfigError, InfeasibleBandError, ParseError,
                     ValidationError)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _write_atomic(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False, indent=2) + "\n"


def _emit(text: str, out_path):
    if out_path is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out_path, text)


def _load_json_file(path, kind: str, error_cls):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise error_cls(f"{kind} file is not valid JSON: {exc}") from exc


def _load_normalizer(value) -> metrics.NormalizerConfig:
    if value is None:
        return metrics.DEFAULT_NORMALIZER
    text = value.strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--norm is not valid JSON: {exc}") from exc
    else:
        obj = _load_json_file(value, "--norm", ConfigError)
    return metrics.NormalizerConfig.from_obj(obj)


def _resolve_threads(value) -> int:
    threads = value if value is not None else default_threads()
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    return threads


def cmd_freq(args) -> int:
    normalizer = _load_normalizer(args.norm)
    records = manifest.parse_manifest(args.manifest)
    table = metrics.build_freq_table(records, normalizer, args.coverage)
    _write_atomic(args.out, metrics.write_freq_table(table))
    print(f"freq: {len(records)} records, {table.total} tokens, "
          f"{len(table.counts)} distinct words, "
          f"common set {len(table.common_set)}", file=sys.stderr)
    return EXIT_OK


def cmd_filter(args) -> int:
    if args.config:
        obj = _load_json_file(args.config, "--config", ConfigError)
        config = selection.PipelineConfig.from_obj(obj)
    else:
        config = selection.PipelineConfig()
    if "disagreement" in config.stages and not args.pairs:
        raise ConfigError("disagreement stage enabled but --pairs not given")
    if "rare" in config.stages and not args.freq:
        raise ConfigError("rare stage enabled but --freq not given")
    threads = _resolve_threads(args.threads)
    records = manifest.parse_manifest(args.manifest)
    pairs = manifest.parse_hypothesis_pairs(args.pairs) if args.pairs else None
    table = metrics.load_freq_table(args.freq) if args.freq else None
    result = selection.run_pipeline(config, records, pairs=pairs,
                                    freq_table=table, threads=threads)
    _write_atomic(args.out, manifest.write_manifest(result.kept))
    _write_atomic(args.dropped, manifest.write_manifest(result.dropped))
    _write_atomic(args.report, _json_text(result.report))
    print(f"filter: kept {result.report['kept_records']} "
          f"({result.report['kept_hours']:.2f} h), dropped "
          f"{result.report['dropped_records']}", file=sys.stderr)
    return EXIT_OK


def cmd_segment(args) -> int:
    config = selection.PipelineConfig(stages=("segmentation",),
                                      max_segment_s=args.max_segment_s)
    records = manifest.parse_manifest(args.manifest)
    result = selection.run_pipeline(config, records)
    _write_atomic(args.out, manifest.write_manifest(result.kept))
    if args.dropped:
        _write_atomic(args.dropped, manifest.write_manifest(result.dropped))
    if args.report:
        _write_atomic(args.report, _json_text(result.report))
    print(f"segment: {result.report['input_records']} records -> "
          f"{result.report['kept_records']} segments", file=sys.stderr)
    return EXIT_OK


def cmd_score(args) -> int:
    normalizer = _load_normalizer(args.norm)
    threads = _resolve_threads(args.threads)
    refs = manifest.parse_transcripts(args.ref)
    hyps = manifest.parse_transcripts(args.hyp)
    table = metrics.load_freq_table(args.freq) if args.freq else None
    report = metrics.corpus_score(refs, hyps, normalizer=normalizer,
                                  table=table, threads=threads)
    _emit(_json_text(report), args.report)
    summary = f"score: wer {report['wer']:.4f}"
    if table is not None:
        summary += f", rare wer {report['rare_wer']:.4f}"
    print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_loss(args) -> int:
    obj = _load_json_file(args.input, "loss case", ParseError)
    instance, band = rnnt.load_case(obj)
    full = rnnt.rnnt_loss_full(instance, with_grad=args.grad and band is None)
    if band is not None:
        result = rnnt.rnnt_loss_restricted(instance, band, with_grad=args.grad)
    else:
        result = full
    out = {"loss": result.loss, "valid_cells": result.valid_cells}
    if band is not None:
        out["full_loss"] = full.loss
    if args.grad:
        out["grad_max_abs"] = float(abs(result.gradients).max())
    status = EXIT_OK
    if args.check:
        checks = rnnt.verify_instance(instance, band)
        out["checks"] = checks
        if not checks["passed"]:
            status = EXIT_NUMERIC
            print("loss: verification FAILED", file=sys.stderr)
    _emit(_json_text(out), args.out)
    return status


def cmd_budget(args) -> int:
    config = budget.EncoderConfig(hidden_dim=args.hidden,
                                  num_layers=args.layers,
                                  num_heads=args.heads,
                                  frame_ms=args.frame_ms)
    plan = budget.TrainPlan(batch_hours=args.batch_hours,
                            updates=args.updates,
                            flops_convention=args.convention)
    loss_dims = {
        "batch": args.loss_batch,
        "frames": args.loss_frames,
        "tokens": args.loss_tokens,
        "vocab": args.loss_vocab,
        "left_buffer": args.left_buffer,
        "right_buffer": args.right_buffer,
        "bytes_per_cell": args.bytes_per_cell,
    }
    report = budget.budget_report(config, plan, loss_dims=loss_dims)
    _emit(_json_text(report), args.out)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="asrkit",
                     description="Corpus selection, scoring, transducer loss "
                                 "and budget tooling for ASR pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("freq", help="build a word-frequency table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--coverage", type=float, default=0.9)
    p.add_argument("--norm", help="normalizer config: JSON file or inline JSON")
    p.set_defaults(func=cmd_freq)

    p = sub.add_parser("filter", help="run the data-selection pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="pipeline config JSON file")
    p.add_argument("--freq", help="frequency table (for the rare stage)")
    p.add_argument("--pairs", help="hypothesis pairs (for the disagreement stage)")
    p.add_argument("--out", required=True, help="kept manifest")
    p.add_argument("--dropped", required=True, help="dropped manifest")
    p.add_argument("--report", required=True, help="report JSON")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("segment", help="segment aligned records")
    p.add_argument("--manifest", required=True)
    p.add_argument("--max-segment-s", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.add_argument("--dropped")
    p.add_argument("--report")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("score", help="WER / rare-WER scoring")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--freq", help="frequency table enabling rare WER")
    p.add_argument("--norm", help="normalizer config: JSON file or inline JSON")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("loss", help="evaluate a transducer loss case")
    p.add_argument("--input", required=True, help="loss case JSON file")
    p.add_argument("--grad", action="store_true")
    p.add_argument("--check", action="store_true",
                   help="verify against enumeration and finite differences")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("budget", help="parameter/FLOPs/memory budget report")
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--heads", type=int, required=True)
    p.add_argument("--batch-hours", type=float, default=23.0)
    p.add_argument("--updates", type=int, default=200_000)
    p.add_argument("--frame-ms", type=float, default=80.0)
    p.add_argument("--convention", choices=budget.FLOPS_CONVENTIONS,
                   default="train_6ND")
    p.add_argument("--loss-batch", type=int, default=1)
    p.add_argument("--loss-frames", type=int, default=125)
    p.add_argument("--loss-tokens", type=int, default=30)
    p.add_argument("--loss-vocab", type=int, default=4095)
    p.add_argument("--left-buffer", type=int, default=15)
    p.add_argument("--right-buffer", type=int, default=15)
    p.add_argument("--bytes-per-cell", type=int, default=4)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"asrkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"asrkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleBandError as exc:
        print(f"asrkit: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"asrkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"asrkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
