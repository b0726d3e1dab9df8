"""Command-line pipeline: synth, train, detect, eval, verify-chain.

All knobs live in a JSON config file; a handful of flags override the
common ones. Exit codes: 0 success, 2 configuration error, 3 data error,
4 model bundle error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import conformal, detector, evalharness, parsers
from .errors import (AppendFailed, BundleError, EmptyCorpus, EmptyTemplateSet,
                     InvalidSpec, LabelMismatch, LogConformalError,
                     MalformedFormat, NoParsers, UnknownParser, UnparsableLine)
from .ingest import ChainStore, compile_schema, read_log_file, verify_chain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BUNDLE = 4

_CONFIG_ERRORS = (MalformedFormat, UnknownParser, InvalidSpec)
_DATA_ERRORS = (EmptyCorpus, EmptyTemplateSet, UnparsableLine, LabelMismatch,
                AppendFailed, NoParsers)


class _ConfigError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise _ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise _ConfigError(f"config {path} must hold a JSON object")
    return doc


def _schema_from_config(cfg: dict, format_override: str | None):
    fmt = format_override or cfg.get("format_template",
                                     evalharness.IIOT_PROFILE.format_template)
    rules = [tuple(rule) for rule in cfg.get("mask_rules", [])]
    if "mask_rules" not in cfg and "format_template" not in cfg and not format_override:
        rules = list(evalharness.IIOT_PROFILE.mask_rules)
    return compile_schema(fmt, rules), fmt, rules


def _parser_selection(cfg: dict) -> list[tuple[str, object]]:
    wanted = cfg.get("parsers")
    if not wanted:
        return [(name, parsers.default_params(name)) for name in parsers.PARSER_NAMES]
    return [(name, parsers.params_from_dict(name, overrides or {}))
            for name, overrides in wanted.items()]


def _epsilon(cfg: dict, args) -> float:
    eps = args.epsilon if args.epsilon is not None else cfg.get("epsilon", 0.27)
    if not 0.0 <= float(eps) <= 1.0:
        raise _ConfigError(f"epsilon must be in [0, 1], got {eps}")
    return float(eps)


def _grid(cfg: dict, args) -> tuple[float, ...]:
    if args.grid is not None:
        try:
            return tuple(float(x) for x in args.grid.split(","))
        except ValueError as exc:
            raise _ConfigError(f"bad grid {args.grid!r}") from exc
    return tuple(cfg.get("grid", evalharness.DEFAULT_GRID))


def _train_models(cfg: dict, records):
    models = []
    for name, params in _parser_selection(cfg):
        ts = parsers.fit(name, params, records)
        models.append(conformal.calibrate(ts, records))
    return models


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    synth_cfg = cfg.get("synth", {})
    profile_name = args.profile or synth_cfg.get("profile", "iiot")
    if profile_name not in evalharness.PROFILES:
        raise _ConfigError(f"unknown profile {profile_name!r}")
    corpus = evalharness.synth_corpus(
        seed=args.seed if args.seed is not None else cfg.get("seed", 1),
        n_train=args.train if args.train is not None else synth_cfg.get("n_train", 10000),
        n_test=args.test if args.test is not None else synth_cfg.get("n_test", 1000),
        n_anomalies=(args.anomalies if args.anomalies is not None
                     else synth_cfg.get("n_anomalies", 788)),
        profile=evalharness.PROFILES[profile_name])
    paths = evalharness.write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.raw_lines)} lines "
          f"({len(corpus.train_ids)} train / {len(corpus.test_ids)} test) "
          f"to {paths['log']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    schema, fmt, rules = _schema_from_config(cfg, args.format)
    input_path = args.input or cfg.get("paths", {}).get("train")
    if not input_path:
        raise _ConfigError("no training input (use --input or paths.train)")
    if not Path(input_path).exists():
        raise _ConfigError(f"training input {input_path} does not exist")
    records, skipped = read_log_file(input_path, schema)
    tokenless = sum(1 for r in records if not r.tokens)
    if tokenless:
        records = [r for r in records if r.tokens]
        skipped += tokenless
    if skipped:
        print(f"warning: skipped {skipped} unparsable or empty lines",
              file=sys.stderr)
    if not records:
        raise EmptyCorpus(f"no parsable records in {input_path}")

    chain_path = cfg.get("paths", {}).get("chain")
    if chain_path:
        store = ChainStore(chain_path)
        for rec in records:
            store.append(rec)

    models = _train_models(cfg, records)
    model_path = args.model or args.out or cfg.get("paths", {}).get("model", "model.bundle")
    schema_doc = {"format_template": fmt, "mask_rules": [list(r) for r in rules]}
    conformal.save_bundle(models, schema_doc, model_path)
    counts = ", ".join(f"{m.parser_name}={len(m.template_set.templates)}"
                       for m in models)
    print(f"trained on {len(records)} records; templates: {counts}; "
          f"bundle: {model_path}")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    model_path = args.model or cfg.get("paths", {}).get("model")
    if not model_path:
        raise _ConfigError("no model bundle (use --model or paths.model)")
    models, schema_doc = conformal.load_bundle(model_path)
    schema = compile_schema(schema_doc["format_template"],
                            [tuple(r) for r in schema_doc.get("mask_rules", [])])
    input_path = args.input or cfg.get("paths", {}).get("test")
    if not input_path:
        raise _ConfigError("no detection input (use --input or paths.test)")
    if not Path(input_path).exists():
        raise _ConfigError(f"detection input {input_path} does not exist")
    records, skipped = read_log_file(input_path, schema)
    if skipped:
        print(f"warning: skipped {skipped} unparsable lines", file=sys.stderr)

    eps = _epsilon(cfg, args)
    verdicts = detector.detect_batch(models, records, detector.DetectorConfig(epsilon=eps))
    alarms = [v for v in verdicts if v.label == detector.ANOMALY]
    out_path = args.out or cfg.get("paths", {}).get("alarms", "alarms.jsonl")
    with open(out_path, "w", encoding="utf-8") as fh:
        for v in alarms:
            fh.write(detector.render_alarm_line(v) + "\n")
    print(f"processed={len(records)} alarms={len(alarms)} epsilon={eps} out={out_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    paths = cfg.get("paths", {})
    if paths.get("corpus") and paths.get("labels") and paths.get("split"):
        schema, _, _ = _schema_from_config(cfg, args.format)
        corpus = evalharness.load_corpus(paths["corpus"], paths["labels"],
                                         paths["split"], schema)
    else:
        synth_cfg = cfg.get("synth", {})
        profile_name = args.profile or synth_cfg.get("profile", "iiot")
        if profile_name not in evalharness.PROFILES:
            raise _ConfigError(f"unknown profile {profile_name!r}")
        corpus = evalharness.synth_corpus(
            seed=args.seed if args.seed is not None else cfg.get("seed", 1),
            n_train=synth_cfg.get("n_train", 10000),
            n_test=synth_cfg.get("n_test", 1000),
            n_anomalies=synth_cfg.get("n_anomalies", 788),
            profile=evalharness.PROFILES[profile_name])

    models = _train_models(cfg, corpus.train_records)
    rows = evalharness.significance_sweep(models, corpus, _grid(cfg, args))
    report = evalharness.render_sweep_csv(rows)
    out_path = args.out or paths.get("report", "sweep.csv")
    Path(out_path).write_text(report, encoding="utf-8")
    print(evalharness.render_sweep_table(rows), end="")
    print(f"report: {out_path}")
    return EXIT_OK


def cmd_verify_chain(args) -> int:
    cfg = _load_config(args.config)
    store_path = args.store or cfg.get("paths", {}).get("chain")
    if not store_path:
        raise _ConfigError("no chain store (use --store or paths.chain)")
    if not Path(store_path).exists():
        raise _ConfigError(f"chain store {store_path} does not exist")
    report = verify_chain(store_path)
    if report.valid:
        print(f"chain valid: {report.entries} entries")
        return EXIT_OK
    print(f"chain INVALID at entry {report.first_bad_index}")
    return EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="logconformal",
                                 description="Template-mining ensemble log "
                                             "anomaly detector")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="RNG seed override")
        p.add_argument("--out", help="primary output path")
        p.add_argument("--format", help="header format template override")

    p = sub.add_parser("synth", help="generate a labeled corpus")
    common(p)
    p.add_argument("--profile", choices=sorted(evalharness.PROFILES))
    p.add_argument("--train", type=int, help="training lines")
    p.add_argument("--test", type=int, help="test lines")
    p.add_argument("--anomalies", type=int, help="planted anomalies")
    p.set_defaults(func=cmd_synth, epsilon=None, grid=None)

    p = sub.add_parser("train", help="fit parsers and calibrate")
    common(p)
    p.add_argument("--input", help="training log file")
    p.add_argument("--model", help="bundle output path")
    p.set_defaults(func=cmd_train, epsilon=None, grid=None)

    p = sub.add_parser("detect", help="score a log file against a bundle")
    common(p)
    p.add_argument("--input", help="log file to score")
    p.add_argument("--model", help="bundle path")
    p.add_argument("--epsilon", type=float, help="significance level")
    p.set_defaults(func=cmd_detect, grid=None)

    p = sub.add_parser("eval", help="significance sweep on a labeled corpus")
    common(p)
    p.add_argument("--grid", help="comma-separated epsilon grid")
    p.add_argument("--profile", choices=sorted(evalharness.PROFILES))
    p.set_defaults(func=cmd_eval, epsilon=None)

    p = sub.add_parser("verify-chain", help="check chain store integrity")
    common(p)
    p.add_argument("--store", help="chain store path")
    p.set_defaults(func=cmd_verify_chain, epsilon=None, grid=None)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "synth" and not args.out:
        print("error: synth requires --out", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (_ConfigError, *_CONFIG_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BundleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUNDLE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LogConformalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
