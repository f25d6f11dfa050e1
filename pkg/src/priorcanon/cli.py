"""Command-line interface: ``priorcanon {train,eval,canon-stats,gradcheck,gen-data}``.

Exit codes: 0 success, 1 usage error (bad flags or config values), 2 IO
error (missing or malformed files), 3 numerical failure (diverged training,
failed gradient check).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from .config import MODES, TrainConfig
from .errors import FormatError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.jsonl"

log = logging.getLogger("priorcanon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump_json(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> TrainConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from None
        try:
            config = TrainConfig.from_json(text)
        except json.JSONDecodeError as exc:
            raise FormatError("bad-config", f"{args.config} is not valid JSON: {exc}") from None
    else:
        config = TrainConfig()
    changes = {}
    for name in ("seed", "mode", "epochs", "data_seed"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    return config.replace(**changes) if changes else config


def _test_set(args, config):
    from .io import datasets_for_config, load_idx, load_point_dataset

    if getattr(args, "test_idx", None):
        return load_idx(*args.test_idx, n_classes=config.n_classes)
    if getattr(args, "test_points", None):
        return load_point_dataset(args.test_points)
    return datasets_for_config(config)[1]


def cmd_train(args) -> int:
    from .harness import build_bundle, train
    from .io import datasets_for_config, load_idx, read_checkpoint, save_checkpoint

    config = _load_config(args)
    if args.train_idx:
        train_set = load_idx(*args.train_idx, n_classes=config.n_classes)
    else:
        train_set = datasets_for_config(config)[0]
    bundle = build_bundle(config)
    if args.init:
        # start from another run's predictor (the stand-in for a pretrained network)
        records = read_checkpoint(args.init).records
        state = {k: v for k, v in records.items() if k.startswith("predictor.")}
        own = bundle.state_dict()
        if set(state) != {k for k in own if k.startswith("predictor.")}:
            raise FormatError("corrupt-header", f"{args.init} predictor does not match the config")
        own.update(state)
        bundle.load_state_dict(own)
    os.makedirs(args.out, exist_ok=True)
    metrics_path = os.path.join(args.out, METRICS_NAME)
    lines = []

    def record(row):
        lines.append(json.dumps(row, sort_keys=True))
        log.info("epoch %s %s task=%.4f acc=%.3f", row["epoch"], row["phase"], row["task_loss"], row["accuracy"])

    result = train(bundle, train_set, config, log=record)
    _atomic_write_text(metrics_path, "".join(line + "\n" for line in lines))
    save_checkpoint(os.path.join(args.out, CHECKPOINT_NAME), result.bundle, result.rng_state)
    _atomic_write_text(os.path.join(args.out, "config.json"), config.to_json() + "\n")
    log.info("wrote %s", args.out)
    return EXIT_OK


def _load_bundle(args):
    from .harness import identity_canonicalizer
    from .harness.models import ModelBundle
    from .io import load_checkpoint

    bundle = load_checkpoint(args.checkpoint)
    if getattr(args, "identity_canonicalizer", False):
        bundle = ModelBundle(bundle.config, bundle.predictor, identity_canonicalizer(bundle.config))
        bundle.eval()
    return bundle


def cmd_eval(args) -> int:
    from .harness import evaluate

    bundle = _load_bundle(args)
    report = evaluate(bundle, _test_set(args, bundle.config), args.group_order, args.n_rotations, args.seed)
    out = report.to_dict()
    out["gap"] = report.gap
    _dump_json(out, args.out)
    return EXIT_OK


def cmd_canon_stats(args) -> int:
    from .harness import evaluate

    bundle = _load_bundle(args)
    if not bundle.has_canonicalizer:
        raise UsageError("checkpoint has no canonicalizer (use --identity-canonicalizer to attach one)")
    report = evaluate(bundle, _test_set(args, bundle.config), args.group_order, args.n_rotations, args.seed)
    _dump_json({"identity_fraction": report.identity_fraction, "angle_histogram": report.angle_histogram,
                "n_test": report.n_test, "group": report.group}, args.out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .harness.gradsuite import run_gradient_suite

    results = run_gradient_suite(seed=args.seed, tol=args.tol)
    width = max(len(r["name"]) for r in results)
    for r in results:
        print(f"{'ok  ' if r['passed'] else 'FAIL'} {r['name']:<{width}}  rel_error={r['rel_error']:.3e}")
    worst = max(r["rel_error"] for r in results)
    failed = [r["name"] for r in results if not r["passed"]]
    print(f"{len(results) - len(failed)}/{len(results)} passed, max relative error {worst:.3e} (tol {args.tol:g})")
    if args.out:
        _dump_json(results, args.out)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_gen_data(args) -> int:
    from .io import datasets_for_config, save_idx_dataset, save_point_dataset

    config = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    for split, data in zip(("train", "test"), datasets_for_config(config)):
        if config.task == "images":
            paths = [os.path.join(args.out, f"{split}-{kind}.idx") for kind in ("images", "labels")]
            save_idx_dataset(data, *paths)
        else:
            paths = [os.path.join(args.out, f"{split}.npz")]
            save_point_dataset(paths[0], data)
        for p in paths:
            print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="priorcanon", description="Learned canonicalization with prior regularization.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def config_flags(p):
        p.add_argument("--config", help="JSON training config (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--data-seed", dest="data_seed", type=int, help="override the data seed")

    p = sub.add_parser("train", help="train a bundle; writes checkpoint and JSON-lines metrics")
    config_flags(p)
    p.add_argument("--mode", choices=MODES, help="override the config mode")
    p.add_argument("--epochs", type=int, help="override the config epoch count")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--init", help="checkpoint whose predictor weights initialize this run")
    p.add_argument("--train-idx", nargs=2, metavar=("IMAGES", "LABELS"), help="train on IDX files")
    p.set_defaults(func=cmd_train)

    def eval_flags(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--out", help="output JSON path (stdout when omitted)")
        p.add_argument("--group-order", dest="group_order", type=int, help="cyclic group for image evaluation")
        p.add_argument("--n-rotations", dest="n_rotations", type=int, default=4,
                       help="random rotations per point cloud")
        p.add_argument("--seed", type=int, default=0, help="seed for the random test rotations")
        p.add_argument("--identity-canonicalizer", action="store_true",
                       help="replace the canonicalizer with one that always picks the identity")
        p.add_argument("--test-idx", nargs=2, metavar=("IMAGES", "LABELS"), help="evaluate on IDX files")
        p.add_argument("--test-points", help="evaluate on a point-cloud .npz written by gen-data")

    p = sub.add_parser("eval", help="write an evaluation report as JSON")
    eval_flags(p)
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("canon-stats", help="identity fraction and histogram of canonical elements")
    eval_flags(p)
    p.set_defaults(func=cmd_canon_stats)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable component")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", help="also write the per-case results as JSON")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("gen-data", help="write the procedural train/test splits (IDX or .npz)")
    config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if args.command is None:
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, FormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
