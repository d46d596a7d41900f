"""Command-line entry point: evaluate, validate, synth, oracle-check."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import randgen
from .geometry import ClusterParams
from .harness import (
    ConfigError,
    EvalConfig,
    evaluate_corpus,
    evaluate_document,
    load_manifest,
    render_report,
)
from .matching import iou_matrix, match_from_matrix, two_stage_match
from .model import DEFAULT_CATEGORIES, AnnotationError, load_page_unchecked, serialize_page, validate_page
from .oracles import brute_force_from_matrix, naive_ted
from .synth import PerturbSpec, Strata, generate_page, mixture_specs, perturb_with_expectations, synth_corpus
from .tables import ted

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_MISSING_PATH = 2
EXIT_BAD_ANNOTATION = 3
EXIT_CONFIG = 4

# evaluate options that may also come from --config (dashes or underscores)
_EVAL_OPTIONS = frozenset(
    {
        "gt",
        "pred",
        "iou_threshold",
        "mode",
        "cluster_line_gap",
        "cluster_para_gap",
        "cluster_line_overlap",
        "cluster_para_overlap",
        "workers",
        "report",
        "manifest",
        "categories",
        "table_grammar",
        "output",
        "page_average",
    }
)
_EVAL_DEFAULTS = {
    "iou_threshold": 0.5,
    "mode": "category-aware",
    "workers": 1,
    "report": "json",
    "table_grammar": "auto",
    "page_average": False,
}


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt", help="ground-truth corpus directory")
    p.add_argument("--pred", help="prediction corpus directory")
    p.add_argument("--iou-threshold", type=float, help="IoU threshold tau (default 0.5)")
    p.add_argument("--mode", help="category-aware (default) or category-agnostic")
    p.add_argument("--cluster-line-gap", type=float, help="max horizontal gap for line merging, x mean box height")
    p.add_argument("--cluster-para-gap", type=float, help="max vertical gap for paragraph merging, x mean box height")
    p.add_argument("--cluster-line-overlap", type=float, help="min vertical overlap ratio for line merging")
    p.add_argument("--cluster-para-overlap", type=float, help="min horizontal overlap ratio for paragraph merging")
    p.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--report", help="json (default) or markdown")
    p.add_argument("--manifest", help="JSON file mapping page id -> group label")
    p.add_argument("--categories", help="JSON file with the category vocabulary (a list of names)")
    p.add_argument("--table-grammar", help="auto (default), html or latex")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--page-average", action="store_true", default=None, help="average edits per page instead of by length")
    p.add_argument("--config", help="JSON file supplying any of the above; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docparse-eval", description="Evaluate document layout parsing output.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score a prediction corpus against ground truth")
    _add_eval_flags(ev)

    va = sub.add_parser("validate", help="check annotation files against the page invariants")
    va.add_argument("--gt", required=True, help="corpus directory (or a single file)")
    va.add_argument("--categories", help="JSON file with the category vocabulary")
    va.add_argument("--table-grammar", default="auto")
    va.add_argument("--no-table-check", action="store_true", help="do not require table text to parse")

    sy = sub.add_parser("synth", help="write a synthetic GT/prediction corpus with expected metrics")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--pages", type=int, default=20)
    sy.add_argument("--out", required=True, help="output directory")
    sy.add_argument("--split-prob", type=float, default=0.0)
    sy.add_argument("--drop-prob", type=float, default=0.0)
    sy.add_argument("--jitter", type=float, default=0.0, help="jitter in pixels")
    sy.add_argument("--text-noise", type=float, default=0.0)
    sy.add_argument("--shuffle", action="store_true")

    oc = sub.add_parser("oracle-check", help="cross-check matcher and TED against brute force")
    oc.add_argument("--seed", type=int, default=0)
    oc.add_argument("--instances", type=int, default=1000)
    oc.add_argument("--tree-pairs", type=int, default=500)
    oc.add_argument("--mixtures", type=int, default=50)
    return parser


def _load_categories(path: str | None) -> tuple[str, ...]:
    if not path:
        return DEFAULT_CATEGORIES
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc.msg}") from exc
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise ConfigError(f"{path}: category file must be a JSON list of names")
    return tuple(data)


def _merged_options(args: argparse.Namespace) -> dict[str, Any]:
    opts = dict(_EVAL_DEFAULTS)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise FileNotFoundError(f"{args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: malformed JSON: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        for key, value in data.items():
            name = key.replace("-", "_")
            if name not in _EVAL_OPTIONS:
                raise ConfigError(f"{args.config}: unknown option {key!r}")
            opts[name] = value
    for name in _EVAL_OPTIONS:
        value = getattr(args, name, None)
        if value is not None:
            opts[name] = value
    return opts


def config_from_options(opts: dict[str, Any]) -> EvalConfig:
    defaults = ClusterParams()

    def pick(key: str, default: float) -> float:
        value = opts.get(key)
        return float(default if value is None else value)

    try:
        cluster = ClusterParams(
            line_v_overlap_min=pick("cluster_line_overlap", defaults.line_v_overlap_min),
            line_h_gap_max=pick("cluster_line_gap", defaults.line_h_gap_max),
            para_h_overlap_min=pick("cluster_para_overlap", defaults.para_h_overlap_min),
            para_v_gap_max=pick("cluster_para_gap", defaults.para_v_gap_max),
        )
        return EvalConfig(
            tau=float(opts["iou_threshold"]),
            mode=opts["mode"],
            cluster=cluster,
            categories=_load_categories(opts.get("categories")),
            table_grammar=opts["table_grammar"],
            workers=int(opts["workers"]),
            report_format=opts["report"],
            page_average=bool(opts["page_average"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _emit(data: bytes, output: str | None) -> None:
    if output:
        Path(output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts = _merged_options(args)
    if not opts.get("gt") or not opts.get("pred"):
        raise ConfigError("evaluate needs --gt and --pred")
    cfg = config_from_options(opts)
    manifest = load_manifest(Path(opts["manifest"])) if opts.get("manifest") else None
    report = evaluate_corpus(Path(opts["gt"]), Path(opts["pred"]), cfg, manifest)
    _emit(render_report(report, cfg.report_format), opts.get("output"))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    categories = _load_categories(args.categories)
    root = Path(args.gt)
    if root.is_file():
        files = [root]
    elif root.is_dir():
        files = sorted(root.glob("*.json"))
    else:
        raise FileNotFoundError(f"{root}: no such file or directory")
    count = 0
    for path in files:
        try:
            page = load_page_unchecked(path.read_bytes())
        except AnnotationError as exc:
            raise AnnotationError(f"{path}: {exc}", path=exc.path, line=exc.line) from exc
        for v in validate_page(page, categories, check_tables=not args.no_table_check, table_grammar=args.table_grammar):
            print(f"{path}: [{v.rule}] {v.message}")
            count += 1
    print(f"{len(files)} file(s) checked, {count} violation(s)", file=sys.stderr)
    return EXIT_FAILED if count else EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = PerturbSpec(
            split_prob=args.split_prob,
            drop_prob=args.drop_prob,
            jitter_px=args.jitter,
            text_noise_rate=args.text_noise,
            shuffle_order=args.shuffle,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    corpus = synth_corpus(args.seed, args.pages, spec)
    out = Path(args.out)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "pred").mkdir(parents=True, exist_ok=True)
    expected_pages = {}
    for gt, pred, expected in corpus.pages:
        (out / "gt" / f"{gt.id}.json").write_bytes(serialize_page(gt))
        (out / "pred" / f"{gt.id}.json").write_bytes(serialize_page(pred))
        expected_pages[gt.id] = expected.to_dict()
    sidecar = {
        "assumptions": {"iou_threshold_max": 0.5, "cluster": "defaults"},
        "spec": {
            "split_prob": spec.split_prob,
            "drop_prob": spec.drop_prob,
            "jitter_px": spec.jitter_px,
            "text_noise_rate": spec.text_noise_rate,
            "shuffle_order": spec.shuffle_order,
            "seed": spec.seed,
        },
        "pages": expected_pages,
    }
    (out / "expected.json").write_text(json.dumps(sidecar, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(corpus.groups, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(corpus.pages)} page pairs to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace) -> int:
    failures = run_oracle_checks(args.seed, args.instances, args.tree_pairs, args.mixtures)
    for line in failures:
        print(line)
    print("oracle-check: " + ("FAIL" if failures else "all oracles agree"), file=sys.stderr)
    return EXIT_FAILED if failures else EXIT_OK


def run_oracle_checks(seed: int, instances: int, tree_pairs: int, mixtures: int) -> list[str]:
    """Run the matcher, TED and perturbation oracles; return disagreement messages."""
    rng = random.Random(seed)
    failures = []
    for k in range(instances):
        preds, gts = randgen.box_instance(rng)
        m = iou_matrix(preds, gts)
        fast = match_from_matrix(m, len(preds), len(gts))
        slow = brute_force_from_matrix(m, len(preds), len(gts))
        if sum(map(Fraction, (p[2] for p in fast.pairs)), Fraction(0)) != sum(
            map(Fraction, (p[2] for p in slow.pairs)), Fraction(0)
        ):
            failures.append(f"matching instance {k}: totals differ")
    for k in range(tree_pairs):
        a, b = randgen.tree_pair(rng)
        if ted(a, b, exact=True) != naive_ted(a, b):
            failures.append(f"tree pair {k}: ted {ted(a, b, exact=True)} != naive {naive_ted(a, b)}")
    families = [PerturbSpec(), PerturbSpec(drop_prob=1.0), PerturbSpec(split_prob=1.0)]
    families += mixture_specs(seed, mixtures)
    for k, spec in enumerate(families):
        gt = generate_page(seed * 7919 + k, Strata(columns=1 + k % 3, table_density=0.2))
        pred, expected = perturb_with_expectations(gt, spec)
        got = two_stage_match(pred.blocks, gt.blocks).tally
        if got != expected.tally:
            failures.append(f"perturbation {k}: tally {got.as_tuple()} != expected {expected.tally.as_tuple()}")
        rep = evaluate_document(gt, pred)
        if abs(rep.text_edit.normalized - expected.text_edit.normalized) > 1e-9:
            failures.append(f"perturbation {k}: TextEdit mismatch")
        if abs(rep.reading_order_edit.normalized - expected.reading_order_edit.normalized) > 1e-9:
            failures.append(f"perturbation {k}: reading-order edit mismatch")
    return failures


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    handlers = {
        "evaluate": cmd_evaluate,
        "validate": cmd_validate,
        "synth": cmd_synth,
        "oracle-check": cmd_oracle_check,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_PATH
    except AnnotationError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_BAD_ANNOTATION
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
