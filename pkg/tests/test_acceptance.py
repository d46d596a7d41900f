"""Acceptance criteria, one test each.

Every test records a single ``ACCEPT <name>: PASS|FAIL (...)`` line; pytest
prints them in its terminal summary. ``python3 tests/test_acceptance.py``
runs the same checks without pytest.
"""

import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from docparse_eval.cli import main
from docparse_eval.harness import aggregate, evaluate_document
from docparse_eval.matching import iou_matrix, match_from_matrix, two_stage_f1, two_stage_match
from docparse_eval.model import DEFAULT_CATEGORIES, Block, Box, serialize_page
from docparse_eval.oracles import brute_force_from_matrix, naive_ted
from docparse_eval.randgen import box_instance, tree_pair
from docparse_eval.seqmetrics import levenshtein, normalized_edit, reading_order_edit
from docparse_eval.synth import PerturbSpec, Strata, mixture_specs, synth_corpus
from docparse_eval.tables import cell, make_table, ted, teds

_results: dict[str, bool] = {}
# collected by the terminal-summary hook in conftest.py
ACCEPT_LINES: list[str] = []


def verdict(name, ok, detail):
    _results[name] = bool(ok)
    line = f"ACCEPT {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPT_LINES.append(line)
    print(line)
    assert ok, line


def exact_total(result):
    return sum((Fraction(v) for _, _, v in result.pairs), Fraction(0))


def test_hungarian_equivalence():
    rng = random.Random(20240601)
    n, bad = 1200, 0
    start = time.perf_counter()
    for _ in range(n):
        preds, gts = box_instance(rng, 6)
        m = iou_matrix(preds, gts)  # one arithmetic pass shared by both solvers
        if exact_total(match_from_matrix(m, len(preds), len(gts))) != exact_total(
            brute_force_from_matrix(m, len(preds), len(gts))
        ):
            bad += 1
    elapsed = time.perf_counter() - start
    verdict("hungarian-equivalence", bad == 0 and elapsed < 10, f"{n} instances, {bad} mismatches, {elapsed:.2f}s")


def test_algorithm_fixtures():
    def blk(x1, y1, x2, y2, cat="text"):
        return Block(Box(x1, y1, x2, y2), cat, "")

    split = two_stage_f1([blk(0, 0, 48, 20), blk(52, 0, 100, 20)], [blk(0, 0, 100, 20)], tau=0.5)
    gts = [blk(0, 100 * i, 200, 100 * i + 30) for i in range(4)]
    empty = two_stage_f1([], gts)
    mismatch = two_stage_f1([blk(0, 0, 100, 90, "title")], [blk(0, 0, 100, 100, "text")])
    ok = (
        split.tally.as_tuple() == (1, 0, 0)
        and split.f1 == 1.0
        and empty.tally.as_tuple() == (0, 0, 4)
        and (empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0)
        and mismatch.tally.as_tuple() == (0, 1, 1)
    )
    detail = f"split {split.tally.as_tuple()} F1={split.f1}, empty {empty.tally.as_tuple()}, mismatch {mismatch.tally.as_tuple()}"
    verdict("algorithm-fixtures", ok, detail)


def test_constructive_perturbations():
    families = [PerturbSpec(), PerturbSpec(drop_prob=1.0), PerturbSpec(split_prob=1.0)] + mixture_specs(77, 50)
    strata = [Strata(1, 0.2, "en"), Strata(2, 0.3, "zh"), Strata(3, 0.1, "de"), Strata(2, 0.0, "fr")]
    checked, problems = 0, []
    for k, spec in enumerate(families):
        corpus = synth_corpus(500 + k, 4, spec, strata)
        for gt, pred, expected in corpus.pages:
            # go through the serialized sidecar, as an external consumer would
            side = json.loads(json.dumps(expected.to_dict()))
            r = two_stage_match(pred.blocks, gt.blocks)
            rep = evaluate_document(gt, pred)
            checked += 1
            if list(r.tally.as_tuple()) != side["tally"]:
                problems.append(f"{gt.id} tally {r.tally.as_tuple()} != {side['tally']}")
            if abs(reading_order_edit(gt, pred, r).normalized - side["reading_order_edit"]["normalized"]) > 1e-9:
                problems.append(f"{gt.id} reading order")
            if abs(rep.text_edit.normalized - side["text_edit"]["normalized"]) > 1e-9:
                problems.append(f"{gt.id} text edit")
    verdict(
        "constructive-perturbations",
        not problems,
        f"{len(families)} specs, {checked} pages, {len(problems)} mismatches" + (f": {problems[:3]}" if problems else ""),
    )


def test_ted_oracle():
    rng = random.Random(99)
    n, bad = 600, 0
    for _ in range(n):
        a, b = tree_pair(rng, 6)
        if ted(a, b, exact=True) != naive_ted(a, b):
            bad += 1
    gt = make_table([[cell("a"), cell("b")], [cell("c"), cell("d")]])
    pred = make_table([[cell("a"), cell("b")], [cell("c")]])
    seven_six = teds(gt, pred)
    self_sim = all(teds(t, t) == 1.0 for t in (gt, pred, make_table([])))
    ok = bad == 0 and self_sim and abs(seven_six - (1 - 1 / 7)) <= 1e-9
    verdict("ted-oracle", ok, f"{n} pairs, {bad} mismatches, 7-vs-6 TEDS={seven_six:.12f}")


def test_metric_axioms():
    rng = random.Random(4242)
    alphabet = "abcde文é "
    n, bad = 1500, 0
    for _ in range(n):
        a, b, c = ("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 10))) for _ in range(3))
        ab, ba, bc, ac = levenshtein(a, b), levenshtein(b, a), levenshtein(b, c), levenshtein(a, c)
        norms = [normalized_edit(x, y).normalized for x, y in ((a, b), (b, c), (a, c))]
        if ab != ba or ac > ab + bc or not all(0.0 <= v <= 1.0 for v in norms):
            bad += 1
    verdict("metric-axioms", bad == 0, f"{n} triples, {bad} violations")


def test_ablation_shape():
    base = dict(drop_prob=0.05, split_prob=0.3, jitter_px=3, seed=5)
    identity = synth_corpus(11, 100, PerturbSpec(**base))
    shuffled = synth_corpus(11, 100, PerturbSpec(**base, shuffle_order=True))
    ri = aggregate([evaluate_document(g, p) for g, p, _ in identity.pages]).overall
    rs = aggregate([evaluate_document(g, p) for g, p, _ in shuffled.pages]).overall
    ro_i, ro_s = ri["reading_order_edit"], rs["reading_order_edit"]
    ratio = ro_s / ro_i if ro_i else float("inf")
    same_f1 = ri["detection"] == rs["detection"]
    verdict(
        "ablation-shape",
        ro_i > 0 and ratio >= 5 and same_f1,
        f"RO identity {ro_i:.3f}, shuffled {ro_s:.3f}, ratio {ratio:.1f}x, F1 {ri['detection']['f1']:.3f} vs {rs['detection']['f1']:.3f}",
    )


def _write_corpus(root: Path, corpus, which: int) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for triple in corpus.pages:
        page = triple[which]
        (root / f"{page.id}.json").write_bytes(serialize_page(page))
    return root


def test_determinism(tmp_path):
    corpus = synth_corpus(8, 40, PerturbSpec(drop_prob=0.2, split_prob=0.4, jitter_px=5, text_noise_rate=0.1, shuffle_order=True, seed=3))
    gt, pred = _write_corpus(tmp_path / "gt", corpus, 0), _write_corpus(tmp_path / "pred", corpus, 1)
    outputs = {}
    for fmt in ("json", "markdown"):
        for workers in (1, 8):
            target = tmp_path / f"{fmt}-{workers}.out"
            code = main(["evaluate", "--gt", str(gt), "--pred", str(pred), "--workers", str(workers), "--report", fmt, "-o", str(target)])
            assert code == 0
            outputs[fmt, workers] = target.read_bytes()
    ok = outputs["json", 1] == outputs["json", 8] and outputs["markdown", 1] == outputs["markdown", 8]
    verdict("determinism", ok, f"workers 1 vs 8, {len(outputs['json', 1])} JSON bytes")


def test_end_to_end_self_score(tmp_path):
    strata = [Strata(1, 0.3, "en"), Strata(2, 0.3, "zh"), Strata(3, 0.2, "de"), Strata(2, 0.4, "fr")]
    corpus = synth_corpus(2025, 100, PerturbSpec(), strata)
    blocks = [b for gt, _, _ in corpus.pages for b in gt.blocks]
    categories = {b.category for b in blocks}
    grammars = {("latex" if b.text.startswith("\\begin") else "html") for b in blocks if b.category == "table"}
    root = _write_corpus(tmp_path / "x", corpus, 0)
    target = tmp_path / "report.json"
    start = time.perf_counter()
    code = main(["evaluate", "--gt", str(root), "--pred", str(root), "-o", str(target)])
    elapsed = time.perf_counter() - start
    overall = json.loads(target.read_text())["overall"]
    ok = (
        code == 0
        and categories == set(DEFAULT_CATEGORIES)
        and grammars == {"html", "latex"}
        and overall["pages"] == 100
        and overall["overall_edit"] == 0.0
        and overall["detection"]["f1"] == 1.0
        and overall["table_teds"] == 1.0
        and elapsed < 5
    )
    detail = (
        f"{overall['pages']} pages, {len(categories)} categories, grammars {sorted(grammars)}, "
        f"OverallEdit {overall['overall_edit']}, F1 {overall['detection']['f1']}, TEDS {overall['table_teds']}, {elapsed:.2f}s"
    )
    verdict("end-to-end-self-score", ok, detail)


if __name__ == "__main__":
    import tempfile

    for fn in (
        test_hungarian_equivalence,
        test_algorithm_fixtures,
        test_constructive_perturbations,
        test_ted_oracle,
        test_metric_axioms,
        test_ablation_shape,
    ):
        try:
            fn()
        except AssertionError:
            pass
    for fn in (test_determinism, test_end_to_end_self_score):
        with tempfile.TemporaryDirectory() as d:
            try:
                fn(Path(d))
            except AssertionError:
                pass
    failed = [k for k, v in _results.items() if not v]
    print(f"{len(_results) - len(failed)}/{len(_results)} acceptance criteria passed")
    raise SystemExit(1 if failed else 0)
