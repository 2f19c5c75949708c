"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

Two criteria are known to fail in this build (3 and the corpus clause of 8);
both are limits of the block probe on log-log divergent series and are
documented in the project notes rather than relaxed here.
"""

from __future__ import annotations

import time
from fractions import Fraction

import pytest

from kummer.classical import BertrandParams, GaussParams, bertrand, condensation_check, gauss, olivier_check, raabe
from kummer.corpus import ALL_TESTS, CorpusConfig, corpus_run, load_corpus, rows_to_json
from kummer.engine import Evidence, kummer_div_step_check, kummer_step_check
from kummer.numeric import NumericContext
from kummer.oracle import probe_divergence
from kummer.sequences import TestWindow, eval_term, partial_sum
from kummer.witness import (
    constant_value,
    div_witness,
    olivier_witness,
    rational_surrogate,
    verify_witness_identity,
    weighted_conv_witness,
)

EXACT = NumericContext("exact")
MP50 = NumericContext("mp", 50)
SUITE_START = time.perf_counter()


def report(capsys, number: int, title: str, checks: list[tuple[str, bool]]) -> None:
    failed = [name for name, ok in checks if not ok]
    line = f"criterion {number:>2} {'PASS' if not failed else 'FAIL'}: {title}"
    if failed:
        line += " [failed: " + "; ".join(failed) + "]"
    with capsys.disabled():
        print("\n" + line)
    assert not failed, line


def _entries(label: str, weighted: bool | None = None):
    out = [e for e in load_corpus() if e.label == label]
    if weighted is not None:
        out = [e for e in out if (e.c is not None) == weighted]
    return out


@pytest.fixture(scope="module")
def mp_corpus():
    return corpus_run(tests=ALL_TESTS, cfg=CorpusConfig())


def test_criterion_01_witness_identity(capsys):
    t0 = time.perf_counter()
    w = TestWindow.span(1, 500)
    checks = []
    for e in _entries("converges"):
        if not e.exact_sum:
            continue
        try:
            S = constant_value(e.exact_sum, EXACT)
        except ArithmeticError:
            # irrational sum: the identity does not depend on S, so a rational
            # upper surrogate keeps q positive on the window and exercises it exactly
            S = rational_surrogate(e.weighted_terms, w.end + 2, EXACT, e.exact_sum)
        q = weighted_conv_witness(e.a, e.weights, S, EXACT, validate_upto=w.end + 1)
        checks.append((f"{e.id} exact residual 0", verify_witness_identity(e.a, e.weights, q, w, EXACT) == 0))
    S = MP50.mp.pi**2 / 6
    q = weighted_conv_witness("1/n^2", "1", S, MP50, validate_upto=w.end + 1)
    residual = verify_witness_identity("1/n^2", "1", q, w, MP50)
    checks.append((f"1/n^2 residual {MP50.fmt(residual)} <= 1e-40", residual <= MP50.num("1e-40")))
    elapsed = time.perf_counter() - t0
    checks.append((f"runtime {elapsed:.2f} s < 10 s", elapsed < 10))
    report(capsys, 1, "weighted-tail witness identity on [1, 500]", checks)


def _div_witnesses():
    out = []
    for e in _entries("diverges", weighted=False):
        try:
            eval_term(e.a, 1, EXACT)
            ctx = EXACT
        except ArithmeticError:
            ctx = MP50
        out.append((e, ctx, div_witness(e.a, ctx, validate_upto=1003)))
    return out


def test_criterion_02_divergence_witness(capsys):
    w = TestWindow.span(1, 1000)
    checks = []
    for e, ctx, q in _div_witnesses():
        checks.append((f"{e.id} q(1) = 1", q.value(1) == 1))
        # in mp mode the product q(n) a(n) is one rounding away from the partial sum
        slack = 0 if ctx.exact else ctx.mp.mpf(2) ** (8 - ctx.mp.prec)
        worst = max(abs(q.value(n) * eval_term(e.a, n, ctx) - partial_sum(e.a, n, ctx)) / partial_sum(e.a, n, ctx)
                    for n in w.indices())
        checks.append((f"{e.id} q*a = partial sum (rel. {ctx.fmt(worst)})", worst <= slack))
        ev = Evidence("catalog", f"{e.id}: partial sums of a divergent series")
        for m in (1, 2, 3):
            v = kummer_div_step_check(e.a, q, m, w, ctx, ev)
            checks.append((f"{e.id} m={m} {v.status}", v.holds))
    report(capsys, 2, "partial-sum witness of every divergent entry", checks)


def test_criterion_03_cauchy_blocks(capsys):
    t0 = time.perf_counter()
    checks = []
    for e, ctx, q in _div_witnesses():
        rep = probe_divergence(q, ctx, blocks=5, start=1, bound=10**6)
        found = sum(1 for b in rep.blocks if b.found)
        checks.append((f"{e.id}: {found} of 5 blocks within 10^6", rep.success))
    elapsed = time.perf_counter() - t0
    checks.append((f"runtime {elapsed:.2f} s < 5 s", elapsed < 5))
    report(capsys, 3, "5 disjoint blocks with sum of 1/q > 1/2 from n = 1", checks)


def test_criterion_04_step_convergence(capsys):
    w = TestWindow.span(1, 200)
    checks = []
    for m, margin in ((1, 1), (2, 3), (3, 7)):
        v = kummer_step_check("1/2^n", "1", m, 1, w, EXACT)
        checks.append((f"m={m} holds", v.holds))
        checks.append((f"m={m} margin {v.min_margin}..{v.max_margin} = {margin}",
                       v.min_margin == v.max_margin == Fraction(margin)))
    report(capsys, 4, "geometric 1/2^n with q = 1, margins 2^m - 1", checks)


def test_criterion_05_raabe(capsys):
    w = TestWindow.span(2, 10**4)
    conv = raabe("1/n^3", "1/2", w, MP50)
    div = raabe("1/sqrt(n)", "1/4", w, MP50, Evidence("catalog", "harmonic, scaled by 1/4"))
    inc = raabe("1/n", "1", w, EXACT)
    d = inc.details
    report(capsys, 5, "Raabe on [2, 10^4]", [
        ("1/n^3 converges", conv.conclusion == "converges"),
        ("1/sqrt(n) diverges", div.conclusion == "diverges"),
        ("1/n inconclusive", inc.conclusion == "inconclusive"),
        ("1/n R_minus = -1 exactly", d["R_minus_min"] == d["R_minus_max"] == -1),
        ("1/n R_plus = +1 exactly", d["R_plus_min"] == d["R_plus_max"] == 1),
    ])


def test_criterion_06_bertrand(capsys):
    w = TestWindow.span(10, 10**4)
    conv = bertrand("1/(n*ln(n)^3)", "1", BertrandParams.of("3/2"), "conv", w, MP50)
    div = bertrand("1/n", "1/10", BertrandParams.of("1/2"), "div", w, MP50, Evidence.catalog("nlogn"))
    report(capsys, 6, "Bertrand on [10, 10^4]", [
        (f"conv branch {conv.status}", conv.holds and conv.conclusion == "converges"),
        (f"div branch {div.status}", div.holds and div.conclusion == "diverges"),
    ])


def test_criterion_07_gauss_equality(capsys):
    v = gauss("1/n^3", "1", GaussParams.of(2, 2, "3+1/n"), "conv", TestWindow.span(1, 10**3), EXACT)
    report(capsys, 7, "Gauss equality case in exact arithmetic", [
        (f"holds ({v.status})", v.holds),
        (f"zero slack ({v.min_margin}..{v.max_margin})", v.min_margin == 0 and v.max_margin == 0),
    ])


def test_criterion_08_condensation(capsys, mp_corpus):
    w = TestWindow.span(1, 20)
    eq = condensation_check("1/n^2", "4^(0-n)", w, EXACT)
    bad = condensation_check("1/n", "2^(0-n)", w, EXACT)
    checks = [
        ("1/n^2 pointwise equality", eq.holds and all(lhs == b for _n, lhs, b in eq.trace)),
        (f"1/n fails at all {bad.details['violations']} indices",
         not bad.holds and bad.details["violations"] == len(w.indices())),
    ]
    rows = [r for r in mp_corpus if r.test == "condensed-classify" and r.status != "not-applicable"]
    for r in rows:
        checks.append((f"{r.entry}: condensed {r.conclusion} vs label {r.expected}", bool(r.agrees)))
    report(capsys, 8, "condensation and corpus-wide condensed classification", checks)


def test_criterion_09_olivier(capsys):
    w = TestWindow.span(1, 2000)
    q = olivier_witness("1/n^2", MP50.mp.pi**2 / 6, MP50, validate_upto=w.end + 1)
    rep = olivier_check("1/n^2", q, w, MP50, tail_start=1000)
    worst = max(abs(d - MP50.num(1) / (n + 1)) for n, d, _b in rep.verdict.trace)
    report(capsys, 9, "Olivier extension for 1/n^2", [
        ("inequality holds", rep.verdict.holds),
        (f"d_n = 1/(n+1) to {MP50.fmt(worst)}", worst <= MP50.num("1e-30")),
        (f"tail max n*a_n from n = 1000 is {MP50.fmt(rep.tail_max_n_a)}", rep.tail_max_n_a <= MP50.num("1e-3")),
    ])


def test_criterion_10_corpus_sweep(capsys, mp_corpus):
    exact_cfg = CorpusConfig(ctx=EXACT)
    first = rows_to_json(corpus_run(tests=ALL_TESTS, cfg=exact_cfg), exact_cfg, ALL_TESTS)
    second = rows_to_json(corpus_run(tests=ALL_TESTS, cfg=exact_cfg), exact_cfg, ALL_TESTS)
    bad = [f"{r.entry}/{r.test}" for r in mp_corpus if r.contradiction]
    exact_bad = first.count('"contradiction": true')
    elapsed = time.perf_counter() - SUITE_START
    report(capsys, 10, "corpus soundness sweep", [
        (f"mp contradictions: {bad or 'none'}", not bad),
        (f"exact contradictions: {exact_bad}", exact_bad == 0),
        ("exact JSON byte-identical", first == second),
        (f"acceptance runtime {elapsed:.1f} s < 60 s", elapsed < 60),
    ])
