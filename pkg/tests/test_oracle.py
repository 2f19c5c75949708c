from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kummer.corpus import load_corpus
from kummer.numeric import NumericContext
from kummer.oracle import cauchy_block_probe, domination_index, probe_divergence, sum_estimate
from kummer.sequences import SequenceSpec, eval_term
from kummer.witness import constant_value, div_witness


def test_geometric_estimate(mp50):
    est = sum_estimate("1/2^n", 60, "geometric", mp50)
    assert est.certified and abs(est.value - 1) < mp50.num("1e-15")
    assert est.brackets(mp50.num(1))


@pytest.mark.slow
def test_integral_estimate_million(mp50):
    est = sum_estimate("1/n^2", 10**6, "integral", mp50)
    zeta2 = mp50.mp.pi**2 / 6
    assert est.certified and abs(est.value - zeta2) < mp50.num("1e-6")
    assert est.brackets(zeta2)


@pytest.mark.parametrize("text", ["1/n", "1/sqrt(n)", "1/((n+1)*ln(n+1))"])
def test_divergent_series_stay_heuristic(mp50, text):
    for method in ("integral", "auto"):
        est = sum_estimate(text, 400, method, mp50)
        assert not est.certified and est.note


def test_integral_needs_mp(exact):
    est = sum_estimate("1/n^2", 100, "integral", exact)
    assert est.confidence == "heuristic" and "mp mode" in est.note


def test_certified_estimates_bracket_exact_sums(mp50):
    seen = 0
    for e in load_corpus():
        if not e.exact_sum:
            continue
        est = sum_estimate(e.weighted_terms, 300, "auto", mp50)
        if est.certified:
            seen += 1
            assert est.brackets(constant_value(e.exact_sum, mp50)), e.id
    assert seen >= 6


def test_condensed_series_estimate(mp50):
    cond = SequenceSpec.from_text("1/((n+1)*ln(n+1)^2)").condensed()
    est = sum_estimate(cond, 38, "auto", mp50, check=8)
    assert est.certified and est.method == "integral"


def test_probe_examples(exact):
    block = cauchy_block_probe("n", 2, 100, exact)
    assert (block.found, block.start, block.end) == (True, 2, 3)
    assert abs(block.block_sum - 5 / 6) < 1e-12
    assert not cauchy_block_probe("2^n", 2, 60, exact).found
    # from n = 1 the first two terms already give 1/2 + 1/4 > 1/2
    assert cauchy_block_probe("2^n", 1, 60, exact).end == 2


def test_probe_harmonic_witness_from_ten(exact):
    q = div_witness("1/n", exact)
    block = cauchy_block_probe(q, 10, 10**6, exact)
    assert block.found and block.end == 61


def test_probe_report(exact):
    report = probe_divergence(div_witness("1/n", exact), exact)
    assert report.success
    assert [(b.start, b.end) for b in report.blocks] == [(1, 1), (2, 3), (4, 12), (13, 95), (96, 2677)]
    assert report.evidence().kind == "probe"


def test_probe_fails_for_convergent_reciprocals(exact):
    report = probe_divergence("n^2", exact, bound=10**5)
    assert not report.success and report.evidence() is None


def test_probe_tie_is_rechecked(exact):
    # 1/2 exactly is not > 1/2: the block must grow by one more term
    block = cauchy_block_probe("2", 1, 10, exact)
    assert block.end == 2


@pytest.mark.parametrize("entry, start", [(e, s) for e in ("harmonic", "p-half") for s in (1, 2, 10, 100, 500, 1000)])
def test_probe_from_every_start(entry, start):
    e = next(x for x in load_corpus() if x.id == entry)
    ctx = NumericContext("exact") if entry == "harmonic" else NumericContext("mp")
    assert cauchy_block_probe(div_witness(e.a, ctx, validate_upto=10), start, 10**6, ctx).found


@pytest.mark.xfail(strict=True, reason="sum 1/q grows like ln ln n; one block from n = 1000 needs far more than 10^6 terms")
def test_probe_from_start_1000_log_entry(mp50):
    e = next(x for x in load_corpus() if x.id == "nlogn")
    assert cauchy_block_probe(div_witness(e.a, mp50, validate_upto=10), 1000, 10**6, mp50).found


def test_domination_examples(exact):
    assert domination_index("1/n", "1/2", 7, 100, exact) == 7
    # (1 - 0.1) * 1 = 0.9 >= 0 already at r = 1
    assert domination_index("1/n", "1.05+0.95*(-1)^n", 1, 100, exact) == 1
    assert domination_index("1/n", "2", 1, 10**6, NumericContext("mp")) is None


def test_domination_needs_crossing(exact):
    # c = 2 on odd, 0 on even: partial sums of (1 - c) a are -1, -1/2, -5/6, -7/12, ...
    c = "1+(-1)^(n+1)"
    assert domination_index("1/n", SequenceSpec.from_text(c, check_positive=False), 1, 1000, exact) is None


def _brute(a, c, m, bound, ctx):
    total = Fraction(0)
    for r in range(m, bound + 1):
        total += (1 - eval_term(c, r, ctx)) * eval_term(a, r, ctx)
        if total >= 0:
            return r
    return None


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["1/n", "1/n^2", "1/2^n", "1/(n+3)"]),
    st.sampled_from(["1/2", "3/2", "1+1/n", "2-1/n", "1.5+(-1)^n", "1-1/(n+1)", "n/4"]),
    st.integers(1, 30),
)
def test_domination_matches_brute_force(a, c, m):
    ctx = NumericContext("exact")
    a_s, c_s = SequenceSpec.from_text(a), SequenceSpec.from_text(c, check_positive=False)
    assert domination_index(a_s, c_s, m, 400, ctx) == _brute(a_s, c_s, m, 400, ctx)


def test_domination_termwise_corpus_pairs(exact):
    pairs = 0
    for e in load_corpus():
        if e.c is None or e.label != "diverges" or e.sum_label != "diverges":
            continue
        if all(eval_term(e.c, n, exact) <= 1 for n in range(1, 200)):
            pairs += 1
            for m in (1, 5, 50):
                assert domination_index(e.a, e.c, m, 1000, exact) == m == _brute(e.a, e.c, m, 1000, exact)
    assert pairs >= 1
