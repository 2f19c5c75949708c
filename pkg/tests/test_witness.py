from __future__ import annotations

from fractions import Fraction

import pytest

from kummer.corpus import load_corpus
from kummer.engine import Evidence, kummer_div_step_check, kummer_step_check
from kummer.numeric import NumericContext
from kummer.oracle import sum_estimate
from kummer.sequences import TestWindow, eval_term, partial_sum, ratio, seq
from kummer.witness import (
    SumConstant,
    WitnessError,
    conv_witness,
    div_witness,
    olivier_witness,
    rational_surrogate,
    user_witness,
    verify_witness_identity,
    weighted_conv_witness,
    weighted_div_witness,
)


def _zeta2(ctx):
    return ctx.mp.pi**2 / 6


def test_div_witness_harmonic(exact):
    q = div_witness("1/n", exact)
    assert [q(n) for n in (1, 2, 3)] == [1, 3, Fraction(11, 2)]
    assert q.provenance == "partial-sum"


def test_div_witness_geometric_products(exact):
    a = seq("1/2^n")
    q = div_witness(a, exact)
    for n in range(1, 30):
        assert q(n) * eval_term(a, n, exact) == 1 - Fraction(1, 2**n)


@pytest.mark.parametrize("text", ["1/n", "1/2^n", "1/n!", "n+1"])
def test_div_witness_starts_at_one(exact, text):
    assert div_witness(text, exact)(1) == 1


def test_conv_witness_geometric(exact):
    a = seq("1/2^n")
    q1 = conv_witness(a, 1, 1, exact)
    assert all(q1(n) == 1 for n in range(1, 40))
    assert kummer_step_check(a, q1, 1, 1, TestWindow.span(1, 100), exact).min_margin == 1
    q2 = conv_witness(a, 2, Fraction(1, 2), exact)
    assert all(q2(n) == Fraction(1, 2) for n in range(1, 40))
    v = kummer_step_check(a, q2, 2, 1, TestWindow.span(1, 100), exact)
    assert v.min_margin == v.max_margin == Fraction(3, 2)


def test_conv_witness_square(mp50):
    q = conv_witness("1/n^2", 1, _zeta2(mp50), mp50)
    v = kummer_step_check("1/n^2", q, 1, 1, TestWindow.span(1, 1000), mp50)
    assert v.holds
    assert v.min_margin >= 1 - mp50.num("1e-20")


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("text, total", [("1/2^n", Fraction(1)), ("1/(n*(n+1))", Fraction(1)), ("1/3^n", Fraction(1, 2))])
def test_conv_witness_check_value(exact, text, total, m):
    a = seq(text)
    S_m = total - partial_sum(a, m - 1, exact) if m > 1 else total
    q = conv_witness(a, m, S_m, exact, validate_upto=60)
    for n in range(1, 40):
        value = q(n) * ratio(a, n, m, exact) - q(n + m)
        inner = sum((eval_term(a, j, exact) for j in range(n + m + 1, n + 2 * m)), Fraction(0))
        assert value == 1 + inner / eval_term(a, n + m, exact)


def test_weighted_tail_harmonic_weights(mp50):
    S = _zeta2(mp50)
    q = weighted_conv_witness("1/n", "1/n", S, mp50)
    assert mp50.fmt(q(1)).startswith("0.644934066")
    assert verify_witness_identity("1/n", "1/n", q, TestWindow.span(1, 1000), mp50) <= mp50.num("1e-40")


def test_weighted_tail_geometric(exact):
    q = weighted_conv_witness("1/2^n", "1", 1, exact)
    assert all(q(n) == 1 for n in range(1, 50))
    assert verify_witness_identity("1/2^n", "1", q, TestWindow.span(1, 200), exact) == 0


def test_weighted_tail_underestimated_sum(exact):
    with pytest.raises(WitnessError) as info:
        weighted_conv_witness("1/2^n", "1", Fraction(9, 10), exact)
    assert info.value.index == 4


def test_weighted_partial_examples(exact):
    q = weighted_div_witness("1/n", "1", exact)
    H = Fraction(0)
    for n in range(1, 30):
        H += Fraction(1, n)
        assert q(n) == n * H
    g = weighted_div_witness("1/2^n", "1", exact)
    assert [g(n) for n in range(1, 6)] == [1, 3, 7, 15, 31]
    assert verify_witness_identity("1/n", "1", q, TestWindow.span(1, 300), exact) == 0
    for a, c in [("1/n", "1/n"), ("1/n^2", "n"), ("1/3^n", "2")]:
        assert weighted_div_witness(a, c, exact)(1) == eval_term(seq(c), 1, exact)


def test_weighted_tail_square_high_precision(mp50):
    q = weighted_conv_witness("1/n^2", "1/n^2", mp50.mp.pi**4 / 90, mp50)
    assert verify_witness_identity("1/n^2", "1/n^2", q, TestWindow.span(1, 500), mp50) <= mp50.num("1e-40")


def test_olivier_witness_shape(mp50):
    q = olivier_witness("1/n^2", _zeta2(mp50), mp50)
    n = 7
    assert abs(q(n) - n * (_zeta2(mp50) - partial_sum(seq("1/n^2"), n, mp50))) < mp50.tol


def test_sum_constant_provenance(mp50):
    est = sum_estimate("1/n^2", 200, "integral", mp50)
    assert SumConstant.coerce(est, mp50).source == "oracle"
    assert SumConstant.coerce("pi^2/6", mp50).source == "user"
    with pytest.raises(ValueError):
        SumConstant.coerce("n+1", mp50)
    q = conv_witness("1/n^2", 1, est, mp50, validate_upto=150)
    d = q.to_dict(TestWindow.span(1, 100))
    assert d["provenance"] == "step-tail" and d["sum_constant"]["source"] == "oracle"


def test_user_witness(exact):
    q = user_witness("n^2", exact)
    assert q(3) == 9 and q.provenance == "user"


def test_convergent_catalog_entries_identity(exact):
    window = TestWindow.span(1, 1000)
    checked = 0
    for e in load_corpus():
        if e.label != "converges" or not e.exact_sum or e.a.expr is None:
            continue
        try:
            S = SumConstant.coerce(e.exact_sum, exact)
        except ArithmeticError:
            S = rational_surrogate(e.weighted_terms, 1200, exact, e.exact_sum)
        q = weighted_conv_witness(e.a, e.weights, S, exact, validate_upto=window.end + 1)
        assert verify_witness_identity(e.a, e.weights, q, TestWindow.span(1, 300), exact) == 0, e.id
        checked += 1
    assert checked >= 5


@pytest.mark.parametrize("entry", ["harmonic", "p-half", "nlogn"])
def test_divergent_catalog_entries(entry):
    e = next(x for x in load_corpus() if x.id == entry)
    ctx = NumericContext("exact") if entry == "harmonic" else NumericContext("mp")
    q = div_witness(e.a, ctx, validate_upto=1010)
    assert q(1) == 1
    prev = None
    for n in range(1, 200):
        qa = q(n) * eval_term(e.a, n, ctx)
        assert prev is None or qa >= prev
        prev = qa
    for m in (1, 2, 3):
        v = kummer_div_step_check(e.a, q, m, TestWindow.span(1, 300), ctx, Evidence("probe", "test"))
        assert v.holds, (entry, m)
