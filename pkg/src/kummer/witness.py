"""Witness sequences q_n: user-supplied or constructed from partial sums.

Each constructed witness is ``q(n) = N(n) / a(n)`` where the numerator
``N(n) = q(n) a(n)`` is a partial-sum expression:

=================  ====================================  =========================
provenance         N(n)                                  satisfies
=================  ====================================  =========================
step-tail          S_m - (a_m + ... + a_(n+m-1))         m-step convergence, >= 1
partial-sum        a_1 + ... + a_n                       m-step divergence, <= 0
weighted-tail      S - (c_1 a_1 + ... + c_n a_n)         weighted conv, = c_(n+1)
weighted-partial   c_1 a_1 + ... + c_n a_n               weighted div, = -c_(n+1)
=================  ====================================  =========================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .expr import Node, free_of_n, parse, to_text
from .numeric import DomainError, NumericContext, compile_expr
from .oracle import SumEstimate
from .sequences import SequenceSpec, TestWindow, eval_term, float_reciprocals, float_terms, ratio, seq, sums_of

__all__ = [
    "SumConstant",
    "PrecisionExhausted",
    "WitnessError",
    "WitnessSequence",
    "conv_witness",
    "div_witness",
    "olivier_witness",
    "rational_surrogate",
    "user_witness",
    "verify_witness_identity",
    "weighted_conv_witness",
    "weighted_div_witness",
]

DEFAULT_VALIDATE = 1000


class WitnessError(DomainError):
    """A constructed witness is not positive where it must be."""


class PrecisionExhausted(WitnessError):
    """S minus a partial sum has cancelled below the working precision."""


@dataclass(frozen=True)
class SumConstant:
    value: Any
    source: str  # catalog | user | oracle | surrogate
    note: str = ""

    @classmethod
    def coerce(cls, s: Any, ctx: NumericContext) -> "SumConstant":
        if isinstance(s, SumConstant):
            return SumConstant(ctx.num(s.value), s.source, s.note)
        if isinstance(s, SumEstimate):
            note = f"{s.confidence} {s.method} estimate, horizon {s.horizon}"
            if s.certified:
                note += f", tail bound {ctx.fmt(s.tail_bound)}"
            return cls(s.value, "oracle", note)
        if isinstance(s, str):
            return cls(constant_value(s, ctx), "user", s)
        return cls(ctx.num(s), "user")

    def to_dict(self, ctx: NumericContext) -> dict:
        return {"value": ctx.fmt(self.value), "source": self.source, "note": self.note}


def constant_value(text: str, ctx: NumericContext) -> Any:
    """Value of a constant expression such as "pi^2/6" in the arithmetic of ``ctx``."""
    node = parse(text)
    if not free_of_n(node):
        raise ValueError(f"{text!r} is not a constant expression")
    return compile_expr(node, ctx)(1)


class WitnessSequence:
    """A positive auxiliary sequence q_n together with where it came from."""

    def __init__(
        self,
        provenance: str,
        ctx: NumericContext,
        *,
        expr: Node | None = None,
        numerator: Callable[[int], Any] | None = None,
        a: SequenceSpec | None = None,
        sum_constant: SumConstant | None = None,
        recurrence: str = "",
        float_numerator: Callable[[int, int], np.ndarray | None] | None = None,
    ):
        if (expr is None) == (numerator is None):
            raise ValueError("give exactly one of expr or numerator")
        self.provenance = provenance
        self.ctx = ctx
        self.expr = expr
        self.a = a
        self.sum_constant = sum_constant
        self.recurrence = recurrence
        self._numerator = numerator
        self._float_numerator = float_numerator
        self._spec = SequenceSpec(expr=expr, name=to_text(expr), check_positive=False) if expr is not None else None

    def value(self, n: int) -> Any:
        if self._spec is not None:
            return eval_term(self._spec, n, self.ctx)
        num = self._numerator(n)
        if self.sum_constant is not None and not self.ctx.exact:
            guard = self.ctx.mp.mpf(10) ** (10 - self.ctx.digits) * abs(self.sum_constant.value)
            if abs(num) <= guard:
                raise PrecisionExhausted(
                    f"S - partial sum is below the {self.ctx.digits}-digit working precision"
                    " (use exact mode or more digits)",
                    n,
                )
        return num / eval_term(self.a, n, self.ctx)

    __call__ = value

    def numerator(self, n: int) -> Any:
        """q(n) * a(n) as recorded by the construction (no rounding from the division)."""
        if self._numerator is None:
            raise AttributeError("user witnesses have no recorded numerator")
        return self._numerator(n)

    def validate(self, lo: int, hi: int) -> "WitnessSequence":
        for n in range(lo, hi + 1):
            v = self.value(n)
            if not v > 0:
                raise WitnessError(f"witness [{self.provenance}] is not positive ({self.ctx.fmt(v)})", n)
        return self

    def reciprocal_floats(self, lo: int, hi: int) -> np.ndarray | None:
        """float64 values of 1/q on [lo, hi] for fast probing, or None."""
        if self._spec is not None:
            return float_reciprocals(self._spec, lo, hi)
        if self._float_numerator is None or self.a is None:
            return None
        av = float_terms(self.a, lo, hi, underflow_ok=True)
        nv = self._float_numerator(lo, hi)
        if av is None or nv is None or np.any(nv <= 0) or not np.all(np.isfinite(nv)):
            return None
        return av / nv

    def to_dict(self, window: TestWindow | None = None) -> dict:
        out: dict[str, Any] = {"provenance": self.provenance}
        if self.expr is not None:
            out["expr"] = to_text(self.expr)
        if self.recurrence:
            out["recurrence"] = self.recurrence
        if self.sum_constant is not None:
            out["sum_constant"] = self.sum_constant.to_dict(self.ctx)
        if window is not None:
            idx = list(window.indices())
            sample = idx[:5] + [n for n in idx[-2:] if n not in idx[:5]]
            out["sample"] = {str(n): self.ctx.fmt(self.value(n)) for n in sample}
        return out


def _prefix_floats(term: Callable[[int], Any], float_vals: Callable[[int, int], np.ndarray | None]):
    """float64 prefix sums on [lo, hi].

    Consecutive calls continue the running float sum; a jump re-seeds it from
    the exact prefix at lo - 1.
    """
    state = {"end": 0, "total": 0.0}

    def run(lo: int, hi: int):
        vals = float_vals(lo, hi)
        if vals is None:
            return None
        if lo == 1:
            base = 0.0
        elif lo == state["end"] + 1:
            base = state["total"]
        else:
            base = float(term(lo - 1))
        out = base + np.cumsum(vals)
        state["end"], state["total"] = hi, float(out[-1])
        return out

    return run


def user_witness(q: str | Node | SequenceSpec, ctx: NumericContext) -> WitnessSequence:
    if isinstance(q, str):
        q = seq(q).expr
    elif isinstance(q, SequenceSpec):
        if q.expr is None:
            raise ValueError("user witnesses must be expressions")
        q = q.expr
    return WitnessSequence("user", ctx, expr=q)


def div_witness(a: SequenceSpec | str, ctx: NumericContext, validate_upto: int = DEFAULT_VALIDATE) -> WitnessSequence:
    """q(n) = (a_1 + ... + a_n) / a_n."""
    a = seq(a)
    sums = sums_of(a, ctx)
    w = WitnessSequence(
        "partial-sum",
        ctx,
        numerator=sums,
        a=a,
        recurrence="q_n*a_n = a_1 + ... + a_n",
        float_numerator=_prefix_floats(sums, lambda lo, hi: float_terms(a, lo, hi, underflow_ok=True)),
    )
    return w.validate(1, validate_upto)


def conv_witness(
    a: SequenceSpec | str,
    m: int,
    S_m: Any,
    ctx: NumericContext,
    validate_upto: int = DEFAULT_VALIDATE,
) -> WitnessSequence:
    """q(n) = (S_m - (a_m + ... + a_(n+m-1))) / a_n, where S_m = a_m + a_(m+1) + ...

    ``validate_upto`` must cover the indices a caller will query (window end + m).
    """
    a = seq(a)
    if m < 1:
        raise ValueError("step m must be >= 1")
    sc = SumConstant.coerce(S_m, ctx)
    sums = sums_of(a, ctx)
    head = sums(m - 1)
    w = WitnessSequence(
        "step-tail",
        ctx,
        numerator=lambda n: sc.value - (sums(n + m - 1) - head),
        a=a,
        sum_constant=sc,
        recurrence=f"q_n*a_n = S_{m} - (a_{m} + ... + a_(n+{m - 1}))",
    )
    return w.validate(1, validate_upto)


def weighted_conv_witness(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    S: Any,
    ctx: NumericContext,
    validate_upto: int = DEFAULT_VALIDATE,
) -> WitnessSequence:
    """q(n) = (S - (c_1 a_1 + ... + c_n a_n)) / a_n with S the sum of c_n a_n."""
    a, c_seq = seq(a), seq(c_seq)
    sc = SumConstant.coerce(S, ctx)
    sums = sums_of(c_seq.times(a) if a.expr is not None and c_seq.expr is not None else _product(a, c_seq), ctx)
    w = WitnessSequence(
        "weighted-tail",
        ctx,
        numerator=lambda n: sc.value - sums(n),
        a=a,
        sum_constant=sc,
        recurrence="q_n*a_n = S - (c_1*a_1 + ... + c_n*a_n)",
    )
    return w.validate(1, validate_upto)


def weighted_div_witness(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    ctx: NumericContext,
    validate_upto: int = DEFAULT_VALIDATE,
) -> WitnessSequence:
    """q(n) = (c_1 a_1 + ... + c_n a_n) / a_n."""
    a, c_seq = seq(a), seq(c_seq)
    ca = c_seq.times(a) if a.expr is not None and c_seq.expr is not None else _product(a, c_seq)
    sums = sums_of(ca, ctx)
    w = WitnessSequence(
        "weighted-partial",
        ctx,
        numerator=sums,
        a=a,
        recurrence="q_n*a_n = c_1*a_1 + ... + c_n*a_n",
        float_numerator=_prefix_floats(sums, lambda lo, hi: float_terms(ca, lo, hi, underflow_ok=True)),
    )
    return w.validate(1, validate_upto)


def _product(a: SequenceSpec, c: SequenceSpec) -> SequenceSpec:
    if a.table is None or c.table is None:
        raise ValueError("mixing tables and expressions is not supported for weighted sums")
    return SequenceSpec(table=tuple(x * y for x, y in zip(a.table, c.table)), name=f"({c.name})*({a.name})")


def olivier_witness(a: SequenceSpec | str, S: Any, ctx: NumericContext, validate_upto: int = DEFAULT_VALIDATE) -> WitnessSequence:
    """Witness for the Olivier-type criterion: the weighted-tail construction for the split
    a_n = (1/n) * (n a_n), i.e. q(n) = n (S - (a_1 + ... + a_n))."""
    a = seq(a)
    if a.expr is None:
        raise ValueError("olivier_witness needs an expression")
    recip = SequenceSpec.from_text("1/n")
    weight = SequenceSpec(expr=Node("mul", (Node("n"), a.expr)), name=f"n*({a.name})")
    return weighted_conv_witness(recip, weight, S, ctx, validate_upto)


def rational_surrogate(terms: SequenceSpec | str, horizon: int, ctx: NumericContext, exact_sum: str = "") -> SumConstant:
    """Exact-mode stand-in for an irrational sum: the partial sum through ``horizon``.

    A witness built on it is positive on [1, horizon - 1]; identities in which the
    sum constant cancels are unaffected.
    """
    terms = seq(terms)
    value = sums_of(terms, ctx)(horizon)
    note = f"partial sum through n = {horizon}"
    if exact_sum:
        note = f"exact sum {exact_sum} is irrational; {note}"
    return SumConstant(value, "surrogate", note)


def verify_witness_identity(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    q: Any,
    w: TestWindow,
    ctx: NumericContext,
) -> Any:
    """max over the window of |q(n) a(n)/a(n+1) - q(n+1) - target(n)|.

    The target is c(n+1), except for the weighted-partial construction whose identity
    is q(n) a(n)/a(n+1) - q(n+1) = -c(n+1).
    """
    a, c_seq = seq(a), seq(c_seq)
    qf = q.value if isinstance(q, WitnessSequence) else user_witness(q, ctx).value
    sign = -1 if getattr(q, "provenance", "") == "weighted-partial" else 1
    worst = ctx.num(0)
    for n in w.indices():
        r = abs(qf(n) * ratio(a, n, 1, ctx) - qf(n + 1) - sign * eval_term(c_seq, n + 1, ctx))
        if r > worst:
            worst = r
    return worst
