"""Independent ground truth: sum estimates with tail bounds, Cauchy-block probes, domination search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .engine import Evidence
from .numeric import DomainError, EvaluationOverflow, NumericContext, compile_real
from .sequences import SequenceSpec, eval_term, float_reciprocals, float_terms, partial_sum, seq

__all__ = [
    "BlockResult",
    "ProbeReport",
    "SumEstimate",
    "cauchy_block_probe",
    "domination_index",
    "probe_divergence",
    "sum_estimate",
]


@dataclass
class SumEstimate:
    """Estimate of a series sum.

    When ``confidence == "certified"`` the true sum lies in ``[lower, upper]``
    and ``|value - sum| <= tail_bound``, provided the method hypothesis (checked
    on ``check_window`` indices past the horizon) persists.
    """

    value: Any
    horizon: int
    method: str
    confidence: str
    partial: Any
    tail_bound: Any = None
    lower: Any = None
    upper: Any = None
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.confidence == "certified"

    def brackets(self, x: Any) -> bool:
        return self.certified and self.lower <= x <= self.upper

    def to_dict(self, ctx: NumericContext) -> dict:
        return {
            "value": ctx.fmt(self.value),
            "horizon": self.horizon,
            "method": self.method,
            "confidence": self.confidence,
            "tail_bound": ctx.fmt(self.tail_bound),
            "lower": ctx.fmt(self.lower),
            "upper": ctx.fmt(self.upper),
            "note": self.note,
        }


def _geometric_tail(a: SequenceSpec, horizon: int, ctx: NumericContext, check: int):
    ratios = [eval_term(a, k + 1, ctx) / eval_term(a, k, ctx) for k in range(horizon + 1, horizon + check + 1)]
    if not all(r < 1 for r in ratios):
        return None, "term ratio reaches 1 past the horizon"
    if any(r2 > r1 + ctx.tol for r1, r2 in zip(ratios, ratios[1:])):
        return None, "term ratio is not non-increasing past the horizon"
    rho = ratios[0]
    first = eval_term(a, horizon + 1, ctx)
    return (first, first / (1 - rho)), f"ratio bound rho = {ctx.fmt(rho)} on [{horizon + 1}, {horizon + check + 1}]"


def _integral_tail(a: SequenceSpec, horizon: int, ctx: NumericContext, check: int):
    if ctx.exact:
        return None, "integral bound needs mp mode"
    if a.expr is None:
        return None, "integral bound needs an expression"
    terms = [eval_term(a, k, ctx) for k in range(horizon, horizon + check + 1)]
    if any(t2 > t1 for t1, t2 in zip(terms, terms[1:])):
        return None, "terms are not decreasing past the horizon"
    mp = ctx.mp
    tol = mp.mpf(10) ** (-(ctx.digits // 3))
    base = a.condensed_from
    if base is not None and base.expr is not None:
        # with t = 2^x the integral of 2^x a(2^x) over [x0, inf) is that of a(t)/ln 2 over [2^x0, inf)
        f = compile_real(base.expr, ctx)
        scale = 1 / mp.ln2
        at = lambda x: mp.mpf(2) ** x
    else:
        f = compile_real(a.expr, ctx)
        scale = mp.one
        at = mp.mpf

    def tail_from(t0):
        """Best of a direct and an exponential-substitution quadrature on [t0, inf)."""
        found = []
        for g, lo in ((f, t0), (lambda u: f(mp.exp(u)) * mp.exp(u), mp.log(t0))):
            try:
                v, err = mp.quad(g, [lo, mp.inf], error=True)
            except (ArithmeticError, ValueError, ZeroDivisionError):
                continue
            if mp.isfinite(v) and mp.isfinite(err):
                found.append((err * scale, v * scale))
        return min(found, key=lambda t: t[0]) if found else None

    def piece(x0, x1):
        return mp.quad(f, [at(x0), at(x1)]) * scale

    best = tail_from(at(horizon))
    if best is None:
        return None, "quadrature failed"
    err, tail = best
    # the error must be small against the terms themselves, not only against a
    # (possibly runaway) quadrature value
    if not tail > 0 or err > tol * min(tail, terms[0]):
        return None, f"tail integral not resolved (relative error {mp.nstr(err / abs(tail) if tail else err, 3)}); integral may diverge"
    # a convergent tail integral must be additive over a split point
    later = tail_from(at(2 * horizon))
    try:
        middle = piece(horizon, 2 * horizon)
        first_unit = piece(horizon, horizon + 1)
    except (ArithmeticError, ValueError, ZeroDivisionError):
        return None, "quadrature failed on a finite piece"
    if later is None or abs(middle + later[1] - tail) > 100 * tol * tail:
        return None, "tail integral is not additive across [H, 2H]; integral may diverge"
    if first_unit > tail:
        return None, "tail integral inconsistent with its first unit interval"
    return (tail - first_unit, tail), f"integral bound, quadrature error {mp.nstr(err, 3)}"


def sum_estimate(
    a: SequenceSpec | str,
    horizon: int,
    method: str,
    ctx: NumericContext,
    check: int = 64,
) -> SumEstimate:
    """Partial sum up to ``horizon`` plus a bracket for the tail.

    ``method`` is "geometric" (ratio bound; needs a(k+1)/a(k) < 1 and
    non-increasing), "integral" (needs decreasing terms and a convergent tail
    integral of the real extension) or "auto" (geometric, then integral).
    A violated hypothesis downgrades the estimate to ``heuristic``.
    """
    a = seq(a)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if method not in ("geometric", "integral", "auto"):
        raise ValueError(f"unknown tail method {method!r}")
    partial = partial_sum(a, horizon, ctx)
    notes = []
    methods = ["geometric", "integral"] if method == "auto" else [method]
    for name in methods:
        tail_fn = _geometric_tail if name == "geometric" else _integral_tail
        try:
            bracket, note = tail_fn(a, horizon, ctx, check)
        except EvaluationOverflow as exc:
            bracket, note = None, f"terms past the horizon overflow ({exc})"
        notes.append(f"{name}: {note}")
        if bracket is not None:
            lo, hi = bracket
            if not ctx.exact:
                # each of the `horizon` additions may round by one unit in the last place
                slack = ctx.mp.eps * horizon * abs(partial)
                lo, hi = lo - slack, hi + slack
            return SumEstimate(
                value=partial + (lo + hi) / 2,
                horizon=horizon,
                method=name,
                confidence="certified",
                partial=partial,
                tail_bound=(hi - lo) / 2,
                lower=partial + lo,
                upper=partial + hi,
                note=note,
            )
    return SumEstimate(
        value=partial,
        horizon=horizon,
        method=method,
        confidence="heuristic",
        partial=partial,
        note="; ".join(notes),
    )


# ----------------------------------------------------------------------
# Cauchy-block probe
# ----------------------------------------------------------------------


@dataclass
class BlockResult:
    found: bool
    start: int
    end: int | None
    block_sum: float | None
    searched_to: int


@dataclass
class ProbeReport:
    blocks: list[BlockResult] = field(default_factory=list)
    required: int = 5
    bound: int = 10**6

    @property
    def success(self) -> bool:
        return len(self.blocks) >= self.required and all(b.found for b in self.blocks[: self.required])

    def evidence(self) -> Evidence | None:
        if not self.success:
            return None
        spans = ",".join(f"[{b.start},{b.end}]" for b in self.blocks[: self.required])
        return Evidence("probe", f"{self.required} blocks > 1/2: {spans}")

    def to_dict(self) -> dict:
        return {
            "required": self.required,
            "bound": self.bound,
            "success": self.success,
            "blocks": [
                {"found": b.found, "start": b.start, "end": b.end, "sum": None if b.block_sum is None else round(b.block_sum, 12)}
                for b in self.blocks
            ],
        }


def _reciprocals(q: Any, ctx: NumericContext) -> tuple[Callable[[int, int], np.ndarray | None], Callable[[int], Any]]:
    """(vectorised float 1/q on [lo, hi] or None, exact n -> 1/q(n))."""
    if hasattr(q, "value") and callable(q.value):
        exact = lambda n: 1 / q.value(n)
        fast = getattr(q, "reciprocal_floats", None)
        return (fast if fast is not None else (lambda lo, hi: None)), exact
    spec = seq(q)
    return (lambda lo, hi: float_reciprocals(spec, lo, hi)), (lambda n: 1 / eval_term(spec, n, ctx))


_TIE = 1e-9


def cauchy_block_probe(q: Any, start: int, max_len: int, ctx: NumericContext) -> BlockResult:
    """Shortest block [start, n], n < start + max_len, with sum of 1/q(j) > 1/2.

    Sums are accumulated in float64; a block whose float sum lies within 1e-9
    of 1/2 is re-summed in the arithmetic of ``ctx`` before deciding.
    """
    if start < 1 or max_len < 1:
        raise ValueError("start and max_len must be >= 1")
    fast, exact = _reciprocals(q, ctx)
    last = start + max_len - 1
    total = 0.0
    lo = start
    chunk = 256
    while lo <= last:
        hi = min(last, lo + chunk - 1)
        vals = fast(lo, hi)
        if vals is None:
            vals = np.array([float(exact(j)) for j in range(lo, hi + 1)])
        # exact zeros are reciprocals that underflowed float64; they add nothing
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise DomainError("witness q is not positive", lo + int(np.argmax(~(vals >= 0))))
        run = total + np.cumsum(vals)
        hit = np.nonzero(run > 0.5 - _TIE)[0]
        for k in hit:
            n = lo + int(k)
            s = float(run[k])
            if s > 0.5 + _TIE:
                return BlockResult(True, start, n, s, n)
            precise = sum((exact(j) for j in range(start, n + 1)), ctx.num(0))
            if precise > ctx.num(1) / 2:
                return BlockResult(True, start, n, float(precise), n)
        total = float(run[-1])
        lo = hi + 1
        chunk = min(chunk * 2, 1 << 16)
    return BlockResult(False, start, None, total, last)


def probe_divergence(q: Any, ctx: NumericContext, blocks: int = 5, start: int = 1, bound: int = 10**6) -> ProbeReport:
    """Look for ``blocks`` consecutive disjoint blocks, each with sum of 1/q > 1/2, inside [start, bound]."""
    report = ProbeReport(required=blocks, bound=bound)
    s = start
    while len(report.blocks) < blocks and s <= bound:
        res = cauchy_block_probe(q, s, bound - s + 1, ctx)
        report.blocks.append(res)
        if not res.found:
            break
        s = res.end + 1
    return report


# ----------------------------------------------------------------------
# domination index
# ----------------------------------------------------------------------


def domination_index(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    m: int,
    search_bound: int,
    ctx: NumericContext,
) -> int | None:
    """Smallest r in [m, search_bound] with a_m+...+a_r >= c_m a_m+...+c_r a_r, else None.

    Scans the running sum of (1 - c_i) a_i; the first non-negative value wins.
    A float64 pre-scan skips stretches where the running sum is clearly
    negative; every candidate crossing is confirmed in ``ctx`` arithmetic.
    """
    a, c_seq = seq(a), seq(c_seq)
    if m < 1 or search_bound < m:
        raise ValueError("need 1 <= m <= search_bound")
    one = ctx.num(1)
    zero = ctx.num(0)

    def term(i: int):
        return (one - eval_term(c_seq, i, ctx)) * eval_term(a, i, ctx)

    exact_sum = zero
    exact_at = m - 1  # exact_sum covers [m, exact_at]
    float_sum = 0.0
    float_abs = 0.0
    lo = m
    chunk = 256
    while lo <= search_bound:
        hi = min(search_bound, lo + chunk - 1)
        av = float_terms(a, lo, hi)
        cv = float_terms(c_seq, lo, hi)
        if av is None or cv is None:
            # no fast path: exact scan of this chunk
            for i in range(lo, hi + 1):
                exact_sum += term(i)
                exact_at = i
                if exact_sum >= 0:
                    return i
            float_sum, float_abs = float(exact_sum), abs(float(exact_sum))
        else:
            d = (1.0 - cv) * av
            run = float_sum + np.cumsum(d)
            scale = float_abs + np.cumsum(np.abs(d))
            near = np.nonzero(run >= -1e-9 * scale)[0]
            if near.size:
                target = lo + int(near[0])
                while exact_at < target:
                    exact_at += 1
                    exact_sum += term(exact_at)
                    if exact_sum >= 0:
                        return exact_at
                # false alarm: resume float scanning after the candidate
                float_sum, float_abs = float(exact_sum), float(scale[near[0]])
                lo = target + 1
                continue
            float_sum, float_abs = float(run[-1]), float(scale[-1])
        lo = hi + 1
        chunk = min(chunk * 2, 1 << 16)
    return None
