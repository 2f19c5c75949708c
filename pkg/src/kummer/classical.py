"""Raabe, Bertrand and Gauss tests for weighted series, the condensation
characterization and the Olivier-type criterion.

Each test checks its own ratio inequality on the window and then re-derives
the verdict through the weighted Kummer checks with the auxiliary sequence
the reduction uses (q_n = n for Raabe and Gauss, q_n = n ln n for Bertrand).
A test only holds when both agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .engine import (
    FAILS,
    Evidence,
    WindowVerdict,
    _positive_q,
    _q_eval,
    _q_name,
    scan_inequality,
    weighted_conv_check,
    weighted_div_check,
)
from .expr import Node
from .numeric import MAX_INDEX, DomainError, NumericContext
from .sequences import SequenceSpec, TestWindow, eval_term, ratio, seq

__all__ = [
    "BertrandParams",
    "GaussParams",
    "OlivierReport",
    "PreconditionError",
    "RaabeSeries",
    "bertrand",
    "c_over_n_evidence",
    "condensation_check",
    "gauss",
    "olivier_check",
    "raabe",
]


class PreconditionError(ValueError):
    """The parameters of a test violate its stated hypotheses."""


def _tail(values: list[Any]) -> list[Any]:
    return values[-max(1, len(values) // 4) :]


def _theta(spec: SequenceSpec | str | int) -> SequenceSpec:
    return seq(spec, check_positive=False)


def c_over_n_evidence(c_seq: SequenceSpec | str) -> Evidence | None:
    """Catalog evidence that sum c_n/n diverges when c is a positive constant, else None."""
    c_seq = seq(c_seq)
    if c_seq.is_constant:
        return Evidence("catalog", f"harmonic, scaled by the constant {c_seq.name}")
    return None


# ----------------------------------------------------------------------
# Raabe
# ----------------------------------------------------------------------


@dataclass
class RaabeSeries:
    """R_minus(n) = n a_n/a_(n+1) - (n+1) - c_(n+1) and R_plus(n), the same with + c_(n+1)."""

    a: SequenceSpec
    c: SequenceSpec
    ctx: NumericContext

    def core(self, n: int) -> Any:
        return n * ratio(self.a, n, 1, self.ctx) - (n + 1)

    def minus(self, n: int) -> Any:
        return self.core(n) - eval_term(self.c, n + 1, self.ctx)

    def plus(self, n: int) -> Any:
        return self.core(n) + eval_term(self.c, n + 1, self.ctx)

    def window_stats(self, w: TestWindow) -> dict[str, Any]:
        """Min/max of both sequences and liminf/limsup estimated on the last quartile."""
        lo = [self.minus(n) for n in w.indices()]
        hi = [self.plus(n) for n in w.indices()]
        return {
            "R_minus_min": min(lo),
            "R_minus_max": max(lo),
            "R_plus_min": min(hi),
            "R_plus_max": max(hi),
            "liminf_R_minus_estimate": min(_tail(lo)),
            "limsup_R_plus_estimate": max(_tail(hi)),
        }


def raabe(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    w: TestWindow,
    ctx: NumericContext,
    c_over_n_divergence: Evidence | None = None,
) -> WindowVerdict:
    """Generalized Raabe test.

    Convergence when R_minus >= 0 on the window, which is the weighted
    convergence inequality with q_n = n.  Divergence when R_plus <= 0 on the
    window and sum c_n/n is known to diverge.  Anything else is inconclusive.
    """
    a, c_seq = seq(a), seq(c_seq)
    stats = RaabeSeries(a, c_seq, ctx).window_stats(w)
    conv = weighted_conv_check(a, c_seq, "n", w, ctx)
    if conv.holds:
        verdict = conv
    else:
        div = weighted_div_check(a, c_seq, "n", w, ctx, Evidence.catalog("harmonic"), c_over_n_divergence)
        if div.holds and c_over_n_divergence is not None:
            verdict = div
        else:
            verdict = conv
            verdict.status = FAILS
            verdict.conclusion = "inconclusive"
            reason = "R_minus < 0 somewhere on the window"
            if div.holds:
                reason += "; R_plus <= 0 holds but no evidence that sum c_n/n diverges"
            else:
                reason += f"; R_plus > 0 at n = {div.failing_index}"
            verdict.message = reason
    verdict.test = "raabe"
    verdict.details.update(stats)
    verdict.details["reduction"] = "q_n = n"
    return verdict


# ----------------------------------------------------------------------
# Bertrand
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BertrandParams:
    """theta_n and the constant theta bounding it (from below for convergence, above for divergence)."""

    theta_n: SequenceSpec
    theta: Any = None

    @classmethod
    def of(cls, theta_n: SequenceSpec | str | int, theta: Any = None) -> "BertrandParams":
        return cls(_theta(theta_n), theta)


_N_LN_N = Node("mul", (Node("n"), Node("ln", (Node("n"),))))


def _check_side(side: str) -> None:
    if side not in ("conv", "div"):
        raise ValueError("side must be 'conv' or 'div'")


def bertrand(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    p: BertrandParams,
    side: str,
    w: TestWindow,
    ctx: NumericContext,
    cnlogn_divergence: Evidence | None = None,
) -> WindowVerdict:
    """Generalized Bertrand test (needs ln, so mp mode).

    conv: a_n/a_(n+1) > 1 + 1/n + (theta_n + c_(n+1))/(n ln n) with theta_n >= theta > 1.
    div:  a_n/a_(n+1) <= 1 + 1/n + (theta_n - c_(n+1))/(n ln n) with theta_n <= theta < 1,
          and sum c_n/(n ln n) divergent.

    The strict inequality passes only with slack greater than the tolerance.
    The window is clamped to start at 2.
    """
    _check_side(side)
    a, c_seq = seq(a), seq(c_seq)
    if ctx.exact:
        raise PreconditionError("the Bertrand test involves ln(n); use mp mode")
    if side == "div" and cnlogn_divergence is None:
        raise PreconditionError("the divergence side needs evidence that sum c_n/(n ln n) diverges")
    notes = []
    if w.start < 2:
        notes.append(f"window start moved from {w.start} to 2 (ln 1 = 0)")
        w = TestWindow(2, w.end - 2) if w.end > 2 else TestWindow(2, 1)
    theta_vals = [eval_term(p.theta_n, n, ctx) for n in w.indices()]
    theta = ctx.num(p.theta) if p.theta is not None else (min(theta_vals) if side == "conv" else max(theta_vals))
    if side == "conv" and not theta > 1:
        raise PreconditionError(f"theta bound must satisfy theta > 1 on the convergence side, got {ctx.fmt(theta)}")
    if side == "div" and not theta < 1:
        raise PreconditionError(f"theta bound must satisfy theta < 1 on the divergence side, got {ctx.fmt(theta)}")

    ln = ctx.mp.log
    sign = 1 if side == "conv" else -1

    def slack(n: int) -> Any:
        rhs = 1 + ctx.num(1) / n + (eval_term(p.theta_n, n, ctx) + sign * eval_term(c_seq, n + 1, ctx)) / (n * ln(n))
        return ratio(a, n, 1, ctx) - rhs

    def theta_ok(n: int, v: Any) -> str | None:
        t = eval_term(p.theta_n, n, ctx)
        if side == "conv" and not ctx.ge(t, theta):
            return "theta_n < theta"
        if side == "div" and not ctx.le(t, theta):
            return "theta_n > theta"
        if side == "conv" and not v > ctx.tol:
            return "strict inequality without slack"
        return None

    zero = ctx.num(0)
    if side == "conv":
        verdict = scan_inequality(
            "bertrand", w, slack, lambda n: zero, "ge", ctx,
            inequality="a_n/a_(n+1) > 1 + 1/n + (theta_n + c_(n+1))/(n ln n)", extra=theta_ok,
        )
        reduced = weighted_conv_check(a, c_seq, SequenceSpec(expr=_N_LN_N, name="n*ln(n)"), w, ctx)
    else:
        verdict = scan_inequality(
            "bertrand", w, slack, lambda n: zero, "le", ctx,
            inequality="a_n/a_(n+1) <= 1 + 1/n + (theta_n - c_(n+1))/(n ln n)", extra=theta_ok,
        )
        evidence = Evidence("catalog", "nlogn, the same series with the index shifted by one")
        reduced = weighted_div_check(
            a, c_seq, SequenceSpec(expr=_N_LN_N, name="n*ln(n)"), w, ctx, evidence, cnlogn_divergence
        )
    verdict.details.update({
        "side": side,
        "theta": theta,
        "theta_n_min": min(theta_vals),
        "theta_n_max": max(theta_vals),
        "reduction": "q_n = n ln n",
        "reduced_status": reduced.status,
        "reduced_min_margin": reduced.min_margin,
        "reduced_max_margin": reduced.max_margin,
    })
    if reduced.failing_index is not None:
        verdict.details["reduced_failing_index"] = reduced.failing_index
    verdict.hypotheses = list(reduced.hypotheses)
    verdict.hypotheses.insert(0, f"theta_n {'>=' if side == 'conv' else '<='} {ctx.fmt(theta)} on window")
    if notes:
        verdict.details["notes"] = notes
    _merge_reduction(verdict, reduced)
    return verdict


def _merge_reduction(verdict: WindowVerdict, reduced: WindowVerdict) -> None:
    """The verdict holds only if the reduced Kummer check holds too; copy its conclusion."""
    if verdict.holds and not reduced.holds:
        verdict.status = FAILS
        verdict.failing_index = reduced.failing_index
        verdict.message = "ratio inequality holds but the reduced Kummer inequality fails"
    if verdict.holds:
        verdict.claim = reduced.claim
        verdict.conclusion = reduced.conclusion
        verdict.consequences = list(reduced.consequences)


# ----------------------------------------------------------------------
# Gauss
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GaussParams:
    mu: Any
    gamma: Any
    theta_n: SequenceSpec

    @classmethod
    def of(cls, mu: Any, gamma: Any, theta_n: SequenceSpec | str | int) -> "GaussParams":
        return cls(mu, gamma, _theta(theta_n))


def gauss(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    p: GaussParams,
    side: str,
    w: TestWindow,
    ctx: NumericContext,
    c_over_n_divergence: Evidence | None = None,
) -> WindowVerdict:
    """Generalized Gauss test.

    conv: a_n/a_(n+1) >= 1 + c_(n+1)/n + mu/n + theta_n/n^gamma with theta_n >= (1-mu) n^(gamma-1).
    div:  a_n/a_(n+1) <= 1 - c_(n+1)/n + mu/n + theta_n/n^gamma with theta_n <= (1-mu) n^(gamma-1),
          and sum c_n/n divergent.

    theta_n must look bounded on the window: the largest |theta_n| in the last
    quartile may not exceed twice the largest in the first quartile plus one.
    """
    _check_side(side)
    a, c_seq = seq(a), seq(c_seq)
    mu, gamma = ctx.num(p.mu), ctx.num(p.gamma)
    if gamma < 1:
        raise PreconditionError(f"gamma must be >= 1, got {ctx.fmt(gamma)}")
    if side == "div" and c_over_n_divergence is None:
        raise PreconditionError("the divergence side needs evidence that sum c_n/n diverges")

    def npow(n: int, e: Any) -> Any:
        if ctx.exact:
            if e.denominator != 1:
                raise PreconditionError("exact mode needs an integer gamma")
            return ctx.num(n) ** e.numerator
        return ctx.mp.power(n, e)

    thetas = [eval_term(p.theta_n, n, ctx) for n in w.indices()]
    abs_theta = [abs(t) for t in thetas]
    k = max(1, len(abs_theta) // 4)
    bound = max(abs_theta)
    if max(abs_theta[-k:]) > 2 * max(abs_theta[:k]) + 1:
        raise DomainError(f"theta_n looks unbounded on the window (max |theta_n| = {ctx.fmt(bound)})", w.end)

    sign = 1 if side == "conv" else -1

    def slack(n: int) -> Any:
        rhs = 1 + (sign * eval_term(c_seq, n + 1, ctx) + mu) / n + eval_term(p.theta_n, n, ctx) / npow(n, gamma)
        return ratio(a, n, 1, ctx) - rhs

    def theta_ok(n: int, _v: Any) -> str | None:
        t = eval_term(p.theta_n, n, ctx)
        limit = (1 - mu) * npow(n, gamma - 1)
        if side == "conv" and not ctx.ge(t, limit):
            return "theta_n < (1-mu) n^(gamma-1)"
        if side == "div" and not ctx.le(t, limit):
            return "theta_n > (1-mu) n^(gamma-1)"
        return None

    zero = ctx.num(0)
    if side == "conv":
        verdict = scan_inequality(
            "gauss", w, slack, lambda n: zero, "ge", ctx,
            inequality="a_n/a_(n+1) >= 1 + c_(n+1)/n + mu/n + theta_n/n^gamma", extra=theta_ok,
        )
        reduced = weighted_conv_check(a, c_seq, "n", w, ctx)
    else:
        verdict = scan_inequality(
            "gauss", w, slack, lambda n: zero, "le", ctx,
            inequality="a_n/a_(n+1) <= 1 - c_(n+1)/n + mu/n + theta_n/n^gamma", extra=theta_ok,
        )
        reduced = weighted_div_check(a, c_seq, "n", w, ctx, Evidence.catalog("harmonic"), c_over_n_divergence)
    verdict.details.update({
        "side": side,
        "mu": mu,
        "gamma": gamma,
        "theta_bound_observed": bound,
        "reduction": "q_n = n",
        "reduced_status": reduced.status,
        "reduced_min_margin": reduced.min_margin,
        "reduced_max_margin": reduced.max_margin,
    })
    verdict.hypotheses = [f"|theta_n| <= {ctx.fmt(bound)} on window (observed)"] + list(reduced.hypotheses)
    _merge_reduction(verdict, reduced)
    return verdict


# ----------------------------------------------------------------------
# condensation
# ----------------------------------------------------------------------


def _monotone_samples(top: int) -> list[int]:
    dense = range(1, min(1024, top) + 1)
    powers = [1 << k for k in range(top.bit_length()) if (1 << k) <= top]
    return sorted(set(dense) | set(powers) | {p + 1 for p in powers if p + 1 <= top})


def condensation_check(a: SequenceSpec | str, q: Any, w: TestWindow, ctx: NumericContext) -> WindowVerdict:
    """q(n) - 2 q(n+1) >= 2 a(2^(n+1)) on the window, for decreasing a.

    Monotonicity of a is checked on every index up to 1024 and on the powers
    of two (and their successors) the inequality touches.
    """
    a = seq(a)
    if w.end + 2 >= 63 or (1 << (w.end + 2)) > MAX_INDEX:
        raise PreconditionError(f"2^(n+1) overflows the index range for n = {w.end + 1}")
    top = 1 << (w.end + 2)
    samples = _monotone_samples(top)
    prev = None
    for n in samples:
        v = eval_term(a, n, ctx)
        if prev is not None and v > prev[1]:
            raise DomainError("sequence is not decreasing", n)
        prev = (n, v)
    qf = _positive_q(_q_eval(q, ctx))
    verdict = scan_inequality(
        "condensation",
        w,
        lambda n: qf(n) - 2 * qf(n + 1),
        lambda n: 2 * eval_term(a, 1 << (n + 1), ctx),
        "ge",
        ctx,
        inequality="q_n - 2 q_(n+1) >= 2 a_(2^(n+1))",
    )
    verdict.details.update({
        "q": _q_name(q),
        "monotonicity": f"decreasing on {len(samples)} sampled indices up to {top}",
        "violations": sum(1 for _n, v, b in verdict.trace if not ctx.ge(v, b)),
    })
    verdict.hypotheses = ["a_n decreasing (sampled)", "q_n > 0 on window", f"verified on window {w} only"]
    if verdict.holds:
        verdict.claim = "Σa_n convergence certified on window"
        verdict.conclusion = "converges"
    return verdict


# ----------------------------------------------------------------------
# Olivier
# ----------------------------------------------------------------------


@dataclass
class OlivierReport:
    verdict: WindowVerdict
    drift: list[tuple[int, Any]] = field(repr=False)
    tail_max_drift: Any
    tail_max_n_a: Any
    final_n_a: Any
    delta: Any
    supported: bool

    def to_dict(self) -> dict:
        fmt = self.verdict.ctx.fmt
        return {
            "verdict": self.verdict.to_dict(),
            "tail_max_abs_drift": fmt(self.tail_max_drift),
            "tail_max_n_a": fmt(self.tail_max_n_a),
            "final_n_a": fmt(self.final_n_a),
            "delta": fmt(self.delta),
            "supported": self.supported,
        }


def olivier_check(
    a: SequenceSpec | str,
    q: Any,
    w: TestWindow,
    ctx: NumericContext,
    delta: Any = "0.01",
    tail_start: int | None = None,
) -> OlivierReport:
    """q(n)(n+1)/n - q(n+1) >= (n+1) a(n+1) on the window, with the drift
    d_n = q(n)(n+1)/n - q(n+1) and tail statistics.

    The tail is the window restricted to n >= ``tail_start``; by default it is
    the last quartile of the window.

    Where the inequality holds, 0 < (n+1) a(n+1) <= d_n, so a small tail drift
    bounds n a_n on the window.  ``supported`` reports exactly that window
    bound and nothing about limits.
    """
    a = seq(a)
    qf = _positive_q(_q_eval(q, ctx))
    verdict = scan_inequality(
        "olivier",
        w,
        lambda n: qf(n) * (n + 1) / n - qf(n + 1),
        lambda n: (n + 1) * eval_term(a, n + 1, ctx),
        "ge",
        ctx,
        inequality="q_n (n+1)/n - q_(n+1) >= (n+1) a_(n+1)",
    )
    drift = [(n, v) for n, v, _b in verdict.trace]
    n_a = [n * eval_term(a, n, ctx) for n in w.indices()]
    if tail_start is None:
        tail_drift = max(abs(v) for _n, v in _tail(drift))
        tail_na = max(_tail(n_a))
    else:
        if not w.start <= tail_start <= w.end:
            raise ValueError(f"tail start {tail_start} lies outside the window {w}")
        tail_drift = max(abs(v) for n, v in drift if n >= tail_start)
        tail_na = max(v for n, v in zip(w.indices(), n_a) if n >= tail_start)
    delta = ctx.num(delta)
    supported = verdict.holds and tail_drift <= delta + ctx.tol
    verdict.details.update({"q": _q_name(q), "tail_max_abs_drift": tail_drift, "tail_max_n_a": tail_na})
    verdict.hypotheses = ["q_n > 0 on window", f"verified on window {w} only"]
    if verdict.holds:
        verdict.claim = "Σa_n convergence certified on window"
        verdict.conclusion = "converges"
    if supported:
        verdict.consequences = [f"Olivier conclusion supported: n·a_n <= d_(n-1) <= {ctx.fmt(tail_drift)} on the window tail"]
    return OlivierReport(
        verdict=verdict,
        drift=drift,
        tail_max_drift=tail_drift,
        tail_max_n_a=tail_na,
        final_n_a=n_a[-1],
        delta=delta,
        supported=supported,
    )
