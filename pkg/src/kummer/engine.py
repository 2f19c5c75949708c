"""Window checks for the Kummer-type inequalities.

Every check evaluates an "eventually" inequality at each index of a finite
tail window and returns a :class:`WindowVerdict`.  A verdict that holds is a
certificate on that window only; the margin trend is reported so callers can
judge how safe extrapolation is.

Margins are the values of the left-hand side expression, e.g.
``q(n) * a(n)/a(n+m) - q(n+m)``; the bound it is compared against is kept
alongside in the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .numeric import DomainError, NumericContext
from .sequences import SequenceSpec, TestWindow, eval_term, ratio, seq

__all__ = [
    "Evidence",
    "WindowVerdict",
    "kummer_div_step_check",
    "kummer_step_check",
    "scan_inequality",
    "weighted_conv_check",
    "weighted_div_check",
]

HOLDS = "holds-on-window"
FAILS = "fails-at-index"
ERROR = "error"


@dataclass(frozen=True)
class Evidence:
    """Why a series that cannot be checked on a window is taken to diverge."""

    kind: str  # catalog | asserted | probe
    detail: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("catalog", "asserted", "probe"):
            raise ValueError(f"evidence kind must be catalog, asserted or probe, not {self.kind!r}")

    @classmethod
    def catalog(cls, entry_id: str) -> "Evidence":
        from .sequences import catalog_label

        if catalog_label(entry_id) != "diverges":
            raise ValueError(f"catalog entry {entry_id!r} is not labeled divergent")
        return cls("catalog", entry_id)

    def describe(self, series: str) -> str:
        suffix = f"({self.detail})" if self.detail else ""
        return f"{series} divergent: {self.kind}{suffix}"


@dataclass
class WindowVerdict:
    test: str
    status: str
    window: TestWindow
    ctx: NumericContext
    inequality: str = ""
    failing_index: int | None = None
    min_margin: Any = None
    max_margin: Any = None
    trend: Any = None
    hypotheses: list[str] = field(default_factory=list)
    claim: str | None = None
    conclusion: str | None = None
    consequences: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    message: str | None = None
    trace: list[tuple[int, Any, Any]] = field(default_factory=list, repr=False)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def to_dict(self) -> dict:
        fmt = self.ctx.fmt
        out = {
            "test": self.test,
            "status": self.status,
            "window": [self.window.start, self.window.end],
            "inequality": self.inequality,
            "min_margin": fmt(self.min_margin),
            "max_margin": fmt(self.max_margin),
            "trend": fmt(self.trend),
            "hypotheses": list(self.hypotheses),
            "conclusion": self.conclusion,
        }
        if self.failing_index is not None:
            out["failing_index"] = self.failing_index
        if self.claim:
            out["claim"] = self.claim
        if self.consequences:
            out["consequences"] = list(self.consequences)
        if self.details:
            out["details"] = {k: (fmt(v) if _is_number(v) else v) for k, v in self.details.items()}
        if self.message:
            out["message"] = self.message
        return out

    def trace_rows(self) -> list[tuple[int, str, str]]:
        fmt = self.ctx.fmt
        return [(n, fmt(v), fmt(b)) for n, v, b in self.trace]


def _is_number(v: Any) -> bool:
    return not isinstance(v, (str, bool, list, dict, type(None), int))


def _quartile_mins(values: list[Any]) -> tuple[Any, Any]:
    k = max(1, len(values) // 4)
    return min(values[:k]), min(values[-k:])


def scan_inequality(
    test: str,
    window: TestWindow,
    lhs: Callable[[int], Any],
    bound: Callable[[int], Any],
    sense: str,
    ctx: NumericContext,
    *,
    inequality: str = "",
    extra: Callable[[int, Any], str | None] | None = None,
    indices: Iterable[int] | None = None,
) -> WindowVerdict:
    """Evaluate ``lhs(n) >= bound(n)`` (sense "ge") or ``<=`` (sense "le") on the window.

    ``extra(n, value)`` may return a reason string to flag an auxiliary
    condition failing at ``n``.  The scan always covers the whole window so
    the margin statistics describe all of it.
    """
    if sense not in ("ge", "le"):
        raise ValueError("sense must be 'ge' or 'le'")
    ok = ctx.ge if sense == "ge" else ctx.le
    values = []
    trace = []
    failing = None
    reasons: dict[str, int] = {}
    for n in indices if indices is not None else window.indices():
        v = lhs(n)
        b = bound(n)
        values.append(v)
        trace.append((n, v, b))
        if not ok(v, b):
            reasons.setdefault("inequality", n)
            failing = n if failing is None else failing
        if extra is not None:
            why = extra(n, v)
            if why:
                reasons.setdefault(why, n)
                failing = n if failing is None else failing
    first_q, last_q = _quartile_mins(values)
    verdict = WindowVerdict(
        test=test,
        status=HOLDS if failing is None else FAILS,
        window=window,
        ctx=ctx,
        inequality=inequality,
        failing_index=failing,
        min_margin=min(values),
        max_margin=max(values),
        trend=last_q - first_q,
        trace=trace,
    )
    if reasons:
        ordered = dict(sorted(reasons.items(), key=lambda kv: kv[1]))
        verdict.details["first_violation"] = ordered
        verdict.message = "; ".join(f"{why} violated first at n = {n}" for why, n in ordered.items())
    return verdict


def _q_eval(q: Any, ctx: NumericContext) -> Callable[[int], Any]:
    """Callable n -> q(n) for a user expression, a SequenceSpec or a constructed witness."""
    if hasattr(q, "value") and callable(q.value):
        if getattr(q, "ctx", ctx) != ctx:
            raise ValueError("witness was built in a different numeric context")
        return q.value
    spec = seq(q)
    return lambda n: eval_term(spec, n, ctx)


def _q_name(q: Any) -> str:
    if hasattr(q, "provenance"):
        return f"witness[{q.provenance}]"
    return seq(q).name


def _positive_q(qf: Callable[[int], Any]) -> Callable[[int], Any]:
    def checked(n: int) -> Any:
        v = qf(n)
        if not v > 0:
            raise DomainError(f"witness q is not positive ({v})", n)
        return v

    return checked


def _window_note(w: TestWindow) -> str:
    return f"inequality verified on window {w} only (not a proof for all n)"


def kummer_step_check(
    a: SequenceSpec | str,
    q: Any,
    m: int,
    c: Any,
    w: TestWindow,
    ctx: NumericContext,
) -> WindowVerdict:
    """m-step convergence inequality q(n) a(n)/a(n+m) - q(n+m) >= c on the window."""
    a = seq(a)
    c = ctx.num(c)
    if not c > 0:
        raise ValueError("margin constant c must be positive")
    if m < 1:
        raise ValueError("step m must be >= 1")
    w.check_step(m)
    qf = _positive_q(_q_eval(q, ctx))
    verdict = scan_inequality(
        "kummer-step",
        w,
        lambda n: qf(n) * ratio(a, n, m, ctx) - qf(n + m),
        lambda n: c,
        "ge",
        ctx,
        inequality=f"q_n*a_n/a_(n+{m}) - q_(n+{m}) >= c",
    )
    verdict.details.update({"m": m, "c": c, "q": _q_name(q)})
    verdict.hypotheses = ["q_n > 0 on window", _window_note(w)]
    if verdict.holds:
        verdict.claim = "Σa_n convergence certified on window"
        verdict.conclusion = "converges"
    return verdict


def kummer_div_step_check(
    a: SequenceSpec | str,
    q: Any,
    m: int,
    w: TestWindow,
    ctx: NumericContext,
    q_recip_divergence: Evidence | None,
    c_floor: Any = None,
) -> WindowVerdict:
    """m-step divergence conditions: the Kummer expression is <= 0 and q(n) a(n) >= c_floor > 0.

    ``c_floor`` defaults to q(N) a(N) at the window start, the analogue of the
    bound a_n q_n >= a_1 q_1 used for the constructed witness.
    """
    if q_recip_divergence is None:
        raise ValueError("divergence of sum 1/q_n must be supported by evidence (catalog, asserted or probe)")
    a = seq(a)
    if m < 1:
        raise ValueError("step m must be >= 1")
    w.check_step(m)
    qf = _positive_q(_q_eval(q, ctx))
    floor = ctx.num(c_floor) if c_floor is not None else qf(w.start) * eval_term(a, w.start, ctx)
    if not floor > 0:
        raise ValueError("q_n*a_n floor must be positive")
    qa_min = [None]

    def floor_check(n: int, _v: Any) -> str | None:
        qa = qf(n) * eval_term(a, n, ctx)
        qa_min[0] = qa if qa_min[0] is None or qa < qa_min[0] else qa_min[0]
        if not ctx.ge(qa, floor):
            return "q_n*a_n below floor"
        return None

    zero = ctx.num(0)
    verdict = scan_inequality(
        "kummer-div-step",
        w,
        lambda n: qf(n) * ratio(a, n, m, ctx) - qf(n + m),
        lambda n: zero,
        "le",
        ctx,
        inequality=f"q_n*a_n/a_(n+{m}) - q_(n+{m}) <= 0 and q_n*a_n >= c_floor",
        extra=floor_check,
    )
    verdict.details.update({"m": m, "c_floor": floor, "min_q_times_a": qa_min[0], "q": _q_name(q)})
    verdict.hypotheses = [q_recip_divergence.describe("Σ1/q_n"), "q_n > 0 on window", _window_note(w)]
    if verdict.holds:
        verdict.claim = "Σa_n divergence certified on window, conditional on Σ1/q_n divergence evidence"
        verdict.conclusion = "diverges"
    return verdict


def weighted_conv_check(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    q: Any,
    w: TestWindow,
    ctx: NumericContext,
) -> WindowVerdict:
    """Weighted convergence inequality q(n) a(n)/a(n+1) - q(n+1) >= c(n+1)."""
    a, c_seq = seq(a), seq(c_seq)
    qf = _positive_q(_q_eval(q, ctx))
    verdict = scan_inequality(
        "weighted-conv",
        w,
        lambda n: qf(n) * ratio(a, n, 1, ctx) - qf(n + 1),
        lambda n: eval_term(c_seq, n + 1, ctx),
        "ge",
        ctx,
        inequality="q_n*a_n/a_(n+1) - q_(n+1) >= c_(n+1)",
    )
    verdict.details["q"] = _q_name(q)
    verdict.hypotheses = ["q_n > 0 on window", "c_n > 0", _window_note(w)]
    if verdict.holds:
        verdict.claim = "Σc_n·a_n convergence certified on window"
        verdict.conclusion = "converges"
    return verdict


WEIGHTED_DIV_CONSEQUENCES = (
    "Σa_n diverges",
    "Σ1/c_n diverges",
    "Σ(q_n−c_n)·a_n diverges",
    "Σq_n·a_n diverges",
)
CA_DIVERGES = "Σc_n·a_n diverges"


def weighted_div_check(
    a: SequenceSpec | str,
    c_seq: SequenceSpec | str,
    q: Any,
    w: TestWindow,
    ctx: NumericContext,
    q_recip_divergence: Evidence | None,
    cq_ratio_divergence: Evidence | None = None,
) -> WindowVerdict:
    """Weighted divergence inequality q(n) a(n)/a(n+1) - q(n+1) <= -c(n+1).

    Also checks, index by index, the auxiliary facts the divergence argument
    rests on: q(n+1) - c(n+1) > 0 and q(n+1) a(n+1) >= q(N) a(N).
    """
    if q_recip_divergence is None:
        raise ValueError("divergence of sum 1/q_n must be supported by evidence (catalog, asserted or probe)")
    a, c_seq = seq(a), seq(c_seq)
    qf = _positive_q(_q_eval(q, ctx))
    start_qa = qf(w.start) * eval_term(a, w.start, ctx)
    gap_min = [None]

    def aux(n: int, _v: Any) -> str | None:
        q1 = qf(n + 1)
        gap = q1 - eval_term(c_seq, n + 1, ctx)
        gap_min[0] = gap if gap_min[0] is None or gap < gap_min[0] else gap_min[0]
        if not gap > 0:
            return "q_(n+1) - c_(n+1) not positive"
        if not ctx.ge(q1 * eval_term(a, n + 1, ctx), start_qa):
            return "q_(n+1)*a_(n+1) below q_N*a_N"
        return None

    verdict = scan_inequality(
        "weighted-div",
        w,
        lambda n: qf(n) * ratio(a, n, 1, ctx) - qf(n + 1),
        lambda n: -eval_term(c_seq, n + 1, ctx),
        "le",
        ctx,
        inequality="q_n*a_n/a_(n+1) - q_(n+1) <= -c_(n+1)",
        extra=aux,
    )
    verdict.details.update({"q": _q_name(q), "q_N_times_a_N": start_qa, "min_q_minus_c": gap_min[0]})
    verdict.hypotheses = [q_recip_divergence.describe("Σ1/q_n"), "q_n > 0 on window", _window_note(w)]
    if cq_ratio_divergence is not None:
        verdict.hypotheses.insert(1, cq_ratio_divergence.describe("Σc_n/q_n"))
    if verdict.holds:
        verdict.consequences = list(WEIGHTED_DIV_CONSEQUENCES)
        verdict.claim = "Σa_n divergence certified on window, conditional on Σ1/q_n divergence evidence"
        if cq_ratio_divergence is not None:
            verdict.consequences.append(CA_DIVERGES)
            verdict.conclusion = "diverges"
    return verdict
