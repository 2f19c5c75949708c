"""Labeled-corpus harness: run every test on every entry and compare certified
conclusions with the known labels.

A row is *certified* when its verdict reaches a conclusion ("converges" or
"diverges"); a certified row that disagrees with the label is a contradiction.
Rows that cannot conclude (missing sum constant, no divergence evidence,
failed inequality) are inconclusive and never count against the harness.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable

from .classical import c_over_n_evidence, condensation_check, raabe
from .engine import (
    CA_DIVERGES,
    WindowVerdict,
    kummer_div_step_check,
    kummer_step_check,
    weighted_conv_check,
    weighted_div_check,
)
from .expr import ExprSyntaxError
from .numeric import DomainError, NotRationalError, NumericContext
from .oracle import probe_divergence, sum_estimate
from .sequences import SequenceSpec, TestWindow, eval_term, load_catalog
from .witness import (
    PrecisionExhausted,
    SumConstant,
    WitnessError,
    constant_value,
    conv_witness,
    div_witness,
    rational_surrogate,
    weighted_conv_witness,
    weighted_div_witness,
)

__all__ = [
    "ALL_TESTS",
    "CorpusConfig",
    "CorpusEntry",
    "CorpusRow",
    "classify",
    "corpus_run",
    "load_corpus",
    "resolve_sum",
    "rows_to_csv",
    "rows_to_json",
    "run_entry",
    "summarize",
]

SCHEMA = 1


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    a: SequenceSpec
    label: str
    c: SequenceSpec | None = None
    a_label: str | None = None
    exact_sum: str | None = None
    note: str = ""

    @property
    def sum_label(self) -> str:
        """Label of sum a_n on its own."""
        return self.a_label or self.label

    @property
    def weights(self) -> SequenceSpec:
        return self.c if self.c is not None else SequenceSpec.from_text("1")

    @property
    def weighted_terms(self) -> SequenceSpec:
        return self.a if self.c is None else self.c.times(self.a)

    @classmethod
    def from_record(cls, rec: dict) -> "CorpusEntry":
        if "expr" in rec:
            a = SequenceSpec.from_text(rec["expr"], name=rec["id"])
        else:
            a = SequenceSpec.from_table(rec["table"], name=rec["id"])
        c = SequenceSpec.from_text(rec["c"]) if "c" in rec else None
        if c is None and "a_label" in rec:
            raise ValueError(f"entry {rec['id']}: a_label only makes sense with weights c")
        return cls(
            id=rec["id"],
            a=a,
            label=rec["label"],
            c=c,
            a_label=rec.get("a_label"),
            exact_sum=rec.get("exact_sum"),
            note=rec.get("note", ""),
        )


def load_corpus(path: str | Path | None = None) -> list[CorpusEntry]:
    """Entries of a corpus TOML file (the shipped catalog by default), sorted by id."""
    return sorted((CorpusEntry.from_record(r) for r in load_catalog(path)), key=lambda e: e.id)


@dataclass(frozen=True)
class CorpusConfig:
    window: TestWindow = TestWindow.span(1, 256)
    ctx: NumericContext = NumericContext()
    probe_blocks: int = 5
    probe_bound: int = 10**6
    condensed_window: TestWindow = TestWindow.span(1, 30)
    condensed_probe_bound: int = 10**4
    horizon_pad: int = 64
    # condensed terms 2^n a(2^n) are super-exponentially indexed, so their tail
    # checks stay short to keep 2^n inside the evaluable range
    condensed_horizon_pad: int = 8
    condensed_tail_check: int = 8
    raabe_c: str = "1/2"

    def plain(self) -> dict:
        return {
            "window": [self.window.start, self.window.end],
            "ctx": [self.ctx.mode, self.ctx.digits, str(self.ctx.eps), self.ctx.log_space],
            "probe_blocks": self.probe_blocks,
            "probe_bound": self.probe_bound,
            "condensed_window": [self.condensed_window.start, self.condensed_window.end],
            "condensed_probe_bound": self.condensed_probe_bound,
            "horizon_pad": self.horizon_pad,
            "condensed_horizon_pad": self.condensed_horizon_pad,
            "condensed_tail_check": self.condensed_tail_check,
            "raabe_c": self.raabe_c,
        }

    @classmethod
    def from_plain(cls, d: dict) -> "CorpusConfig":
        mode, digits, eps, log_space = d["ctx"]
        return cls(
            window=TestWindow.span(*d["window"]),
            ctx=NumericContext(mode, digits, Fraction(eps), log_space),
            probe_blocks=d["probe_blocks"],
            probe_bound=d["probe_bound"],
            condensed_window=TestWindow.span(*d["condensed_window"]),
            condensed_probe_bound=d["condensed_probe_bound"],
            horizon_pad=d["horizon_pad"],
            condensed_horizon_pad=d["condensed_horizon_pad"],
            condensed_tail_check=d["condensed_tail_check"],
            raabe_c=d["raabe_c"],
        )


@dataclass
class CorpusRow:
    entry: str
    test: str
    series: str
    expected: str
    status: str
    conclusion: str | None = None
    consequences: list[str] = field(default_factory=list)
    agrees: bool | None = None
    contradiction: bool = False
    message: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "test": self.test,
            "series": self.series,
            "expected": self.expected,
            "status": self.status,
            "conclusion": self.conclusion,
            "consequences": list(self.consequences),
            "agrees": self.agrees,
            "contradiction": self.contradiction,
            "message": self.message,
            "details": self.details,
        }


# ----------------------------------------------------------------------
# sum constants
# ----------------------------------------------------------------------


def resolve_sum(
    terms: SequenceSpec,
    exact_sum: str | None,
    horizon: int,
    ctx: NumericContext,
    check: int = 64,
) -> tuple[SumConstant | None, str]:
    """Sum constant for ``terms`` in priority order: closed form, then a certified oracle estimate.

    In exact mode an irrational closed form is replaced by the rational
    partial sum through ``horizon`` (source "surrogate").
    Returns (None, reason) when no trustworthy constant is available.
    """
    if exact_sum:
        try:
            return SumConstant(constant_value(exact_sum, ctx), "catalog", exact_sum), ""
        except NotRationalError:
            return rational_surrogate(terms, horizon, ctx, exact_sum), ""
    eval_term(terms, horizon, ctx)  # surface an overflow before paying for the partial sum
    est = sum_estimate(terms, horizon, "auto", ctx, check=check)
    if est.certified:
        return SumConstant.coerce(est, ctx), ""
    return None, f"no certified sum: {est.note}"


# ----------------------------------------------------------------------
# tests
# ----------------------------------------------------------------------


def _row_from_verdict(entry: CorpusEntry, test: str, series: str, expected: str, v: WindowVerdict) -> CorpusRow:
    d = v.to_dict()
    details = {k: d[k] for k in ("min_margin", "max_margin", "hypotheses") if k in d}
    if "failing_index" in d:
        details["failing_index"] = d["failing_index"]
    conclusion = v.conclusion
    if conclusion is None:
        conclusion = "inconclusive"
    return CorpusRow(
        entry=entry.id,
        test=test,
        series=series,
        expected=expected,
        status=v.status,
        conclusion=conclusion,
        consequences=list(v.consequences),
        message=v.message or "",
        details=details,
    )


def _inconclusive(entry: CorpusEntry, test: str, series: str, expected: str, why: str) -> CorpusRow:
    return CorpusRow(entry.id, test, series, expected, status="not-run", conclusion="inconclusive", message=why)


def _probe_evidence(q: Any, ctx: NumericContext, cfg: CorpusConfig, bound: int | None = None):
    report = probe_divergence(q, ctx, blocks=cfg.probe_blocks, bound=bound or cfg.probe_bound)
    return report.evidence(), report


class _Quotient:
    """n -> q(n)/c(n): lets the block probe look at sum c_n/q_n."""

    def __init__(self, q: Any, c: SequenceSpec, ctx: NumericContext):
        self.q, self.c, self.ctx = q, c, ctx

    def value(self, n: int) -> Any:
        return self.q.value(n) / eval_term(self.c, n, self.ctx)

    def reciprocal_floats(self, lo: int, hi: int):
        from .sequences import float_terms

        r = self.q.reciprocal_floats(lo, hi)
        cv = float_terms(self.c, lo, hi)
        return None if r is None or cv is None else r * cv


def _t_raabe(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    c = e.c if e.c is not None else SequenceSpec.from_text(cfg.raabe_c)
    expected = e.label if e.c is not None else e.sum_label
    v = raabe(e.a, c, cfg.window, cfg.ctx, c_over_n_evidence(c))
    return _row_from_verdict(e, "raabe", f"Σ({c.name})·a_n", expected, v)


def _t_weighted_conv(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w = cfg.ctx, cfg.window
    series = "Σc_n·a_n"
    S, why = resolve_sum(e.weighted_terms, e.exact_sum, w.end + cfg.horizon_pad, ctx)
    if S is None:
        return _inconclusive(e, "weighted-conv", series, e.label, why)
    q = weighted_conv_witness(e.a, e.weights, S, ctx, validate_upto=w.end + 1)
    row = _row_from_verdict(e, "weighted-conv", series, e.label, weighted_conv_check(e.a, e.weights, q, w, ctx))
    row.details["sum_constant"] = S.to_dict(ctx)
    return row


def _t_weighted_div(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w = cfg.ctx, cfg.window
    series = "Σc_n·a_n"
    q = weighted_div_witness(e.a, e.weights, ctx, validate_upto=w.end + 1)
    ev, report = _probe_evidence(q, ctx, cfg)
    if ev is None:
        row = _inconclusive(e, "weighted-div", series, e.label, "block probe found no evidence that Σ1/q_n diverges")
        row.details["probe"] = report.to_dict()
        return row
    cq_ev, cq_report = _probe_evidence(_Quotient(q, e.weights, ctx), ctx, cfg)
    v = weighted_div_check(e.a, e.weights, q, w, ctx, ev, cq_ev)
    row = _row_from_verdict(e, "weighted-div", series, e.label, v)
    row.details["probe"] = report.to_dict()
    row.details["cq_probe"] = cq_report.to_dict()
    return row


def _sum_of_a(e: CorpusEntry, horizon: int, ctx: NumericContext) -> tuple[SumConstant | None, str]:
    return resolve_sum(e.a, e.exact_sum if e.c is None else None, horizon, ctx)


def _t_kummer_conv_m2(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w, m = cfg.ctx, cfg.window, 2
    S, why = _sum_of_a(e, w.end + cfg.horizon_pad, ctx)
    if S is None:
        return _inconclusive(e, "kummer-conv-m2", "Σa_n", e.sum_label, why)
    S_m = SumConstant(S.value - eval_term(e.a, 1, ctx), S.source, f"S - a_1 with S from {S.source}")
    q = conv_witness(e.a, m, S_m, ctx, validate_upto=w.end + m)
    v = kummer_step_check(e.a, q, m, 1, w, ctx)
    row = _row_from_verdict(e, "kummer-conv-m2", "Σa_n", e.sum_label, v)
    row.details["sum_constant"] = S_m.to_dict(ctx)
    return row


def _t_kummer_div_m2(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w, m = cfg.ctx, cfg.window, 2
    q = div_witness(e.a, ctx, validate_upto=w.end + m)
    ev, report = _probe_evidence(q, ctx, cfg)
    if ev is None:
        row = _inconclusive(e, "kummer-div-m2", "Σa_n", e.sum_label, "block probe found no evidence that Σ1/q_n diverges")
        row.details["probe"] = report.to_dict()
        return row
    row = _row_from_verdict(e, "kummer-div-m2", "Σa_n", e.sum_label, kummer_div_step_check(e.a, q, m, w, ctx, ev))
    row.details["probe"] = report.to_dict()
    return row


def _condensed_parts(e: CorpusEntry) -> tuple[SequenceSpec, SequenceSpec, SequenceSpec]:
    """(2^n, a(2^n), 2^n a(2^n)) for an expression-defined entry."""
    cond = e.a.condensed()
    two_n, a_of_two_n = cond.expr.children
    return (
        SequenceSpec(expr=two_n, name="2^n"),
        SequenceSpec(expr=a_of_two_n, name=f"a(2^n) [{e.id}]"),
        cond,
    )


def _t_condensation(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w = cfg.ctx, cfg.condensed_window
    if e.a.expr is None:
        return CorpusRow(e.id, "condensation", "Σa_n", e.sum_label, "not-applicable", message="needs an expression")
    two_n, a2, cond = _condensed_parts(e)
    S, why = resolve_sum(cond, None, w.end + cfg.condensed_horizon_pad, ctx, cfg.condensed_tail_check)
    if S is None:
        return _inconclusive(e, "condensation", "Σa_n", e.sum_label, why)
    q = weighted_conv_witness(two_n, a2, S, ctx, validate_upto=w.end + 1)
    try:
        v = condensation_check(e.a, q, w, ctx)
    except DomainError as exc:
        if "not decreasing" in str(exc):
            return CorpusRow(e.id, "condensation", "Σa_n", e.sum_label, "not-applicable", message=str(exc))
        raise
    row = _row_from_verdict(e, "condensation", "Σa_n", e.sum_label, v)
    row.details["sum_constant"] = S.to_dict(ctx)
    return row


# Fewest indices a precision-truncated classification window may keep.
MIN_TRUNCATED_WIDTH = 4


def classify(
    terms: SequenceSpec,
    w: TestWindow,
    ctx: NumericContext,
    cfg: CorpusConfig,
    probe_bound: int | None = None,
    horizon_pad: int | None = None,
    tail_check: int = 64,
) -> tuple[str, WindowVerdict | None, str]:
    """Classify sum ``terms`` with the Kummer checks and constructed witnesses.

    Convergence: weighted-tail witness (c = 1) from a certified sum, then the
    convergence inequality.  Divergence: partial-sum witness with block-probe
    evidence, then the divergence conditions.  Returns (conclusion, verdict, note).
    """
    one = SequenceSpec.from_text("1")
    pad = cfg.horizon_pad if horizon_pad is None else horizon_pad
    S, why = resolve_sum(terms, None, w.end + pad, ctx, tail_check)
    if S is not None:
        note = f"sum constant from {S.source}"
        try:
            q = weighted_conv_witness(terms, one, S, ctx, validate_upto=w.end + 1)
        except PrecisionExhausted as exc:
            # S minus the partial sum vanishes at working precision past exc.index;
            # the check can still run on the part of the window before it
            end = exc.index - 2
            if end < w.start + MIN_TRUNCATED_WIDTH - 1:
                raise
            w = TestWindow.span(w.start, end)
            q = weighted_conv_witness(terms, one, S, ctx, validate_upto=w.end + 1)
            note += f"; window truncated to [{w.start}, {w.end}] by working precision"
        v = weighted_conv_check(terms, one, q, w, ctx)
        if v.conclusion:
            return v.conclusion, v, note
    q = div_witness(terms, ctx, validate_upto=w.end + 1)
    ev, report = _probe_evidence(q, ctx, cfg, probe_bound)
    if ev is None:
        found = sum(1 for b in report.blocks if b.found)
        return "inconclusive", None, f"{why}; block probe found {found} of {report.required} blocks"
    v = kummer_div_step_check(terms, q, 1, w, ctx, ev)
    return (v.conclusion or "inconclusive"), v, ev.detail


def _t_condensed_classify(e: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    ctx, w = cfg.ctx, cfg.condensed_window
    series = "Σ2^n·a_(2^n)"
    if e.a.expr is None:
        return CorpusRow(e.id, "condensed-classify", series, e.sum_label, "not-applicable", message="needs an expression")
    from .classical import _monotone_samples

    top = 1 << (w.end + 2)
    prev = None
    for n in _monotone_samples(top):
        v = eval_term(e.a, n, ctx)
        if prev is not None and v > prev:
            return CorpusRow(e.id, "condensed-classify", series, e.sum_label, "not-applicable",
                             message=f"sequence is not decreasing at n = {n}")
        prev = v
    conclusion, verdict, note = classify(
        e.a.condensed(), w, ctx, cfg, cfg.condensed_probe_bound, cfg.condensed_horizon_pad, cfg.condensed_tail_check
    )
    if verdict is None:
        return _inconclusive(e, "condensed-classify", series, e.sum_label, note)
    row = _row_from_verdict(e, "condensed-classify", series, e.sum_label, verdict)
    row.conclusion = conclusion
    row.message = note
    return row


TESTS: dict[str, Callable[[CorpusEntry, CorpusConfig], CorpusRow]] = {
    "raabe": _t_raabe,
    "weighted-conv": _t_weighted_conv,
    "weighted-div": _t_weighted_div,
    "kummer-conv-m2": _t_kummer_conv_m2,
    "kummer-div-m2": _t_kummer_div_m2,
    "condensation": _t_condensation,
    "condensed-classify": _t_condensed_classify,
}
ALL_TESTS = tuple(TESTS)


def _judge(row: CorpusRow, entry: CorpusEntry) -> CorpusRow:
    if row.conclusion in ("converges", "diverges"):
        row.agrees = row.conclusion == row.expected
        row.contradiction = not row.agrees
    # consequences about sum a_n on its own are checked against its label too
    if "Σa_n diverges" in row.consequences and entry.sum_label != "diverges":
        row.contradiction = True
        row.agrees = False
        row.message = (row.message + "; " if row.message else "") + "consequence Σa_n diverges contradicts label"
    if CA_DIVERGES in row.consequences and entry.label != "diverges":
        row.contradiction = True
        row.agrees = False
    return row


# Precision ceiling when a witness runs into cancellation in mp mode.
MAX_ESCALATED_DIGITS = 800


def _run_test(name: str, entry: CorpusEntry, cfg: CorpusConfig) -> CorpusRow:
    """Run one test; on cancellation in S - partial sum, retry with doubled digits."""
    start = cfg.ctx.digits
    while True:
        try:
            row = TESTS[name](entry, cfg)
        except PrecisionExhausted as exc:
            digits = cfg.ctx.digits * 2
            if digits > MAX_ESCALATED_DIGITS:
                return _inconclusive(entry, name, "", entry.label, f"precision exhausted at {cfg.ctx.digits} digits: {exc}")
            ctx = NumericContext(cfg.ctx.mode, digits, cfg.ctx.eps, cfg.ctx.log_space)
            cfg = replace(cfg, ctx=ctx)
            continue
        if cfg.ctx.digits != start:
            note = f"escalated to {cfg.ctx.digits} digits"
            row.message = f"{row.message}; {note}" if row.message else note
        return row


def run_entry(entry: CorpusEntry, tests: Iterable[str], cfg: CorpusConfig) -> list[CorpusRow]:
    rows = []
    for name in tests:
        expected = entry.label
        try:
            row = _run_test(name, entry, cfg)
        except (ArithmeticError, ValueError, ExprSyntaxError, OverflowError) as exc:
            kind = "witness" if isinstance(exc, WitnessError) else type(exc).__name__
            row = CorpusRow(entry.id, name, "", expected, "error", message=f"{kind}: {exc}")
        rows.append(_judge(row, entry))
    return rows


def _run_entry_plain(args: tuple[dict, list[str], dict]) -> list[dict]:
    rec, tests, cfg = args
    return [r.to_dict() for r in run_entry(CorpusEntry.from_record(rec), tests, CorpusConfig.from_plain(cfg))]


def corpus_run(
    entries: list[CorpusEntry] | None = None,
    tests: Iterable[str] = ALL_TESTS,
    cfg: CorpusConfig | None = None,
    workers: int = 1,
    records: list[dict] | None = None,
) -> list[CorpusRow]:
    """Cross product of entries and tests, ordered by entry id then test order.

    With ``workers > 1`` entries run in separate processes; this requires the
    raw ``records`` the entries were built from.
    """
    cfg = cfg or CorpusConfig()
    tests = list(tests)
    unknown = [t for t in tests if t not in TESTS]
    if unknown:
        raise ValueError(f"unknown corpus tests: {', '.join(unknown)}")
    if entries is None:
        records = records if records is not None else load_catalog()
        entries = [CorpusEntry.from_record(r) for r in records]
    entries = sorted(entries, key=lambda e: e.id)
    if not tests or not entries:
        return []
    if workers > 1 and records is not None:
        by_id = {r["id"]: r for r in records}
        jobs = [(by_id[e.id], tests, cfg.plain()) for e in entries]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = []
            for chunk in pool.map(_run_entry_plain, jobs):
                out.extend(CorpusRow(**d) for d in chunk)
            return out
    rows: list[CorpusRow] = []
    for e in entries:
        rows.extend(run_entry(e, tests, cfg))
    return rows


def summarize(rows: list[CorpusRow]) -> dict:
    return {
        "rows": len(rows),
        "certified": sum(1 for r in rows if r.conclusion in ("converges", "diverges")),
        "agree": sum(1 for r in rows if r.agrees),
        "contradictions": sum(1 for r in rows if r.contradiction),
        "errors": sum(1 for r in rows if r.status == "error"),
        "inconclusive": sum(1 for r in rows if r.conclusion == "inconclusive"),
    }


def rows_to_json(rows: list[CorpusRow], cfg: CorpusConfig, tests: Iterable[str]) -> str:
    doc = {
        "schema": SCHEMA,
        "numeric": cfg.ctx.describe(),
        "window": [cfg.window.start, cfg.window.end],
        "tests": list(tests),
        "summary": summarize(rows),
        "rows": [r.to_dict() for r in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


CSV_FIELDS = ("entry", "test", "series", "expected", "status", "conclusion", "agrees", "contradiction", "min_margin", "failing_index", "message")


def rows_to_csv(rows: list[CorpusRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_FIELDS)
    for r in rows:
        wr.writerow([
            r.entry, r.test, r.series, r.expected, r.status, r.conclusion or "",
            "" if r.agrees is None else str(r.agrees).lower(), str(r.contradiction).lower(),
            r.details.get("min_margin", ""), r.details.get("failing_index", ""), r.message,
        ])
    return buf.getvalue()
