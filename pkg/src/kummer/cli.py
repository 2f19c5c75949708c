"""Command-line front end: ``kummer analyze | witness | corpus``.

Exit codes: 0 the command ran, 1 usage error, 2 evaluation or domain error,
3 the corpus harness found a contradiction.

Settings are resolved with the precedence command line > environment
(``KUMMER_<NAME>``) > TOML file given by ``--config`` > built-in default.
A TOML file may hold top-level keys and per-command tables, e.g.::

    mode = "mp"
    digits = 60
    [corpus]
    workers = 4
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

from .classical import (
    BertrandParams,
    GaussParams,
    PreconditionError,
    bertrand,
    c_over_n_evidence,
    condensation_check,
    gauss,
    olivier_check,
    raabe,
)
from .corpus import ALL_TESTS, CorpusConfig, corpus_run, rows_to_csv, rows_to_json, summarize
from .engine import (
    Evidence,
    WindowVerdict,
    kummer_div_step_check,
    kummer_step_check,
    weighted_conv_check,
    weighted_div_check,
)
from .expr import ExprSyntaxError
from .numeric import DomainError, NumericContext
from .oracle import probe_divergence, sum_estimate
from .sequences import SequenceSpec, TestWindow, eval_term, load_catalog, partial_sum, ratio, seq
from .witness import (
    SumConstant,
    WitnessError,
    WitnessSequence,
    conv_witness,
    div_witness,
    olivier_witness,
    user_witness,
    verify_witness_identity,
    weighted_conv_witness,
    weighted_div_witness,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["main", "build_parser", "Settings"]

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_EVAL, EXIT_CONTRADICTION = 0, 1, 2, 3

ANALYZE_TESTS = (
    "kummer-conv",
    "kummer-div",
    "weighted-conv",
    "weighted-div",
    "raabe",
    "bertrand",
    "gauss",
    "condensation",
    "olivier",
)
WITNESS_KINDS = ("div", "conv", "weighted-conv", "weighted-div", "olivier")

# name -> (type, default); these may come from the command line, env or TOML
SETTINGS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "mode": (str, "mp"),
    "digits": (int, 50),
    "eps": (str, None),
    "log_space": (lambda s: str(s).lower() in ("1", "true", "yes", "on"), False),
    "window": (str, None),
    "format": (str, "json"),
    "workers": (int, 1),
    "probe_blocks": (int, 5),
    "probe_bound": (int, 10**6),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with exit status 1 here, not 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class Settings:
    values: dict[str, Any]

    @classmethod
    def resolve(cls, args: argparse.Namespace, env: dict[str, str], command: str) -> "Settings":
        file_values: dict[str, Any] = {}
        if getattr(args, "config", None):
            try:
                with open(args.config, "rb") as fh:
                    doc = tomllib.load(fh)
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config}: {exc}") from exc
            file_values = {k: v for k, v in doc.items() if not isinstance(v, dict)}
            file_values.update(doc.get(command, {}))
        values = {}
        for name, (conv, default) in SETTINGS.items():
            cli = getattr(args, name, None)
            env_val = env.get(f"KUMMER_{name.upper()}")
            try:
                if cli is not None:
                    values[name] = cli
                elif env_val is not None:
                    values[name] = conv(env_val)
                elif name in file_values:
                    raw = file_values[name]
                    values[name] = conv(raw) if isinstance(raw, str) else raw
                else:
                    values[name] = default
            except ValueError as exc:
                raise UsageError(f"bad value for setting {name}: {exc}") from exc
        if values["format"] not in ("json", "csv"):
            raise UsageError(f"format must be json or csv, not {values['format']!r}")
        return cls(values)

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    def context(self) -> NumericContext:
        eps = self["eps"]
        try:
            return NumericContext(
                mode=self["mode"],
                digits=int(self["digits"]),
                eps=None if eps is None else Fraction(str(eps)),
                log_space=bool(self["log_space"]),
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def window(self, default: str) -> TestWindow:
        text = self["window"] or default
        try:
            return TestWindow.parse(str(text))
        except ValueError as exc:
            raise UsageError(f"bad window {text!r} (expected START:END): {exc}") from exc


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML settings file")
    p.add_argument("--mode", choices=("exact", "mp"), default=None)
    p.add_argument("--digits", type=int, default=None, help="decimal digits in mp mode (default 50)")
    p.add_argument("--eps", default=None, help="comparison tolerance (default 1e-30 in mp mode, 0 in exact mode)")
    p.add_argument("--log-space", dest="log_space", action="store_const", const=True, default=None)
    p.add_argument("--window", default=None, help="START:END, inclusive")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kummer", description="Kummer-type convergence and divergence checks on finite windows.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    an = sub.add_parser("analyze", help="run one or more tests on a series")
    _common(an)
    an.add_argument("--a", required=True, help="terms a_n (expression in n)")
    an.add_argument("--c", default="1", help="weights c_n (default 1)")
    an.add_argument("--test", action="append", required=True, choices=ANALYZE_TESTS, help="repeatable")
    an.add_argument("--witness", default="auto", help="'auto' to construct q_n, or an expression in n")
    an.add_argument("--m", type=int, default=1, help="step for the kummer tests")
    an.add_argument("--margin", default=None, help="constant c > 0 for kummer-conv (default 1)")
    an.add_argument("--sum", dest="sum_text", help="sum constant for constructed convergence witnesses")
    an.add_argument("--side", choices=("conv", "div"), default="conv", help="bertrand/gauss side")
    an.add_argument("--theta-n", default=None, help="theta_n for bertrand/gauss")
    an.add_argument("--theta", default=None, help="bound on theta_n for bertrand")
    an.add_argument("--mu", default=None, help="mu for gauss")
    an.add_argument("--gamma", default=None, help="gamma for gauss")
    an.add_argument("--tail-start", dest="tail_start", type=int, default=None,
                    help="first index of the olivier tail statistics (default: last quartile)")
    an.add_argument("--assert-qrecip-divergent", dest="qrecip", default=None,
                    help="evidence that sum 1/q_n diverges: probe | asserted | catalog:ID")
    an.add_argument("--assert-aux-divergent", dest="aux", default=None,
                    help="evidence for the auxiliary divergent series (c_n/q_n, c_n/n or c_n/(n ln n)): "
                         "probe | asserted | catalog:ID")
    an.add_argument("--emit-trace", help="CSV file of n,value,bound for every test run")
    an.add_argument("--probe-blocks", dest="probe_blocks", type=int, default=None)
    an.add_argument("--probe-bound", dest="probe_bound", type=int, default=None)

    wi = sub.add_parser("witness", help="construct a witness q_n and check its identity")
    _common(wi)
    wi.add_argument("--a", required=True)
    wi.add_argument("--c", default="1")
    wi.add_argument("--kind", required=True, choices=WITNESS_KINDS)
    wi.add_argument("--m", type=int, default=1)
    wi.add_argument("--sum", dest="sum_text", help="sum constant (S, or the full sum of a_n for --kind conv)")
    wi.add_argument("--emit-trace", help="CSV file of n,value,bound with value = q_n and bound = the Kummer expression")

    co = sub.add_parser("corpus", help="run the labeled corpus")
    _common(co)
    co.add_argument("--corpus", help="corpus TOML (default: the shipped catalog)")
    co.add_argument("--tests", help=f"comma-separated subset of: {', '.join(ALL_TESTS)}")
    co.add_argument("--format", choices=("json", "csv"), default=None)
    co.add_argument("--workers", type=int, default=None)
    co.add_argument("--probe-blocks", dest="probe_blocks", type=int, default=None)
    co.add_argument("--probe-bound", dest="probe_bound", type=int, default=None)
    return parser


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_trace(path: str, rows: list[tuple[Any, ...]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("n", "value", "bound"))
        wr.writerows(rows)


def _evidence(text: str | None, q: Any, ctx: NumericContext, st: Settings) -> tuple[Evidence | None, dict | None]:
    """Parse an evidence selector; 'probe' runs the Cauchy-block probe on ``q``."""
    if text is None:
        return None, None
    if text == "asserted":
        return Evidence("asserted", "user"), None
    if text.startswith("catalog:"):
        try:
            return Evidence.catalog(text.split(":", 1)[1]), None
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad catalog evidence {text!r}: {exc}") from exc
    if text == "probe":
        if q is None:
            raise UsageError("probe evidence needs a witness to probe")
        report = probe_divergence(q, ctx, blocks=st["probe_blocks"], bound=st["probe_bound"])
        return report.evidence(), report.to_dict()
    raise UsageError(f"evidence must be probe, asserted or catalog:ID, not {text!r}")


class _Ratio:
    """n -> c_n / q_n, for probing sum c_n/q_n."""

    def __init__(self, c: SequenceSpec, q: Any, ctx: NumericContext):
        self.c, self.ctx = c, ctx
        self._q = q.value if hasattr(q, "value") else (lambda n: eval_term(seq(q), n, ctx))

    def value(self, n: int) -> Any:
        return self._q(n) / eval_term(self.c, n, self.ctx)


def _sum_constant(text: str | None, terms: SequenceSpec, horizon: int, ctx: NumericContext, what: str) -> SumConstant:
    """User sum (after an oracle convergence check) or a certified oracle estimate."""
    oracle_ctx = ctx if not ctx.exact else NumericContext("mp")
    est = sum_estimate(terms, horizon, "auto", oracle_ctx)
    if not est.certified:
        raise WitnessError(
            f"the oracle cannot certify that {what} converges ({est.note}); "
            "the converse construction presupposes a convergent series"
        )
    if text is not None:
        return SumConstant.coerce(text, ctx)
    if ctx.exact:
        raise UsageError("exact mode needs an explicit rational --sum")
    return SumConstant.coerce(est, ctx)


def _user_q(text: str, ctx: NumericContext) -> WitnessSequence:
    return user_witness(text, ctx)


# ----------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------


def _analyze_one(test: str, args: argparse.Namespace, st: Settings, ctx: NumericContext, w: TestWindow) -> dict:
    a = seq(args.a)
    c = seq(args.c)
    auto = args.witness == "auto"
    horizon = w.end + 64
    witness: WitnessSequence | None = None
    extra: dict[str, Any] = {}
    verdict: WindowVerdict

    if test == "kummer-conv":
        m = args.m
        if auto:
            S = _sum_constant(args.sum_text, a, horizon, ctx, "sum a_n")
            S_m = SumConstant(S.value - partial_sum(a, m - 1, ctx) if m > 1 else S.value, S.source, S.note)
            witness = conv_witness(a, m, S_m, ctx, validate_upto=w.end + m)
        else:
            witness = _user_q(args.witness, ctx)
        verdict = kummer_step_check(a, witness, m, args.margin or 1, w, ctx)
    elif test == "kummer-div":
        witness = div_witness(a, ctx, validate_upto=w.end + args.m) if auto else _user_q(args.witness, ctx)
        ev, extra["probe"] = _evidence(args.qrecip, witness, ctx, st)
        if ev is None:
            raise UsageError("kummer-div needs --assert-qrecip-divergent (probe evidence found nothing)"
                             if args.qrecip == "probe" else "kummer-div needs --assert-qrecip-divergent")
        verdict = kummer_div_step_check(a, witness, args.m, w, ctx, ev)
    elif test == "weighted-conv":
        if auto:
            S = _sum_constant(args.sum_text, c.times(a), horizon, ctx, "sum c_n a_n")
            witness = weighted_conv_witness(a, c, S, ctx, validate_upto=w.end + 1)
        else:
            witness = _user_q(args.witness, ctx)
        verdict = weighted_conv_check(a, c, witness, w, ctx)
    elif test == "weighted-div":
        witness = weighted_div_witness(a, c, ctx, validate_upto=w.end + 1) if auto else _user_q(args.witness, ctx)
        ev, extra["probe"] = _evidence(args.qrecip, witness, ctx, st)
        if ev is None:
            raise UsageError("weighted-div needs --assert-qrecip-divergent evidence that sum 1/q_n diverges")
        aux, extra["aux_probe"] = _evidence(args.aux, _Ratio(c, witness, ctx), ctx, st)
        verdict = weighted_div_check(a, c, witness, w, ctx, ev, aux)
    elif test == "raabe":
        aux, extra["aux_probe"] = _evidence(args.aux, None if args.aux != "probe" else _Ratio(c, "n", ctx), ctx, st)
        verdict = raabe(a, c, w, ctx, aux or c_over_n_evidence(c))
    elif test == "bertrand":
        if args.theta_n is None:
            raise UsageError("bertrand needs --theta-n")
        params = BertrandParams.of(args.theta_n, args.theta)
        aux = None
        if args.side == "div":
            aux, extra["aux_probe"] = _evidence(args.aux, _Ratio(c, "n*ln(n+1)", ctx) if args.aux == "probe" else None, ctx, st)
        verdict = bertrand(a, c, params, args.side, w, ctx, aux)
    elif test == "gauss":
        if None in (args.theta_n, args.mu, args.gamma):
            raise UsageError("gauss needs --theta-n, --mu and --gamma")
        params = GaussParams.of(args.mu, args.gamma, args.theta_n)
        aux = None
        if args.side == "div":
            aux, extra["aux_probe"] = _evidence(args.aux, _Ratio(c, "n", ctx) if args.aux == "probe" else None, ctx, st)
            aux = aux or c_over_n_evidence(c)
        verdict = gauss(a, c, params, args.side, w, ctx, aux)
    elif test == "condensation":
        if auto:
            if a.expr is None:
                raise UsageError("condensation needs an expression")
            cond = a.condensed()
            two_n, a2 = cond.expr.children
            S = _sum_constant(args.sum_text, cond, w.end + 8, ctx, "sum 2^n a(2^n)")
            witness = weighted_conv_witness(SequenceSpec(expr=two_n, name="2^n"), SequenceSpec(expr=a2, name="a(2^n)"),
                                            S, ctx, validate_upto=w.end + 1)
        else:
            witness = _user_q(args.witness, ctx)
        verdict = condensation_check(a, witness, w, ctx)
    elif test == "olivier":
        if auto:
            S = _sum_constant(args.sum_text, a, horizon, ctx, "sum a_n")
            witness = olivier_witness(a, S, ctx, validate_upto=w.end + 1)
        else:
            witness = _user_q(args.witness, ctx)
        report = olivier_check(a, witness, w, ctx, tail_start=args.tail_start)
        verdict = report.verdict
        extra["olivier"] = report.to_dict()
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown test {test}")

    out = {"test": test, "verdict": verdict.to_dict()}
    if witness is not None:
        out["witness"] = witness.to_dict(w)
    out.update({k: v for k, v in extra.items() if v is not None})
    out["_trace"] = verdict.trace_rows()
    return out


def cmd_analyze(args: argparse.Namespace, st: Settings) -> int:
    ctx = st.context()
    w = st.window("1:1000")
    results = [_analyze_one(t, args, st, ctx, w) for t in args.test]
    if args.emit_trace:
        rows = []
        for r in results:
            rows.extend(r["_trace"])
        _write_trace(args.emit_trace, rows)
    for r in results:
        del r["_trace"]
    doc = {
        "schema": SCHEMA,
        "command": "analyze",
        "request": {
            "a": args.a,
            "c": args.c,
            "tests": list(args.test),
            "witness": args.witness,
            "m": args.m,
            "window": [w.start, w.end],
            "evidence": {"qrecip": args.qrecip, "aux": args.aux},
        },
        "numeric": ctx.describe(),
        "results": results,
        "trace": args.emit_trace,
    }
    _emit(_dump(doc), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# witness
# ----------------------------------------------------------------------


def cmd_witness(args: argparse.Namespace, st: Settings) -> int:
    ctx = st.context()
    w = st.window("1:100")
    a, c = seq(args.a), seq(args.c)
    kind = args.kind
    horizon = w.end + 64
    m = 1
    if kind == "div":
        q = div_witness(a, ctx, validate_upto=w.end + 1)
        residual = max(abs(q.value(n) * eval_term(a, n, ctx) - partial_sum(a, n, ctx)) for n in w.indices())
        identity = "q_n*a_n = a_1 + ... + a_n"
    elif kind == "conv":
        m = args.m
        S = _sum_constant(args.sum_text, a, horizon, ctx, "sum a_n")
        S_m = SumConstant(S.value - partial_sum(a, m - 1, ctx) if m > 1 else S.value, S.source, S.note)
        q = conv_witness(a, m, S_m, ctx, validate_upto=w.end + m)

        def expected(n: int) -> Any:
            head = eval_term(a, n + m, ctx)
            return 1 + sum((eval_term(a, j, ctx) for j in range(n + m + 1, n + 2 * m)), ctx.num(0)) / head

        residual = max(abs(q.value(n) * ratio(a, n, m, ctx) - q.value(n + m) - expected(n)) for n in w.indices())
        identity = f"q_n*a_n/a_(n+{m}) - q_(n+{m}) = 1 + (a_(n+{m}+1) + ... + a_(n+{2 * m - 1}))/a_(n+{m})"
    elif kind in ("weighted-conv", "olivier"):
        if kind == "olivier":
            S = _sum_constant(args.sum_text, a, horizon, ctx, "sum a_n")
            q = olivier_witness(a, S, ctx, validate_upto=w.end + 1)
            a, c = seq("1/n"), SequenceSpec(expr=(seq("n").expr * a.expr), name="n*a_n")
        else:
            S = _sum_constant(args.sum_text, c.times(a), horizon, ctx, "sum c_n a_n")
            q = weighted_conv_witness(a, c, S, ctx, validate_upto=w.end + 1)
        residual = verify_witness_identity(a, c, q, w, ctx)
        identity = "q_n*a_n/a_(n+1) - q_(n+1) = c_(n+1)"
    else:
        q = weighted_div_witness(a, c, ctx, validate_upto=w.end + 1)
        residual = verify_witness_identity(a, c, q, w, ctx)
        identity = "q_n*a_n/a_(n+1) - q_(n+1) = -c_(n+1)"
    if args.emit_trace:
        rows = [(n, ctx.fmt(q.value(n)), ctx.fmt(q.value(n) * ratio(a, n, m, ctx) - q.value(n + m))) for n in w.indices()]
        _write_trace(args.emit_trace, rows)
    doc = {
        "schema": SCHEMA,
        "command": "witness",
        "request": {"a": args.a, "c": args.c, "kind": kind, "m": m, "window": [w.start, w.end]},
        "numeric": ctx.describe(),
        "witness": q.to_dict(w),
        "identity": identity,
        "residual": ctx.fmt(residual),
        "trace": args.emit_trace,
    }
    _emit(_dump(doc), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# corpus
# ----------------------------------------------------------------------


def cmd_corpus(args: argparse.Namespace, st: Settings) -> int:
    ctx = st.context()
    base = CorpusConfig()
    w = st.window(f"{base.window.start}:{base.window.end}")
    cfg = CorpusConfig(
        window=w,
        ctx=ctx,
        probe_blocks=st["probe_blocks"],
        probe_bound=st["probe_bound"],
    )
    tests = [t.strip() for t in args.tests.split(",")] if args.tests else list(ALL_TESTS)
    try:
        records = load_catalog(args.corpus)
    except OSError as exc:
        raise UsageError(f"cannot read corpus: {exc}") from exc
    rows = corpus_run(tests=tests, cfg=cfg, workers=st["workers"], records=records)
    text = rows_to_csv(rows) if st["format"] == "csv" else rows_to_json(rows, cfg, tests)
    _emit(text, args.output)
    bad = [r for r in rows if r.contradiction]
    for r in bad:
        print(f"CONTRADICTION {r.entry} {r.test}: expected {r.expected}, got {r.conclusion} ({r.message})", file=sys.stderr)
    s = summarize(rows)
    print(
        f"{s['rows']} rows: {s['certified']} certified, {s['contradictions']} contradictions, "
        f"{s['inconclusive']} inconclusive, {s['errors']} errors",
        file=sys.stderr,
    )
    return EXIT_CONTRADICTION if bad else EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "witness": cmd_witness, "corpus": cmd_corpus}


def main(argv: Sequence[str] | None = None, env: dict[str, str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env = dict(os.environ) if env is None else env
    try:
        st = Settings.resolve(args, env, args.command)
        return COMMANDS[args.command](args, st)
    except (UsageError, ExprSyntaxError, PreconditionError) as exc:
        print(f"kummer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ArithmeticError) as exc:
        print(f"kummer: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except ValueError as exc:
        print(f"kummer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
