"""Positive sequences, partial sums and term ratios."""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .expr import Node, const, parse, substitute, to_text
from .numeric import MAX_INDEX, DomainError, NumericContext, compile_expr, compile_float

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "SequenceSpec",
    "TestWindow",
    "eval_term",
    "partial_sum",
    "ratio",
    "seq",
    "load_catalog",
    "catalog_sequence",
]


@dataclass(frozen=True)
class SequenceSpec:
    """A real sequence a(1), a(2), ... given by an expression or a value table.

    ``check_positive`` enforces the standing hypothesis that every term is a
    finite positive number; it can be switched off for sequences such as
    theta_n in the Bertrand/Gauss tests, which are allowed to be any real.
    """

    expr: Node | None = None
    table: tuple[Fraction, ...] | None = None
    name: str = ""
    check_positive: bool = True
    monotonicity: str = field(default="unknown", compare=False)
    # set on 2^n*a(2^n) sequences so tail integrals can be taken on a itself
    condensed_from: "SequenceSpec | None" = field(default=None, compare=False, repr=False)
    _evaluators: dict = field(default_factory=dict, init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if (self.expr is None) == (self.table is None):
            raise ValueError("give exactly one of expr or table")
        if not self.name:
            object.__setattr__(self, "name", to_text(self.expr) if self.expr is not None else "table")

    @classmethod
    def from_text(cls, text: str, name: str = "", check_positive: bool = True) -> "SequenceSpec":
        return cls(expr=parse(text), name=name or text, check_positive=check_positive)

    @classmethod
    def from_table(cls, values: Iterable[Any], name: str = "table") -> "SequenceSpec":
        return cls(table=tuple(Fraction(str(v)) if isinstance(v, float) else Fraction(v) for v in values), name=name)

    @property
    def is_constant(self) -> bool:
        from .expr import free_of_n

        return self.expr is not None and free_of_n(self.expr)

    def condensed(self) -> "SequenceSpec":
        """The sequence 2^n * a(2^n)."""
        if self.expr is None:
            raise ValueError("condensation needs an expression-defined sequence")
        two_n = Node("pow", (const(2), Node("n")))
        return SequenceSpec(
            expr=Node("mul", (two_n, substitute(self.expr, two_n))),
            name=f"2^n*a(2^n) [{self.name}]",
            condensed_from=self,
        )

    def times(self, other: "SequenceSpec") -> "SequenceSpec":
        if self.expr is None or other.expr is None:
            raise ValueError("products need expression-defined sequences")
        return SequenceSpec(expr=Node("mul", (self.expr, other.expr)), name=f"({self.name})*({other.name})")

    def __call__(self, n: int, ctx: NumericContext) -> Any:
        return eval_term(self, n, ctx)


def seq(spec: SequenceSpec | str | int | Fraction, check_positive: bool = True) -> SequenceSpec:
    """Coerce text or a constant into a :class:`SequenceSpec`."""
    if isinstance(spec, SequenceSpec):
        return spec
    if isinstance(spec, (int, Fraction)):
        return SequenceSpec(expr=const(spec), name=str(spec), check_positive=check_positive)
    return SequenceSpec.from_text(spec, check_positive=check_positive)


@dataclass(frozen=True)
class TestWindow:
    """Indices start, start+1, ..., start+width (inclusive)."""

    __test__ = False  # not a pytest class

    start: int
    width: int

    def __post_init__(self) -> None:
        if self.start < 1:
            raise ValueError("window start must be >= 1")
        if self.width < 1:
            raise ValueError("window width must be >= 1")
        if self.start + self.width > MAX_INDEX // 4:
            raise ValueError("window exceeds the index range")

    @classmethod
    def span(cls, lo: int, hi: int) -> "TestWindow":
        if hi <= lo:
            raise ValueError(f"empty window [{lo}, {hi}]")
        return cls(lo, hi - lo)

    @classmethod
    def parse(cls, text: str) -> "TestWindow":
        lo, _, hi = text.partition(":")
        return cls.span(int(lo), int(hi))

    @property
    def end(self) -> int:
        return self.start + self.width

    def indices(self) -> range:
        return range(self.start, self.end + 1)

    def check_step(self, m: int) -> None:
        if self.end + 2 * m > MAX_INDEX // 4:
            raise ValueError("window plus step exceeds the index range")

    def __str__(self) -> str:
        return f"[{self.start}, {self.end}]"


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------


def _raw(s: SequenceSpec, n: int, ctx: NumericContext) -> Any:
    if n < 1:
        raise DomainError("sequence index must be >= 1", n)
    if s.table is not None:
        if n > len(s.table):
            raise DomainError(f"index beyond the {len(s.table)}-entry table", n)
        return ctx.num(s.table[n - 1])
    f = s._evaluators.get(ctx)
    if f is None:
        f = s._evaluators[ctx] = compile_expr(s.expr, ctx)
    return f(n)


def eval_term(s: SequenceSpec, n: int, ctx: NumericContext) -> Any:
    """Value of ``s`` at ``n``; raises :class:`DomainError` for non-positive terms."""
    value = _raw(s, n, ctx)
    if s.check_positive and not value > 0:
        raise DomainError(f"term of {s.name} is not positive ({ctx.fmt(value)})", n)
    return value


class PartialSums:
    """Memoised prefix sums of ``term(n)`` for n = 1, 2, ...

    Access is serialised with a lock so concurrent readers observe the same values.
    """

    def __init__(self, term: Callable[[int], Any], ctx: NumericContext):
        self._term = term
        self._ctx = ctx
        self._prefix = [ctx.num(0)]
        self._lock = threading.Lock()

    def __call__(self, upto: int) -> Any:
        if upto < 0:
            raise DomainError("partial sum bound must be >= 0", upto)
        with self._lock:
            prefix = self._prefix
            while len(prefix) <= upto:
                k = len(prefix)
                prefix.append(prefix[-1] + self._term(k))
            return prefix[upto]


_sum_cache: dict[tuple, PartialSums] = {}
_sum_cache_lock = threading.Lock()


def sums_of(s: SequenceSpec, ctx: NumericContext) -> PartialSums:
    key = (s, ctx)
    with _sum_cache_lock:
        ps = _sum_cache.get(key)
        if ps is None:
            if len(_sum_cache) > 64:
                _sum_cache.clear()
            ps = _sum_cache[key] = PartialSums(lambda n: eval_term(s, n, ctx), ctx)
        return ps


def partial_sum(s: SequenceSpec, upto: int, ctx: NumericContext) -> Any:
    """Sum of s(1) + ... + s(upto)."""
    if upto < 1:
        raise ValueError("upto must be >= 1")
    return sums_of(s, ctx)(upto)


def _log_term(node: Node, n: int, ctx: NumericContext) -> Any:
    """ln(value) computed structurally so factorial-scale magnitudes never materialise."""
    mp = ctx.mp
    kind = node.kind
    if kind == "mul":
        return _log_term(node.children[0], n, ctx) + _log_term(node.children[1], n, ctx)
    if kind == "div":
        return _log_term(node.children[0], n, ctx) - _log_term(node.children[1], n, ctx)
    if kind == "pow":
        base, e = node.children
        return compile_expr(e, ctx)(n) * _log_term(base, n, ctx)
    if kind == "fact":
        x = compile_expr(node.children[0], ctx)(n)
        return mp.loggamma(x + 1)
    if kind == "exp":
        return compile_expr(node.children[0], ctx)(n)
    if kind == "sqrt":
        return _log_term(node.children[0], n, ctx) / 2
    value = compile_expr(node, ctx)(n)
    if not value > 0:
        raise DomainError("non-positive factor in log-space evaluation", n)
    return mp.log(value)


def ratio(a: SequenceSpec, n: int, m: int, ctx: NumericContext) -> Any:
    """a(n) / a(n + m)."""
    if m < 1:
        raise ValueError("step m must be >= 1")
    if ctx.log_space and not ctx.exact and a.expr is not None:
        eval_term(a, n, ctx)
        eval_term(a, n + m, ctx)
        return ctx.mp.exp(_log_term(a.expr, n, ctx) - _log_term(a.expr, n + m, ctx))
    return eval_term(a, n, ctx) / eval_term(a, n + m, ctx)


def float_terms(s: SequenceSpec, lo: int, hi: int, underflow_ok: bool = False) -> np.ndarray | None:
    """float64 values of s on [lo, hi], or None if any is non-finite or non-positive.

    With ``underflow_ok`` exact zeros (terms below the float64 range) are kept.
    """
    if s.table is not None:
        if hi > len(s.table):
            return None
        values = np.array([float(v) for v in s.table[lo - 1 : hi]])
    else:
        values = compile_float(s.expr)(np.arange(lo, hi + 1, dtype=float))
    if not np.all(np.isfinite(values)):
        return None
    if s.check_positive:
        ok = values >= 0 if underflow_ok else values > 0
        if not np.all(ok):
            return None
    return values


def float_reciprocals(s: SequenceSpec, lo: int, hi: int) -> np.ndarray | None:
    """float64 values of 1/s on [lo, hi]; terms overflowing to +inf give 0."""
    if s.expr is None:
        vals = float_terms(s, lo, hi)
        return None if vals is None else 1.0 / vals
    vals = compile_float(s.expr)(np.arange(lo, hi + 1, dtype=float))
    if np.any(np.isnan(vals)) or np.any(vals <= 0):
        return None
    return 1.0 / vals


# ----------------------------------------------------------------------
# catalog
# ----------------------------------------------------------------------


def _catalog_text() -> str:
    return resources.files("kummer").joinpath("data/catalog.toml").read_text(encoding="utf-8")


def load_catalog(path: str | Path | None = None) -> list[dict]:
    """Raw catalog records, in file order."""
    text = _catalog_text() if path is None else Path(path).read_text(encoding="utf-8")
    data = tomllib.loads(text)
    entries = data.get("entry", [])
    seen = set()
    for e in entries:
        if "id" not in e or "label" not in e:
            raise ValueError(f"catalog entry missing id/label: {e}")
        if ("expr" in e) == ("table" in e):
            raise ValueError(f"catalog entry {e['id']} needs exactly one of expr/table")
        if e["label"] not in ("converges", "diverges"):
            raise ValueError(f"catalog entry {e['id']} has bad label {e['label']!r}")
        if e["id"] in seen:
            raise ValueError(f"duplicate catalog id {e['id']}")
        seen.add(e["id"])
    return entries


@lru_cache(maxsize=None)
def _shipped() -> dict[str, dict]:
    return {e["id"]: e for e in load_catalog()}


def catalog_sequence(entry_id: str) -> SequenceSpec:
    try:
        e = _shipped()[entry_id]
    except KeyError:
        raise KeyError(f"no catalog entry {entry_id!r}") from None
    if "expr" in e:
        return SequenceSpec.from_text(e["expr"], name=entry_id)
    return SequenceSpec.from_table(e["table"], name=entry_id)


def catalog_label(entry_id: str) -> str:
    return _shipped()[entry_id]["label"]
