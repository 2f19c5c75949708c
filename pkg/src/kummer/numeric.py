"""Numeric contexts and compiled evaluators for expression trees.

Two arithmetic modes are supported:

``exact``
    Values are :class:`fractions.Fraction`.  Comparisons use no tolerance.
    ``ln``, ``exp``, ``sqrt`` and ``pi`` are rejected because they leave Q.
``mp``
    Values are ``mpf`` numbers from a private :class:`mpmath.MPContext` with
    ``digits`` decimal digits.  Comparisons use the one-sided tolerance ``eps``.

A third, internal, float64 path (:func:`compile_float`) evaluates whole index
ranges with numpy.  It is only used by heuristic scans (block probes,
domination search) and never decides a certified verdict on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Callable

import mpmath
import numpy as np

from .expr import Node

__all__ = [
    "DomainError",
    "EvaluationOverflow",
    "NotRationalError",
    "NumericContext",
    "compile_expr",
    "compile_float",
    "compile_real",
    "EXACT",
]

MAX_INDEX = 2**63 - 1
# Exact results beyond this many bits are treated as an overflow.
_EXACT_BIT_BUDGET = 4_000_000
# Binary exponents beyond this are refused in mp mode (GMP aborts long before mpf overflows).
_MP_EXPONENT_LIMIT = 2**50


class DomainError(ArithmeticError):
    """A term is undefined, non-positive or otherwise outside the hypotheses of the tests."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} at n = {index}"
        super().__init__(message)


class NotRationalError(DomainError):
    pass


class EvaluationOverflow(DomainError):
    pass


@dataclass(frozen=True, eq=False)
class NumericContext:
    mode: str = "mp"
    digits: int = 50
    eps: Fraction | None = None
    log_space: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "mp"):
            raise ValueError(f"mode must be 'exact' or 'mp', got {self.mode!r}")
        if self.digits < 5:
            raise ValueError("digits must be at least 5")
        eps = self.eps
        if eps is None:
            eps = Fraction(0) if self.mode == "exact" else Fraction(1, 10**30)
        eps = Fraction(eps)
        if eps < 0:
            raise ValueError("eps must be non-negative")
        if self.mode == "exact" and eps != 0:
            raise ValueError("exact mode requires eps = 0")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "_hash", hash((self.mode, self.digits, eps, self.log_space)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, NumericContext):
            return NotImplemented
        return (self.mode, self.digits, self.eps, self.log_space) == (other.mode, other.digits, other.eps, other.log_space)

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    @cached_property
    def mp(self) -> mpmath.ctx_mp.MPContext:
        ctx = mpmath.MPContext()
        ctx.dps = self.digits
        return ctx

    @cached_property
    def tol(self) -> Any:
        return self.num(self.eps)

    def num(self, x: Any) -> Any:
        """Convert ``x`` (int, str, Fraction, mpf) to this context's number type."""
        if self.exact:
            if isinstance(x, Fraction):
                return x
            if isinstance(x, (int, str)):
                return Fraction(x)
            raise NotRationalError(f"cannot represent {x!r} exactly")
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            return self.mp.mpf(x)
        return self.mp.mpf(x)

    def to_float(self, x: Any) -> float:
        return float(x)

    def fmt(self, x: Any) -> str | None:
        """Deterministic text form used in JSON and CSV output."""
        if x is None:
            return None
        if isinstance(x, Fraction):
            return str(x)
        if isinstance(x, int):
            return str(x)
        return mpmath.nstr(x, min(self.digits, 25), min_fixed=-5, max_fixed=10)

    def ge(self, lhs: Any, rhs: Any) -> bool:
        return lhs >= rhs - self.tol

    def le(self, lhs: Any, rhs: Any) -> bool:
        return lhs <= rhs + self.tol

    def describe(self) -> dict:
        return {"mode": self.mode, "digits": None if self.exact else self.digits, "eps": str(self.eps)}


EXACT = NumericContext(mode="exact")


# ----------------------------------------------------------------------
# compiled evaluators
# ----------------------------------------------------------------------

Evaluator = Callable[[int], Any]


def _int_valued(x: Any) -> int | None:
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else None
    try:
        if x == int(x):
            return int(x)
    except (OverflowError, ValueError):
        return None
    return None


def _compile_exact(node: Node) -> Evaluator:
    kind = node.kind
    if kind == "const":
        v = node.value
        return lambda n: v
    if kind == "n":
        return lambda n: Fraction(n)
    if kind in ("pi", "ln", "exp", "sqrt"):
        raise NotRationalError(f"'{kind}' is not rational-valued; use mp mode")
    subs = [_compile_exact(c) for c in node.children]
    if kind == "neg":
        f = subs[0]
        return lambda n: -f(n)
    if kind == "fact":
        f = subs[0]

        def fact(n):
            x = f(n)
            k = _int_valued(x)
            if k is None or k < 0:
                raise DomainError(f"factorial of {x}", n)
            if k > 200_000:
                raise EvaluationOverflow(f"factorial argument {k} too large for exact mode", n)
            return Fraction(math.factorial(k))

        return fact
    f, g = subs
    if kind == "add":
        return lambda n: f(n) + g(n)
    if kind == "sub":
        return lambda n: f(n) - g(n)
    if kind == "mul":
        return lambda n: f(n) * g(n)
    if kind == "div":

        def div(n):
            d = g(n)
            if d == 0:
                raise DomainError("division by zero", n)
            return f(n) / d

        return div

    def power(n):
        base, e = f(n), g(n)
        k = _int_valued(e)
        if k is None:
            raise NotRationalError(f"non-integer exponent {e} is not exact", n)
        if base == 0 and k < 0:
            raise DomainError("zero to a negative power", n)
        if abs(base) not in (0, 1):
            bits = abs(k) * max(base.numerator.bit_length(), base.denominator.bit_length())
            if bits > _EXACT_BIT_BUDGET:
                raise EvaluationOverflow(f"power with ~{bits} bits exceeds exact budget", n)
        return base**k

    return power


def _compile_mp(node: Node, mp, real: bool = False) -> Evaluator:
    kind = node.kind
    if kind == "const":
        v = mp.mpf(node.value.numerator) / node.value.denominator
        return lambda n: v
    if kind == "n":
        return lambda n: mp.mpf(n)
    if kind == "pi":
        return lambda n: +mp.pi
    subs = [_compile_mp(c, mp, real) for c in node.children]
    if kind == "neg":
        f = subs[0]
        return lambda n: -f(n)
    if kind == "ln":
        f = subs[0]

        def ln(n):
            x = f(n)
            if x <= 0:
                raise DomainError(f"ln of non-positive value {mpmath.nstr(x, 8)}", n)
            return mp.log(x)

        return ln
    if kind == "exp":
        f = subs[0]
        return lambda n: mp.exp(f(n))
    if kind == "sqrt":
        f = subs[0]

        def sqrt(n):
            x = f(n)
            if x < 0:
                raise DomainError("sqrt of negative value", n)
            return mp.sqrt(x)

        return sqrt
    if kind == "fact":
        f = subs[0]

        def fact(n):
            x = f(n)
            if real:
                return mp.gamma(x + 1)
            k = _int_valued(x)
            if k is None or k < 0:
                raise DomainError(f"factorial of {mpmath.nstr(x, 8)}", n)
            return mp.factorial(k)

        return fact
    f, g = subs
    if kind == "add":
        return lambda n: f(n) + g(n)
    if kind == "sub":
        return lambda n: f(n) - g(n)
    if kind == "mul":
        return lambda n: f(n) * g(n)
    if kind == "div":

        def div(n):
            d = g(n)
            if not d:
                raise DomainError("division by zero", n)
            return f(n) / d

        return div

    exponent = node.children[1]
    if exponent.kind == "const" and exponent.value.denominator == 1:
        k_fixed = exponent.value.numerator

        def int_power(n):
            base = f(n)
            if k_fixed < 0 and not base:
                raise DomainError("zero to a negative power", n)
            return base**k_fixed

        return int_power

    def power(n):
        base, e = f(n), g(n)
        k = _int_valued(e)
        if k is not None:
            if base == 0 and k < 0:
                raise DomainError("zero to a negative power", n)
            if base and abs(k * mp.log(abs(base), 2)) > _MP_EXPONENT_LIMIT:
                raise EvaluationOverflow("power exceeds the representable range", n)
            return base**k
        if base < 0:
            raise DomainError("negative base with non-integer exponent", n)
        if base == 0:
            if e < 0:
                raise DomainError("zero to a negative power", n)
            return mp.zero
        if abs(e * mp.log(base, 2)) > _MP_EXPONENT_LIMIT:
            raise EvaluationOverflow("power exceeds the representable range", n)
        return mp.power(base, e)

    return power


@lru_cache(maxsize=512)
def compile_expr(node: Node, ctx: NumericContext) -> Evaluator:
    """Return ``n -> value`` for ``node`` in the arithmetic of ``ctx``."""
    if ctx.exact:
        return _compile_exact(node)
    return _compile_mp(node, ctx.mp)


def compile_real(node: Node, ctx: NumericContext) -> Callable[[Any], Any]:
    """Real-variable extension x -> value (factorial via the gamma function), mp arithmetic."""
    return _compile_mp(node, ctx.mp, real=True)


# ----------------------------------------------------------------------
# float64 vectorised path
# ----------------------------------------------------------------------


def _compile_np(node: Node) -> Callable[[np.ndarray], np.ndarray]:
    kind = node.kind
    if kind == "const":
        v = float(node.value)
        return lambda n: np.full(n.shape, v)
    if kind == "n":
        return lambda n: n
    if kind == "pi":
        return lambda n: np.full(n.shape, math.pi)
    subs = [_compile_np(c) for c in node.children]
    if kind == "neg":
        return lambda n: -subs[0](n)
    if kind == "ln":
        return lambda n: np.log(subs[0](n))
    if kind == "exp":
        return lambda n: np.exp(subs[0](n))
    if kind == "sqrt":
        return lambda n: np.sqrt(subs[0](n))
    if kind == "fact":
        from scipy.special import gamma

        return lambda n: gamma(subs[0](n) + 1.0)
    f, g = subs
    op = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide, "pow": np.power}[kind]
    return lambda n: op(f(n), g(n))


@lru_cache(maxsize=256)
def compile_float(node: Node) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised float64 evaluator.  Callers must treat non-finite output as 'unavailable'."""
    inner = _compile_np(node)

    def run(n: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return inner(np.asarray(n, dtype=float))

    return run
