"""Kummer-type convergence tests for positive series, checked on finite windows.

Typical use::

    from kummer import NumericContext, TestWindow, div_witness, kummer_div_step_check, probe_divergence

    ctx = NumericContext("exact")
    q = div_witness("1/n", ctx)
    evidence = probe_divergence(q, ctx).evidence()
    verdict = kummer_div_step_check("1/n", q, 1, TestWindow.span(1, 1000), ctx, evidence)
"""

from __future__ import annotations

from .classical import (
    BertrandParams,
    GaussParams,
    OlivierReport,
    PreconditionError,
    bertrand,
    condensation_check,
    gauss,
    olivier_check,
    raabe,
)
from .corpus import CorpusConfig, CorpusEntry, CorpusRow, corpus_run, load_corpus
from .engine import (
    Evidence,
    WindowVerdict,
    kummer_div_step_check,
    kummer_step_check,
    weighted_conv_check,
    weighted_div_check,
)
from .expr import ExprSyntaxError, Node, parse, to_text
from .numeric import DomainError, EvaluationOverflow, NotRationalError, NumericContext
from .oracle import SumEstimate, cauchy_block_probe, domination_index, probe_divergence, sum_estimate
from .sequences import SequenceSpec, TestWindow, eval_term, partial_sum, ratio, seq
from .witness import (
    PrecisionExhausted,
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

__version__ = "0.1.0"

__all__ = [
    "BertrandParams",
    "CorpusConfig",
    "CorpusEntry",
    "CorpusRow",
    "DomainError",
    "EvaluationOverflow",
    "Evidence",
    "ExprSyntaxError",
    "GaussParams",
    "Node",
    "NotRationalError",
    "NumericContext",
    "OlivierReport",
    "PrecisionExhausted",
    "PreconditionError",
    "SequenceSpec",
    "SumConstant",
    "SumEstimate",
    "TestWindow",
    "WindowVerdict",
    "WitnessError",
    "WitnessSequence",
    "bertrand",
    "cauchy_block_probe",
    "condensation_check",
    "conv_witness",
    "corpus_run",
    "div_witness",
    "domination_index",
    "eval_term",
    "gauss",
    "kummer_div_step_check",
    "kummer_step_check",
    "load_corpus",
    "olivier_check",
    "olivier_witness",
    "parse",
    "partial_sum",
    "probe_divergence",
    "raabe",
    "ratio",
    "seq",
    "sum_estimate",
    "to_text",
    "user_witness",
    "verify_witness_identity",
    "weighted_conv_check",
    "weighted_conv_witness",
    "weighted_div_check",
    "weighted_div_witness",
]
