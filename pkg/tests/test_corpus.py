from __future__ import annotations

import csv
import io
import json

import pytest

from kummer.corpus import (
    ALL_TESTS,
    CorpusConfig,
    CorpusEntry,
    corpus_run,
    load_corpus,
    rows_to_csv,
    rows_to_json,
    summarize,
)
from kummer.sequences import load_catalog
from kummer.numeric import NumericContext
from kummer.sequences import TestWindow

CORE = ("raabe", "weighted-conv", "weighted-div")


@pytest.fixture(scope="module")
def full_rows():
    return corpus_run()


def test_catalog_shape():
    entries = load_corpus()
    assert len(entries) >= 12
    assert len({e.id for e in entries}) == len(entries)
    assert {e.label for e in entries} == {"converges", "diverges"}


@pytest.mark.slow
def test_full_corpus_has_no_contradictions(full_rows):
    s = summarize(full_rows)
    assert s["contradictions"] == 0
    assert s["errors"] == 0
    assert s["rows"] == len(load_corpus()) * len(ALL_TESTS)
    assert s["certified"] >= len(load_corpus())


@pytest.mark.slow
def test_precision_escalation_is_reported(full_rows):
    by_key = {(r.entry, r.test): r for r in full_rows}
    row = by_key[("geom-half", "weighted-conv")]
    assert row.conclusion == "converges" and "escalated to 100 digits" in row.message
    row = by_key[("geom-half", "condensation")]
    assert row.conclusion == "inconclusive" and "precision exhausted" in row.message


def test_empty_test_list_gives_empty_table():
    assert corpus_run(tests=[]) == []
    assert corpus_run(entries=[], tests=CORE) == []


def test_unknown_test_rejected():
    with pytest.raises(ValueError, match="unknown corpus tests"):
        corpus_run(tests=["ratio-test"])


def _records(*extra):
    recs = [r for r in load_catalog() if r["id"] in ("p-two", "harmonic")]
    return recs + list(extra)


def test_domain_error_is_isolated():
    bad = {"id": "pole", "expr": "1/(n-1)", "label": "diverges"}
    cfg = CorpusConfig(window=TestWindow.span(1, 64))
    rows = corpus_run(records=_records(bad), tests=CORE, cfg=cfg)
    bad_rows = [r for r in rows if r.entry == "pole"]
    assert [r.status for r in bad_rows] == ["error"] * len(CORE)
    assert all("n = 1" in r.message for r in bad_rows)
    good = [r for r in rows if r.entry != "pole"]
    assert all(r.status != "error" for r in good)
    assert not any(r.contradiction for r in rows)


def test_mislabeled_entry_is_a_contradiction():
    wrong = {"id": "liar", "expr": "1/n^3", "label": "diverges"}
    rows = corpus_run(records=[wrong], tests=["raabe"], cfg=CorpusConfig(window=TestWindow.span(1, 64)))
    assert rows[0].conclusion == "converges" and rows[0].contradiction


def test_exact_mode_json_is_deterministic():
    cfg = CorpusConfig(window=TestWindow.span(1, 64), ctx=NumericContext("exact"))
    records = _records({"id": "geom", "expr": "1/2^n", "label": "converges", "exact_sum": "1"})
    first = rows_to_json(corpus_run(records=records, tests=CORE, cfg=cfg), cfg, CORE)
    second = rows_to_json(corpus_run(records=records, tests=CORE, cfg=cfg), cfg, CORE)
    assert first == second
    doc = json.loads(first)
    assert doc["schema"] == 1 and doc["summary"]["contradictions"] == 0
    assert [(r["entry"], r["test"]) for r in doc["rows"]] == sorted(
        [(e, t) for e in ("geom", "harmonic", "p-two") for t in CORE], key=lambda k: (k[0], CORE.index(k[1]))
    )


def test_workers_match_serial():
    cfg = CorpusConfig(window=TestWindow.span(1, 64))
    records = _records()
    serial = corpus_run(records=records, tests=CORE, cfg=cfg)
    parallel = corpus_run(records=records, tests=CORE, cfg=cfg, workers=2)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]


def test_csv_has_same_rows_as_json():
    cfg = CorpusConfig(window=TestWindow.span(1, 64))
    rows = corpus_run(records=_records(), tests=CORE, cfg=cfg)
    table = list(csv.DictReader(io.StringIO(rows_to_csv(rows))))
    doc = json.loads(rows_to_json(rows, cfg, CORE))
    assert [(t["entry"], t["test"], t["status"]) for t in table] == [
        (r["entry"], r["test"], r["status"]) for r in doc["rows"]
    ]


def test_config_round_trip():
    cfg = CorpusConfig(window=TestWindow.span(3, 99), ctx=NumericContext("mp", 80), raabe_c="1")
    assert CorpusConfig.from_plain(json.loads(json.dumps(cfg.plain()))) == cfg


def test_entry_requires_weights_for_a_label():
    with pytest.raises(ValueError):
        CorpusEntry.from_record({"id": "x", "expr": "1/n", "label": "diverges", "a_label": "diverges"})
