from __future__ import annotations

import pytest

from renormlab.analysis import CHECKS, DEFAULT_THRESHOLDS, CheckContext, run_check
from renormlab.api.schemas import Tolerances


def test_every_threshold_comes_from_tolerances() -> None:
    assert DEFAULT_THRESHOLDS == Tolerances().model_dump()
    ctx_thresholds = CheckContext(cascade=None).thresholds
    assert ctx_thresholds == DEFAULT_THRESHOLDS
    assert ctx_thresholds is not DEFAULT_THRESHOLDS


def test_unknown_check(example_cascade) -> None:
    with pytest.raises(ValueError, match="Unknown check"):
        run_check("nope", CheckContext(example_cascade))


def test_bracket_rows_only_for_class_n_levels(example_cascade, sheared_cascade) -> None:
    rows = run_check("ddelta", CheckContext(example_cascade, points=20))
    brackets = [r for r in rows if r["label"].startswith("bracket")]
    assert len(brackets) == 3
    assert all(r["status"] == "ok" and r["threshold"] == 1e-10 for r in brackets)
    rows = run_check("ddelta", CheckContext(sheared_cascade, points=20))
    assert not [r for r in rows if r["label"].startswith("bracket")]


def test_bracket_threshold_is_enforced(example_cascade) -> None:
    thresholds = dict(DEFAULT_THRESHOLDS, ddelta_bracket=-1.0)
    rows = run_check("ddelta", CheckContext(example_cascade, points=20, thresholds=thresholds))
    assert {r["status"] for r in rows if r["label"].startswith("bracket")} == {"fail"}


def test_rate_rows(example_cascade) -> None:
    ctx = CheckContext(example_cascade, points=20, workers=1)
    rows = run_check("R", ctx)
    rates = {r["label"]: r for r in rows if r["label"].startswith("rate")}
    assert sorted(rates) == ["rate k=0", "rate k=1", "rate k=2"]
    assert rates["rate k=0"]["status"] == "ok"
    # a single level cannot be fitted
    assert rates["rate k=2"]["status"] == "n/a"
    rows = run_check("dy", ctx)
    assert [r["status"] for r in rows if r["label"] == "bracket rate"] == ["ok"]


def test_a_spread_needs_three_levels(example_cascade, degenerate_cascade) -> None:
    assert "a_spread" in CHECKS
    rows = run_check("a_spread", CheckContext(degenerate_cascade))
    assert rows[0]["status"] == "n/a"
    rows = run_check("a_spread", CheckContext(example_cascade, points=20))
    assert len(rows) == 1 and rows[0]["label"] == "n=2"
