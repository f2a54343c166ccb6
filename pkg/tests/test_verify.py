from __future__ import annotations

import json

import pytest

from laakso_lab.errors import UsageError
from laakso_lab.verify import SUITES, enumerate_w, resolve_config, run_suite


def test_measure_suite_exact():
    rep = run_suite("measure", {"t": "1/2", "levels": 3})
    assert rep.ok and all(c.status == "pass" for c in rep.checks)
    assert all(c.value == 0 for c in rep.checks if "projectivity" in c.name)


def test_spectral_suite():
    rep = run_suite("spectral", {"t": "1/2", "levels": 2, "grid": 6})
    assert rep.ok
    for c in rep.checks:
        if "pulled back" in c.name:
            assert c.value <= 1e-6


@pytest.mark.parametrize("name", ["construction", "intertwine", "form-equality", "markov"])
def test_suites_pass(name):
    assert run_suite(name).ok


def test_reports_reproducible():
    a = run_suite("markov", {"levels": 1, "seed": 3}).dumps()
    b = run_suite("markov", {"levels": 1, "seed": 3}).dumps()
    assert a == b


def test_report_schema():
    data = json.loads(run_suite("construction", {"levels": 2}).dumps())
    assert set(data) == {"suite", "config", "checks"}
    for c in data["checks"]:
        assert set(c) == {"name", "anchor", "status", "value", "tol", "seed"}
        assert c["status"] in {"pass", "fail", "report"} and c["anchor"]


def test_all_with_empty_config():
    rep = run_suite("all", {})
    assert rep.ok
    assert {c.status for c in rep.checks} >= {"pass", "report"}
    assert "suite all" in rep.render_text().splitlines()[0]


def test_unknown_suite_and_keys():
    with pytest.raises(UsageError):
        run_suite("nope")
    with pytest.raises(UsageError):
        resolve_config("measure", {"bogus": 1})
    with pytest.raises(UsageError):
        resolve_config("measure", {"Q": 2.0, "t": "1/2"})
    assert set(resolve_config("all", {})) == set(SUITES)
    assert resolve_config("all", {"seed": 5})["metric"]["seed"] == 5


def test_enumerate_w():
    assert enumerate_w((2, 2), 2) == {0.25, 0.75}
    assert len(enumerate_w((3, 3, 3), 3)) == 18


def test_dimension_config():
    rep = run_suite("measure", {"Q": 2.0, "levels": 2})
    assert rep.ok and "t" not in rep.config
