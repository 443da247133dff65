import re

import numpy as np
import pytest

from eitcem.experiments import SweepConfig, SweepReport, sweep_z
from eitcem.report import csv_text, emit_report, read_csv, svg_text


@pytest.fixture(scope="module")
def report():
    cfg = SweepConfig(base_level=1, boundary_rounds=1, betas=tuple(np.logspace(0, -3, 4)))
    return sweep_z(cfg)


def test_empty_report_is_header_only():
    rep = SweepReport("z", "beta", [], {}, {})
    assert csv_text(rep) == "param,h1,combined,l2,rmap\n"


def test_csv_round_trip_is_exact(report, tmp_path):
    path = emit_report(report, tmp_path, "csv")
    header, rows = read_csv(path)
    assert header == ["param", "h1", "combined", "l2", "rmap"]
    assert [tuple(r) for r in rows] == [tuple(r) for r in report.rows]


def test_svg_contents(report, tmp_path):
    text = emit_report(report, tmp_path, "svg").read_text()
    assert text.startswith("<svg")
    assert len(re.findall(r'<polyline class="series"', text)) == 4
    labels = re.findall(r'<text class="slope" data-column="(\w+)"[^>]*>\w+: slope (-?[\d.]+)<', text)
    assert [c for c, _ in labels] == ["h1", "combined", "l2", "rmap"]
    for name, value in labels:
        assert float(value) == pytest.approx(report.slope(name), abs=5e-5)


def test_svg_without_slopes():
    rep = SweepReport("z", "beta", [(0.1, 1.0, 1.0, 1.0, 1.0)], {}, {})
    assert svg_text(rep).count("slope n/a") == 4


def test_outputs_are_byte_deterministic(report, tmp_path):
    for fmt in ("csv", "svg", "json"):
        a = emit_report(report, tmp_path / "a", fmt).read_bytes()
        b = emit_report(report, tmp_path / "b", fmt).read_bytes()
        assert a == b


def test_unknown_format(report, tmp_path):
    with pytest.raises(ValueError):
        emit_report(report, tmp_path, "png")
