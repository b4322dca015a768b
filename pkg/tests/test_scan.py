import csv
import io

import numpy as np
import pytest

from ctxbroadcast.errors import ArgumentError
from ctxbroadcast.feasibility import Status
from ctxbroadcast.scan import CSV_HEADER, grid, scan, transitions


@pytest.fixture(scope="module")
def small():
    return scan([0.0, 0.5, 1.0], [0.5, 0.9], [3])


def test_grid_points():
    assert np.allclose(grid(0.5), [0, 0.5, 1])
    assert len(grid(0.02)) == 51
    assert grid(0.3)[-1] == 1.0
    with pytest.raises(ArgumentError):
        grid(0)


def test_small_scan_rows(small):
    assert len(small.rows) == 6
    assert small.status(1.0, 0.9, 3) is Status.INFEASIBLE
    assert small.status(0.0, 0.9, 3) is Status.FEASIBLE
    assert small.status(0.5, 0.5, 3) is Status.FEASIBLE


def test_rows_sorted(small):
    keys = [(r.mu, r.eta, r.n) for r in small.rows]
    assert keys == sorted(keys)


def test_csv(small):
    text = small.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 7
    infeasible = [r for r in rows[1:] if r[3] == "Infeasible"]
    assert all(float(r[5]) > 0 for r in infeasible)


def test_svg(small):
    svg = small.to_svg()
    assert svg.startswith("<svg") and svg.count("<rect") == 1 + 6 + 3
    assert "contextual" in svg


def test_witnesses_recorded(small):
    assert set(small.witnesses) == {(r.mu, r.eta, r.n) for r in small.rows if r.status is Status.INFEASIBLE}


def test_deterministic(small):
    assert scan([0.0, 0.5, 1.0], [0.5, 0.9], [3]).to_csv() == small.to_csv()


def test_transitions(small):
    t = transitions(small, 3)
    assert t[1.0] == (0.5, 0.9)
    assert t[0.0] == (0.9, None)


def test_tp_diagnostic():
    table = scan([1.0], [0.6, 1.0], [2], compare_without_tp=True)
    assert "tp_disagreements" in table.diagnostics


@pytest.mark.parametrize("kwargs", [{"n_list": [5]}, {"mu_grid": [1.2]}])
def test_scan_rejects(kwargs):
    args = {"mu_grid": [1.0], "eta_grid": [1.0], "n_list": [2]} | kwargs
    with pytest.raises(ArgumentError):
        scan(**args)


def test_nested_on_coarse_grid():
    table = scan(grid(0.25), grid(0.1), [2, 3], witnesses=False)
    for r in table.for_n(3):
        if r.status is Status.FEASIBLE:
            assert table.status(r.mu, r.eta, 2) is Status.FEASIBLE
