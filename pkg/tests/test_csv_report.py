"""
Tests for the CSV report writers
"""

import math

import pandas as pd
import pytest

from helpers.csv_report import (
    FIGURE_COLUMNS,
    ITERATION_COLUMNS,
    STUDY_COLUMNS,
    emit_plot_data,
    read_csv,
    summarize_frame,
    write_iteration_csv,
    write_rows,
)
from numerics.schwarz import SchwarzReport


@pytest.fixture
def study_rows():
    rows = []
    for pe in (6.0, 5.0):
        for kind, scale in (("L2d", 2.0), ("H1d", 1.0)):
            rows.append({'study': 'pe-sweep', 'Pe': pe, 'delta': 5.0, 'product_kind': kind,
                         'enrichment': True, 'relerr_omega1': scale * 1e-3 * pe,
                         'relerr_omega3': scale * 1e-2, 'sweeps': 9, 'converged': True,
                         'extrapolated': False})
    return rows


class TestWriteRows:
    """Fixed column order"""

    def test_column_order_and_extra_keys(self, tmp_path):
        path = write_rows([{'b': 2, 'a': 1, 'extra': 'x'}], tmp_path / "sub" / "rows.csv", ['a', 'b'])
        assert path.read_text().splitlines() == ["a,b", "1,2"]

    def test_empty_rows_give_header(self, tmp_path):
        path = write_rows([], tmp_path / "empty.csv", STUDY_COLUMNS)
        assert list(read_csv(path).columns) == STUDY_COLUMNS
        assert len(read_csv(path)) == 0

    def test_iteration_csv(self, tmp_path):
        report = SchwarzReport(pe=2.0)
        report.errors_l2 = [1.0, 0.1, 0.01]
        report.errors_h1 = [2.0, 0.2, 0.02]
        report.relerrs = [(0.5, float('nan'), 0.4)] * 3
        frame = read_csv(write_iteration_csv(report, tmp_path / "it.csv"))
        assert list(frame.columns) == ITERATION_COLUMNS
        assert frame['sweep'].tolist() == [1, 2, 3]
        assert frame['e_H1'].tolist() == pytest.approx([2.0, 0.2, 0.02])
        assert math.isnan(frame['relerr_omega2'][0])


class TestPlotData:
    """Per-subdomain figure data"""

    def test_pivot_by_product(self, tmp_path, study_rows):
        paths = emit_plot_data(study_rows, tmp_path, "figure2")
        assert [p.name for p in paths] == ["figure2_omega1.csv", "figure2_omega3.csv"]
        omega1 = pd.read_csv(paths[0])
        assert list(omega1.columns) == FIGURE_COLUMNS
        assert omega1['Pe'].tolist() == [5.0, 6.0]
        assert omega1['relerr_L2d'].tolist() == pytest.approx([1e-2, 1.2e-2])
        assert omega1['relerr_H1d'].tolist() == pytest.approx([5e-3, 6e-3])

    def test_single_product_leaves_other_column_empty(self, tmp_path, study_rows):
        rows = [r for r in study_rows if r['product_kind'] == "H1d"]
        omega3 = pd.read_csv(emit_plot_data(rows, tmp_path, "figure4")[1])
        assert omega3['relerr_L2d'].isna().all()
        assert omega3['relerr_H1d'].tolist() == pytest.approx([1e-2, 1e-2])

    def test_empty_rows(self, tmp_path):
        for path in emit_plot_data([], tmp_path, "figure3"):
            assert path.read_text().strip() == ",".join(FIGURE_COLUMNS)


class TestSummaries:
    def test_numeric_columns_only(self, study_rows):
        summary = summarize_frame(study_rows, ['Pe', 'relerr_omega1', 'product_kind'])
        assert set(summary) == {'Pe', 'relerr_omega1'}
        assert summary['Pe'] == {'min': 5.0, 'max': 6.0, 'mean': 5.5}
