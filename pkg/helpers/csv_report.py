"""
CSV report writers

Every report the toolkit emits is a CSV with a fixed column order written
through pandas. Empty inputs give header-only files so downstream plotting
never has to special-case a missing study.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import pandas as pd

from hub.logger import get_logger
from numerics.schwarz import SchwarzReport

logger = get_logger("csv_report")

FLOAT_FORMAT = "%.12g"

ITERATION_COLUMNS = ["sweep", "e_L2", "e_H1", "ratio", "relerr_omega1", "relerr_omega2", "relerr_omega3", "mu"]
SUMMARY_COLUMNS = ["Pe", "sweeps", "relL2_omega1", "relL2_omega3", "extrapolated", "converged", "omega2_solves"]
RATE_TABLE_COLUMNS = ["Pe", "delta", "rho", "log_rho_over_2delta", "rel_dev", "diverged"]
FIGURE_COLUMNS = ["Pe", "relerr_L2d", "relerr_H1d"]
STUDY_COLUMNS = ["study", "Pe", "delta", "product_kind", "enrichment", "relerr_omega1", "relerr_omega3",
                 "sweeps", "converged", "extrapolated"]
PERTURBATION_COLUMNS = ["mu", "Pe", "sweeps", "plateau", "plateau_over_mu", "error_iter", "error_rela"]
CONTRACTION_COLUMNS = ["delta", "Pe", "rho_fit", "sweeps"]


def write_rows(rows: Iterable[Mapping[str, Any]], path: Union[str, Path], columns: Sequence[str]) -> Path:
    """Write rows in the given column order; extra keys are dropped"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug("csv written", path=str(path), rows=len(frame))
    return path


def write_iteration_csv(report: SchwarzReport, path: Union[str, Path]) -> Path:
    return write_rows(report.iteration_rows(), path, ITERATION_COLUMNS)


def write_summary_csv(rows: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    return write_rows(rows, path, SUMMARY_COLUMNS)


def write_rate_table(rows: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    return write_rows(rows, path, RATE_TABLE_COLUMNS)


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def emit_plot_data(rows: Iterable[Mapping[str, Any]], out_dir: Union[str, Path],
                   figure: str) -> List[Path]:
    """
    One CSV per subdomain for a relative-error figure.

    `rows` are study rows (Pe, product_kind, relerr_omega1, relerr_omega3);
    the output has one line per Pe and one column per inner-product kind.
    """
    out_dir = Path(out_dir)
    frame = pd.DataFrame(list(rows), columns=["Pe", "product_kind", "relerr_omega1", "relerr_omega3"])
    paths = []
    for subdomain in ("omega1", "omega3"):
        path = out_dir / f"{figure}_{subdomain}.csv"
        if frame.empty:
            table = pd.DataFrame(columns=FIGURE_COLUMNS)
        else:
            table = frame.pivot_table(index="Pe", columns="product_kind",
                                      values=f"relerr_{subdomain}", aggfunc="first")
            table = table.rename(columns=lambda kind: f"relerr_{kind}").reset_index()
            table = table.reindex(columns=FIGURE_COLUMNS).sort_values("Pe")
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        paths.append(path)
    logger.info("plot data emitted", figure=figure, files=[str(p) for p in paths], rows=len(frame))
    return paths


def summarize_frame(rows: Iterable[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    """Min/max/mean of the numeric columns, for log lines and console tables"""
    frame = pd.DataFrame(list(rows))
    if columns:
        frame = frame[[c for c in columns if c in frame.columns]]
    numeric = frame.select_dtypes("number")
    return {col: {'min': float(numeric[col].min()), 'max': float(numeric[col].max()),
                  'mean': float(numeric[col].mean())} for col in numeric.columns}
