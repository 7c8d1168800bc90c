"""
CSV Handler - Wind Traces and Experiment Results
================================================

This module reads recorded wind traces and writes every tabular artifact
of an experiment (run logs, per-point metrics, gamma sweeps, gain dumps).

All files are plain comma-separated text with a header row, UTF-8, LF line
endings. Floats are written with 12 significant digits so that identical
runs produce byte-identical files.
"""

import os
import re
import logging
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from mcv_control.dynamics import INPUT_LABELS, STATE_LABELS
from mcv_control.exceptions import TraceFormatError
from mcv_control.riccati import GainSchedule
from mcv_control.sim import MetricsReport, RunLog, SweepReport, compare_reports
from mcv_control.wind import WindModel, WindTrace, estimate_stats

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['t', 'wx', 'wy', 'wz']
AXES = ('x', 'y', 'z')
FLOAT_FORMAT = '%.12g'


def _write(df: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def _axis_columns(prefix: str, values: np.ndarray) -> Dict[str, np.ndarray]:
    return {f"{prefix}_{axis}": values[:, i] for i, axis in enumerate(AXES)}


def gamma_label(gamma: float) -> str:
    return f"{gamma:g}"


# =========================================================================
# WIND TRACES
# =========================================================================
def read_trace(path: str) -> WindTrace:
    """
    Parse a wind trace file.

    Args:
        path: CSV file with header ``t,wx,wy,wz``

    Returns:
        WindTrace

    Raises:
        TraceFormatError: naming the 1-based file line of the first problem
        OSError: if the file cannot be read
    """
    try:
        df = pd.read_csv(path, dtype=str, skip_blank_lines=False, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise TraceFormatError("file is empty", line=1, path=path) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise TraceFormatError(
            f"malformed row ({e})", line=int(match.group(1)) if match else None, path=path
        ) from e

    header = [str(c).strip() for c in df.columns]
    if header != TRACE_COLUMNS:
        raise TraceFormatError(
            f"header must be {','.join(TRACE_COLUMNS)}, got {','.join(header)}", line=1, path=path
        )
    if len(df) < 2:
        raise TraceFormatError(f"a trace needs at least 2 samples, got {len(df)}", path=path)

    values = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors='coerce'))
    bad_rows = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)).all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0])
        raw = ','.join('' if pd.isna(v) else str(v) for v in df.iloc[row].tolist())
        raise TraceFormatError(f"not a numeric sample: '{raw}'", line=row + 2, path=path)

    data = values.to_numpy(dtype=float)
    bad_times = np.flatnonzero(np.diff(data[:, 0]) <= 0)
    if bad_times.size:
        raise TraceFormatError(
            "times must be strictly increasing", line=int(bad_times[0]) + 3, path=path
        )

    logger.info(f"Loaded wind trace with {len(data)} samples from {path}")
    return WindTrace(data[:, 0], data[:, 1:])


def trace_frame(trace: WindTrace) -> pd.DataFrame:
    return pd.DataFrame({
        't': trace.times,
        'wx': trace.samples[:, 0],
        'wy': trace.samples[:, 1],
        'wz': trace.samples[:, 2],
    })


def write_trace(trace: WindTrace, path: str) -> str:
    return _write(trace_frame(trace), path)


class TraceCSVHandler:
    """
    Cached access to one wind trace file.

    Provides:
    - Trace loading with reload on file change
    - Statistics estimation for controller design
    """

    def __init__(self, csv_path: str):
        """
        Initialize the trace handler.

        Args:
            csv_path: Path to the wind trace CSV file
        """
        self.csv_path = csv_path
        self._trace: Optional[WindTrace] = None
        self._last_modified: Optional[float] = None

    def _check_file_changed(self) -> bool:
        """Check if the trace file has been modified since last load."""
        try:
            current_mtime = os.path.getmtime(self.csv_path)
            return self._last_modified is None or current_mtime > self._last_modified
        except OSError:
            return True

    def load(self, force: bool = False) -> WindTrace:
        """
        Load the trace, with caching.

        Args:
            force: Force reload even if cached

        Returns:
            WindTrace
        """
        if not force and self._trace is not None and not self._check_file_changed():
            return self._trace

        self._trace = read_trace(self.csv_path)
        self._last_modified = os.path.getmtime(self.csv_path)
        return self._trace

    def get_statistics(self) -> WindModel:
        """Mean and unbiased covariance of the trace samples."""
        return estimate_stats(self.load())


# =========================================================================
# RESULT TABLES
# =========================================================================
def runlog_frame(log: RunLog) -> pd.DataFrame:
    """
    One row per grid time.

    Columns: t, state (px..vz), input (omega_x..f_c), wind_x..wind_z,
    reference state (px_ref..vz_ref), tracking error ex, ey, ez.
    """
    columns: Dict[str, np.ndarray] = {'t': log.times}
    for i, label in enumerate(STATE_LABELS):
        columns[label] = log.states[:, i]
    for i, label in enumerate(INPUT_LABELS):
        columns[label] = log.inputs[:, i]
    for i, axis in enumerate(AXES):
        columns[f"wind_{axis}"] = log.wind[:, i]
    for i, label in enumerate(STATE_LABELS):
        columns[f"{label}_ref"] = log.references[:, i]
    errors = log.errors
    for i, axis in enumerate(AXES):
        columns[f"e{axis}"] = errors[:, i]
    return pd.DataFrame(columns)


def metrics_frame(report: MetricsReport) -> pd.DataFrame:
    """Per reference point: variance, std, RMSE and mean error per axis."""
    columns: Dict[str, np.ndarray] = {'k': np.arange(len(report.times)), 't': report.times}
    columns.update(_axis_columns('var', report.variance))
    columns.update(_axis_columns('std', report.std))
    columns.update(_axis_columns('rmse', report.rmse))
    columns.update(_axis_columns('mean_err', report.mean_error))
    return pd.DataFrame(columns)


def costs_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame({
        'run': np.arange(report.n_runs),
        'seed': [str(s) for s in report.seeds],
        'cost': report.costs,
    })


def sweep_frame(sweep: SweepReport) -> pd.DataFrame:
    """One row per gamma: horizon-averaged variance, std and RMSE, cost moments."""
    rows: List[Dict[str, float]] = []
    for gamma, report in zip(sweep.gammas, sweep.reports):
        summary = report.time_averaged()
        row = {'gamma': gamma}
        for key in ('variance', 'std', 'rmse'):
            prefix = 'var' if key == 'variance' else key
            for i, axis in enumerate(AXES):
                row[f"{prefix}_{axis}"] = summary[key][i]
        row.update({
            'cost_mean': report.cost_mean,
            'cost_var': report.cost_var,
            'objective': report.objective,
            'n_runs': report.n_runs,
        })
        rows.append(row)
    return pd.DataFrame(rows)


def comparison_frame(lqr: MetricsReport, mcv: MetricsReport) -> pd.DataFrame:
    """Per reference point: LQR and MCV variance / RMSE and the variance ratio LQR/MCV."""
    ratio = compare_reports(lqr, mcv)['variance_ratio']
    columns: Dict[str, np.ndarray] = {'k': np.arange(len(lqr.times)), 't': lqr.times}
    columns.update(_axis_columns('var_lqr', lqr.variance))
    columns.update(_axis_columns('var_mcv', mcv.variance))
    columns.update(_axis_columns('ratio', ratio))
    columns.update(_axis_columns('rmse_lqr', lqr.rmse))
    columns.update(_axis_columns('rmse_mcv', mcv.rmse))
    return pd.DataFrame(columns)


def gains_frame(schedule: GainSchedule) -> pd.DataFrame:
    """K(t) and, when stored, M(t) and H(t) flattened to ``X_i_j`` columns."""
    columns: Dict[str, np.ndarray] = {'t': schedule.times}
    blocks = [('K', schedule.gains), ('M', schedule.M_traj), ('H', schedule.H_traj)]
    for name, traj in blocks:
        if traj is None:
            continue
        rows, cols = traj.shape[1:]
        for i in range(rows):
            for j in range(cols):
                columns[f"{name}_{i}_{j}"] = traj[:, i, j]
    return pd.DataFrame(columns)


class ResultWriter:
    """
    Writes experiment artifacts under one output directory.

    Every path handed out is inside ``output_dir``; ``written`` records the
    files in write order.
    """

    def __init__(self, output_dir: str):
        self.output_dir = os.path.abspath(output_dir)
        self.written: List[str] = []
        os.makedirs(self.output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _save(self, df: pd.DataFrame, name: str) -> str:
        path = _write(df, self.path(name))
        self.written.append(path)
        return path

    def write_runlog(self, log: RunLog, label: str) -> str:
        return self._save(runlog_frame(log), f"runlog_{label}.csv")

    def write_metrics(self, report: MetricsReport, label: str) -> str:
        return self._save(metrics_frame(report), f"metrics_{label}.csv")

    def write_costs(self, report: MetricsReport, label: str) -> str:
        return self._save(costs_frame(report), f"costs_{label}.csv")

    def write_sweep(self, sweep: SweepReport) -> str:
        return self._save(sweep_frame(sweep), "sweep.csv")

    def write_comparison(self, lqr: MetricsReport, mcv: MetricsReport) -> str:
        return self._save(comparison_frame(lqr, mcv), "comparison.csv")

    def write_gains(self, schedule: GainSchedule, label: str) -> str:
        return self._save(gains_frame(schedule), f"gains_{label}.csv")

    def write_trace(self, trace: WindTrace, name: str) -> str:
        return self._save(trace_frame(trace), name)
