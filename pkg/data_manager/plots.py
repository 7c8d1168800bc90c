"""
Plots - Figures From Written CSV Files
======================================

Every figure is rebuilt from CSV files already in the output directory, so
deleting a plot loses no information. Figures are written as self-contained
plotly HTML (plotly.js embedded); the browser renders them as SVG and
the toolbar download button saves SVG.
"""

import os
import logging
from typing import Dict, List, Sequence

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

logger = logging.getLogger(__name__)

AXES = ('x', 'y', 'z')
INPUT_COLUMNS = ('omega_x', 'omega_y', 'omega_z', 'f_c')


SAVE_CONFIG = {"toImageButtonOptions": {"format": "svg"}}


def _save(fig: go.Figure, path: str) -> str:
    fig.write_html(path, include_plotlyjs=True, full_html=True, config=SAVE_CONFIG)
    logger.info(f"Wrote plot {path}")
    return path


def _read(output_dir: str, name: str) -> pd.DataFrame:
    return pd.read_csv(os.path.join(output_dir, name))


# =========================================================================
# HOVER
# =========================================================================
def hover_trajectory(output_dir: str, labels: Sequence[str]) -> str:
    """Position vs time of the first run for each gamma."""
    fig = make_subplots(rows=3, cols=1, shared_xaxes=True, subplot_titles=[f"p_{a} (m)" for a in AXES])
    for label in labels:
        df = _read(output_dir, f"runlog_gamma_{label}.csv")
        for row, axis in enumerate(AXES, start=1):
            fig.add_trace(
                go.Scatter(x=df['t'], y=df[f"p{axis}"], mode='lines', name=f"gamma={label}",
                           legendgroup=label, showlegend=row == 1),
                row=row, col=1,
            )
    ref = _read(output_dir, f"runlog_gamma_{labels[0]}.csv")
    for row, axis in enumerate(AXES, start=1):
        fig.add_trace(
            go.Scatter(x=ref['t'], y=ref[f"p{axis}_ref"], mode='lines', name='reference',
                       line={'dash': 'dash', 'color': 'black'}, legendgroup='ref', showlegend=row == 1),
            row=row, col=1,
        )
    fig.update_xaxes(title_text='t (s)', row=3, col=1)
    fig.update_layout(title='Hover position vs time')
    return _save(fig, os.path.join(output_dir, 'hover_trajectory.html'))


def _sweep_bars(output_dir: str, prefix: str, title: str, unit: str, name: str) -> str:
    df = _read(output_dir, 'sweep.csv')
    fig = go.Figure()
    for axis in AXES:
        fig.add_trace(go.Bar(x=df['gamma'].astype(str), y=df[f"{prefix}_{axis}"], name=axis))
    fig.update_layout(title=title, barmode='group', xaxis_title='gamma', yaxis_title=unit)
    return _save(fig, os.path.join(output_dir, name))


def hover_plots(output_dir: str, labels: Sequence[str]) -> List[str]:
    """Trajectory, variance-vs-gamma and RMSE-vs-gamma figures."""
    return [
        hover_trajectory(output_dir, labels),
        _sweep_bars(output_dir, 'var', 'Position error variance vs gamma', 'm^2', 'hover_variance.html'),
        _sweep_bars(output_dir, 'rmse', 'Position RMSE vs gamma', 'm', 'hover_rmse.html'),
    ]


# =========================================================================
# TRACKING
# =========================================================================
def _runlogs(output_dir: str) -> Dict[str, pd.DataFrame]:
    return {label: _read(output_dir, f"runlog_{label}.csv") for label in ('lqr', 'mcv')}


def track_trajectory(output_dir: str) -> str:
    """Horizontal path and altitude of the first run, both controllers."""
    logs = _runlogs(output_dir)
    fig = make_subplots(rows=1, cols=2, subplot_titles=['x-y path (m)', 'altitude (m)'])
    ref = logs['lqr']
    fig.add_trace(go.Scatter(x=ref['px_ref'], y=ref['py_ref'], mode='lines', name='reference',
                             line={'dash': 'dash', 'color': 'black'}), row=1, col=1)
    fig.add_trace(go.Scatter(x=ref['t'], y=ref['pz_ref'], mode='lines', name='reference',
                             line={'dash': 'dash', 'color': 'black'}, showlegend=False), row=1, col=2)
    for label, df in logs.items():
        fig.add_trace(go.Scatter(x=df['px'], y=df['py'], mode='lines', name=label.upper(),
                                 legendgroup=label), row=1, col=1)
        fig.add_trace(go.Scatter(x=df['t'], y=df['pz'], mode='lines', name=label.upper(),
                                 legendgroup=label, showlegend=False), row=1, col=2)
    fig.update_layout(title='Tracking: first Monte Carlo run')
    return _save(fig, os.path.join(output_dir, 'track_trajectory.html'))


def _comparison(output_dir: str, left: str, right: str, title: str, unit: str, name: str) -> str:
    df = _read(output_dir, 'comparison.csv')
    fig = make_subplots(rows=3, cols=1, shared_xaxes=True, subplot_titles=[f"{a} ({unit})" for a in AXES])
    for row, axis in enumerate(AXES, start=1):
        fig.add_trace(go.Scatter(x=df['t'], y=df[f"{left}_{axis}"], mode='lines', name='LQR',
                                 legendgroup='lqr', showlegend=row == 1), row=row, col=1)
        fig.add_trace(go.Scatter(x=df['t'], y=df[f"{right}_{axis}"], mode='lines', name='MCV',
                                 legendgroup='mcv', showlegend=row == 1), row=row, col=1)
    fig.update_xaxes(title_text='t (s)', row=3, col=1)
    fig.update_layout(title=title)
    return _save(fig, os.path.join(output_dir, name))


def track_inputs(output_dir: str) -> str:
    """Applied inputs of the first run, both controllers."""
    logs = _runlogs(output_dir)
    fig = make_subplots(rows=4, cols=1, shared_xaxes=True, subplot_titles=list(INPUT_COLUMNS))
    for label, df in logs.items():
        for row, column in enumerate(INPUT_COLUMNS, start=1):
            fig.add_trace(go.Scatter(x=df['t'], y=df[column], mode='lines', name=label.upper(),
                                     legendgroup=label, showlegend=row == 1), row=row, col=1)
    fig.update_xaxes(title_text='t (s)', row=4, col=1)
    fig.update_layout(title='Control inputs: first Monte Carlo run')
    return _save(fig, os.path.join(output_dir, 'track_inputs.html'))


def track_plots(output_dir: str) -> List[str]:
    """Trajectory, per-point variance, per-point RMSE and input figures."""
    return [
        track_trajectory(output_dir),
        _comparison(output_dir, 'var_lqr', 'var_mcv', 'Per-point error variance', 'm^2', 'track_variance.html'),
        _comparison(output_dir, 'rmse_lqr', 'rmse_mcv', 'Per-point RMSE', 'm', 'track_rmse.html'),
        track_inputs(output_dir),
    ]
