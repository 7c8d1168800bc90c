"""
Data Generators - Synthetic Wind Traces
=======================================

Stand-ins for recorded wind data: Gaussian traces written in the same
``t,wx,wy,wz`` format that replay scenarios read.
"""

import logging
from typing import Optional

from mcv_control.wind import WindModel, WindTrace, synthesize_trace

from .csv_handler import write_trace

logger = logging.getLogger(__name__)

DEFAULT_PERIOD = 1.0


def generate_wind_trace(
    model: WindModel,
    path: str,
    samples: int,
    period: float = DEFAULT_PERIOD,
    seed: Optional[int] = None,
) -> WindTrace:
    """
    Draw a Gaussian wind trace and write it to ``path``.

    Args:
        model: Mean and per-sample covariance to draw from
        path: Output CSV path
        samples: Number of rows (>= 2)
        period: Sample spacing, s
        seed: Generator seed

    Returns:
        The written trace
    """
    trace = synthesize_trace(model, samples, period=period, seed=seed)
    write_trace(trace, path)
    logger.info(f"Generated {samples} wind samples every {period:g} s (seed={seed})")
    return trace
