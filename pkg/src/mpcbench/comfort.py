"""Comfort-band deviation shared by the MPC objective and the KPIs."""

from __future__ import annotations

import numpy as np


def comfort_deviation(t_air, lower: float, upper: float):
    """Distance (degC) of ``t_air`` outside ``[lower, upper]``; zero inside."""
    return np.maximum(lower - t_air, 0.0) + np.maximum(t_air - upper, 0.0)
