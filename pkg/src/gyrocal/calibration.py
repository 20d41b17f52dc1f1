"""Model-based turntable calibration: window averaging and least squares."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .sensor_model import Recording, Scenario


class Method(str, enum.Enum):
    BASELINE = "Baseline"
    LEARNED = "Learned"


@dataclass(frozen=True)
class CalibrationResult:
    scale: float
    bias: float
    window_s: float
    method: Method = Method.BASELINE

    def __post_init__(self):
        if not self.window_s > 0:
            raise ValueError("window_s must be > 0")
        object.__setattr__(self, "method", Method(self.method))

    def to_dict(self) -> dict:
        return {"method": self.method.value, "window_s": self.window_s,
                "scale": self.scale, "bias": self.bias}


def window_indices(fs_hz: float, t_start: float, t_end: float) -> tuple[int, int]:
    """Half-open sample range ``[ceil(t_start*fs), floor(t_end*fs))``.

    A 1e-9 guard absorbs float error in products like ``0.1 * 145``.
    """
    lo = math.ceil(t_start * fs_hz - 1e-9)
    hi = math.floor(t_end * fs_hz + 1e-9)
    return lo, hi


def mean_window(recording: Recording, t_start: float, t_end: float) -> float:
    duration = recording.duration_s
    if not (0 <= t_start < t_end <= duration + 1e-9):
        raise ValueError(f"window [{t_start}, {t_end}) outside recording of {duration} s")
    lo, hi = window_indices(recording.sample_rate_hz, t_start, t_end)
    hi = min(hi, len(recording))
    if hi <= lo:
        raise ValueError(f"window [{t_start}, {t_end}) contains no samples")
    return float(np.mean(recording.samples[lo:hi]))


def calibrate_single_axis(mean_up: float, mean_down: float, rate_dps: float,
                          window_s: float) -> CalibrationResult:
    """Closed-form scale/bias from the up and down averages.

    The down average is the raw (negative) sensor output, so
    ``mean_up - mean_down = 2 * (1 + s) * rate`` and ``mean_up + mean_down = 2 * b``.
    """
    if rate_dps == 0:
        raise ZeroDivisionError("rate_dps must be non-zero")
    if not rate_dps > 0:
        raise ValueError("rate_dps must be > 0")
    bias = (mean_up + mean_down) / 2.0
    scale = ((mean_up - mean_down) - 2.0 * rate_dps) / (2.0 * rate_dps)
    return CalibrationResult(scale=scale, bias=bias, window_s=window_s, method=Method.BASELINE)


def calibrate_scenario(scenario: Scenario, window_s: Optional[float] = None) -> CalibrationResult:
    """Baseline calibration over ``[0, window_s)``; the whole recording when ``window_s`` is None."""
    if window_s is None:
        n = min(len(scenario.up), len(scenario.down))
        mu = float(np.mean(scenario.up.samples[:n]))
        md = float(np.mean(scenario.down.samples[:n]))
        return calibrate_single_axis(mu, md, scenario.rate_dps, n / scenario.fs_hz)
    mu = mean_window(scenario.up, 0.0, window_s)
    md = mean_window(scenario.down, 0.0, window_s)
    return calibrate_single_axis(mu, md, scenario.rate_dps, window_s)


# --- six-position least squares ----------------------------------------------

POSITIONS = ("x+", "x-", "y+", "y-", "z+", "z-")


@dataclass(frozen=True, eq=False)
class SixPositionInput:
    """``averaged_measured`` is 3x6 (one column per position), ``gt_matrix`` is 4x6."""

    averaged_measured: np.ndarray
    gt_matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.averaged_measured, dtype=np.float64)
        g = np.asarray(self.gt_matrix, dtype=np.float64)
        if a.shape != (3, 6):
            raise ValueError(f"averaged_measured must be 3x6, got {a.shape}")
        if g.shape != (4, 6):
            raise ValueError(f"gt_matrix must be 4x6, got {g.shape}")
        if not np.all(g[3] == 1.0):
            raise ValueError("gt_matrix bottom row must be all ones")
        object.__setattr__(self, "averaged_measured", a)
        object.__setattr__(self, "gt_matrix", g)


def six_position_gt_matrix(rate_dps: float) -> np.ndarray:
    """True-rate matrix for the x+, x-, y+, y-, z+, z- turntable positions."""
    g = np.zeros((4, 6))
    for axis in range(3):
        g[axis, 2 * axis] = rate_dps
        g[axis, 2 * axis + 1] = -rate_dps
    g[3] = 1.0
    return g


def solve_error_matrix(measured, gt) -> np.ndarray:
    """Least-squares ``Z`` with ``measured ~= Z @ gt`` for any ``(k, p)`` / ``(d, p)`` pair.

    Equivalent to ``measured @ gt.T @ inv(gt @ gt.T)`` but solved with an SVD
    least-squares routine.  Raises ``numpy.linalg.LinAlgError`` when ``gt``
    does not have full row rank.
    """
    measured = np.atleast_2d(np.asarray(measured, dtype=np.float64))
    gt = np.atleast_2d(np.asarray(gt, dtype=np.float64))
    if measured.shape[1] != gt.shape[1]:
        raise ValueError("measured and gt must have the same number of columns")
    sol, _, rank, sv = np.linalg.lstsq(gt.T, measured.T, rcond=None)
    if rank < gt.shape[0] or sv[-1] <= sv[0] * gt.shape[1] * np.finfo(float).eps:
        raise np.linalg.LinAlgError(
            f"ground-truth matrix is rank deficient (rank {rank} < {gt.shape[0]})")
    return sol.T


def calibrate_six_position(inp: SixPositionInput) -> np.ndarray:
    """Return the 3x4 error matrix ``Z``: diagonal ``1 + s``, last column bias."""
    return solve_error_matrix(inp.averaged_measured, inp.gt_matrix)


def error_terms_from_matrix(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis (scale, bias) from an error matrix."""
    z = np.asarray(z)
    d = z.shape[0]
    return np.diag(z[:, :d]) - 1.0, z[:, d].copy()


# --- baseline accuracy vs. calibration time -------------------------------------

DEFAULT_T_GRID = tuple(range(1, 71))


def baseline_ae_curve(scenario: Scenario, gt: tuple[float, float],
                      t_grid: Iterable[float] = DEFAULT_T_GRID) -> list[tuple[float, float, float]]:
    """Absolute error of the baseline estimate using ``[0, t)`` for each ``t``."""
    scale_gt, bias_gt = gt
    out = []
    for t in t_grid:
        res = calibrate_scenario(scenario, t)
        out.append((t, abs(res.scale - scale_gt), abs(res.bias - bias_gt)))
    return out
