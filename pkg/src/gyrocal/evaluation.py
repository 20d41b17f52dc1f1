"""Accuracy and convergence-time metrics for learned vs. baseline calibration."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import DEFAULT_T_GRID, baseline_ae_curve, calibrate_scenario
from .pipeline import STRIDE, write_json
from .sensor_model import Scenario

TERMS = ("scale", "bias")
DEFAULT_WINDOWS = (2, 4, 6)
REPORT_SCHEMA = "gyrocal.report/1"
EXACT_AE = 1e-12


def absolute_error(estimate: float, gt: float) -> float:
    if not (math.isfinite(estimate) and math.isfinite(gt)):
        raise ValueError("absolute_error needs finite inputs")
    return abs(estimate - gt)


def improvement_pct(ae_baseline: float, ae_ours: float) -> float:
    """Percentage by which ``ae_ours`` improves on ``ae_baseline``."""
    if ae_baseline == 0:
        raise ZeroDivisionError("baseline AE is zero; improvement is undefined")
    return 100.0 * (ae_baseline - ae_ours) / ae_baseline


def t_conv(baseline_curve: Sequence[tuple[float, float]], ae_ours: float) -> Optional[int]:
    """First grid time at which the baseline AE is <= ``ae_ours``; ``None`` if it never is."""
    if len(baseline_curve) == 0:
        raise ValueError("empty baseline curve")
    for t, ae in baseline_curve:
        if ae <= ae_ours:
            return t
    return None


def conv_time_improvement(t_conv: float, window_s: float) -> float:
    if t_conv == 0:
        raise ZeroDivisionError("t_conv must be non-zero")
    if t_conv < window_s:
        return 0.0
    return 100.0 * (t_conv - window_s) / t_conv


# --- learned estimates --------------------------------------------------------

def window_starts(window_s: float, fs_hz: float, window_len: int, stride: int = STRIDE) -> list[int]:
    """Start offsets of every model window that fits inside ``[0, window_s)``."""
    n = int(math.floor(window_s * fs_hz + 1e-9))
    if n < window_len:
        raise ValueError(f"{window_s} s holds {n} samples, fewer than one {window_len}-sample window")
    return list(range(0, n - window_len + 1, stride))


def learned_estimate(model, scenario: Scenario, window_s: float) -> tuple[float, float]:
    """Mean model prediction over the windows contained in the first ``window_s`` seconds."""
    w = model.config.window_len
    starts = window_starts(window_s, scenario.fs_hz, w)
    gt_row = np.full(w, scenario.rate_dps)
    batch = np.stack([np.stack([scenario.up.samples[s:s + w], scenario.down.samples[s:s + w],
                                gt_row]) for s in starts])
    pred = model.predict(batch)
    return float(pred[:, 0].mean()), float(pred[:, 1].mean())


# --- report -------------------------------------------------------------------

@dataclass
class TermResult:
    ae_ours: float
    ae_baseline: float
    improvement_pct: Optional[float]
    t_conv: Optional[int]
    conv_improvement_pct: Optional[float]
    estimate_ours: float
    estimate_baseline: float


@dataclass
class WindowResult:
    scenario: str
    window_s: float
    scale: TermResult
    bias: TermResult


@dataclass
class ScenarioCurve:
    scenario: str
    gt: tuple[float, float]
    t: list[float]
    ae_scale: list[float]
    ae_bias: list[float]


@dataclass
class EvalReport:
    rows: list[WindowResult] = field(default_factory=list)
    curves: list[ScenarioCurve] = field(default_factory=list)
    config_hash: str = ""

    def to_dict(self) -> dict:
        def term(tr: TermResult):
            d = asdict(tr)
            if d["t_conv"] is None:
                d["t_conv"] = "not reached"
            return d

        return {
            "schema": REPORT_SCHEMA,
            "config_hash": self.config_hash,
            "rows": [{"scenario": r.scenario, "window_s": r.window_s,
                      "scale": term(r.scale), "bias": term(r.bias)} for r in self.rows],
            "curves": [{"scenario": c.scenario, "gt": {"scale": c.gt[0], "bias": c.gt[1]},
                        "t": c.t, "ae_scale": c.ae_scale, "ae_bias": c.ae_bias}
                       for c in self.curves],
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        if self.config_hash:
            buf.write(f"# config_hash={self.config_hash}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scenario", "window_s",
                     "scale_ae_ours", "scale_ae_baseline", "scale_improv_pct",
                     "bias_ae_ours", "bias_ae_baseline", "bias_improv_pct"])
        for r in self.rows:
            wr.writerow([r.scenario, _fmt(r.window_s),
                         _fmt(r.scale.ae_ours), _fmt(r.scale.ae_baseline), _fmt(r.scale.improvement_pct),
                         _fmt(r.bias.ae_ours), _fmt(r.bias.ae_baseline), _fmt(r.bias.improvement_pct)])
        return buf.getvalue()

    def curve_csv(self) -> str:
        """Long format: one row per (scenario, term, t); ours AE filled at evaluated windows."""
        buf = io.StringIO()
        if self.config_hash:
            buf.write(f"# config_hash={self.config_hash}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scenario", "term", "t_s", "ae_baseline", "ae_ours"])
        for c in self.curves:
            ours = {(r.window_s, name): getattr(r, name).ae_ours
                    for r in self.rows if r.scenario == c.scenario for name in TERMS}
            for name, series in (("scale", c.ae_scale), ("bias", c.ae_bias)):
                for t, ae in zip(c.t, series):
                    wr.writerow([c.scenario, name, _fmt(t), _fmt(ae), _fmt(ours.get((t, name)))])
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json", "table": out / "ae_table.csv",
                 "curves": out / "ae_curves.csv"}
        write_json(self.to_dict(), paths["report"])
        paths["table"].write_text(self.table_csv())
        paths["curves"].write_text(self.curve_csv())
        return paths


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e6):
        return str(int(v))
    return repr(float(v))


def _term_result(ae_o, ae_b, est_o, est_b, curve, window_s) -> TermResult:
    # AEs at roundoff level count as exact; both exact is no change
    if ae_b > EXACT_AE:
        imp = improvement_pct(ae_b, ae_o)
    else:
        imp = 0.0 if ae_o <= EXACT_AE else None
    tc = t_conv(curve, ae_o)
    conv = conv_time_improvement(tc, window_s) if tc is not None else None
    return TermResult(ae_o, ae_b, imp, tc, conv, est_o, est_b)


def evaluate(model, test_scenarios: Sequence[Scenario], windows: Sequence[float] = DEFAULT_WINDOWS,
             t_grid: Sequence[float] = DEFAULT_T_GRID, config_hash: str = "",
             estimator=None) -> EvalReport:
    """Compare learned and baseline calibration on labelled test scenarios.

    ``estimator(scenario, window_s) -> (scale, bias)`` overrides the model,
    which is useful for oracle checks.
    """
    if estimator is None:
        estimator = lambda sc, w: learned_estimate(model, sc, w)  # noqa: E731
    report = EvalReport(config_hash=config_hash)
    for sc in test_scenarios:
        if sc.labels is None:
            raise ValueError(f"test scenario {sc.id!r} has no labels")
        needed = max(max(windows), max(t_grid))
        if sc.duration_s + 1e-9 < needed:
            raise ValueError(f"scenario {sc.id!r} ({sc.duration_s} s) is shorter than {needed} s")
        gt = sc.labels
        curve = baseline_ae_curve(sc, gt, t_grid)
        scale_curve = [(t, a) for t, a, _ in curve]
        bias_curve = [(t, b) for t, _, b in curve]
        report.curves.append(ScenarioCurve(sc.id, gt, [c[0] for c in curve],
                                           [c[1] for c in curve], [c[2] for c in curve]))
        for w in windows:
            s_o, b_o = estimator(sc, w)
            base = calibrate_scenario(sc, w)
            report.rows.append(WindowResult(
                sc.id, w,
                _term_result(absolute_error(s_o, gt[0]), absolute_error(base.scale, gt[0]),
                             s_o, base.scale, scale_curve, w),
                _term_result(absolute_error(b_o, gt[1]), absolute_error(base.bias, gt[1]),
                             b_o, base.bias, bias_curve, w),
            ))
    return report
