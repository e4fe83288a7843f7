"""Accuracy metrics of estimated timing against post-routing labels (late-rise corner)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .arrival import PinTiming
from .corners import LR
from .graph import TimingGraph
from .sdf import DelayLabels
from .slack import SlackReport

logger = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def r2_score(pred, truth) -> float:
    """1 - MSE / Var(truth), with the population variance."""
    p, t = _pair(pred, truth)
    var = float(np.mean((t - t.mean()) ** 2))
    if var == 0.0:
        raise UndefinedMetricError("R2 is undefined for constant ground truth")
    mse = float(np.mean((p - t) ** 2))
    return 1.0 - mse / var


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


@dataclass
class EvalSummary:
    at_r2: float | None
    rat_mae: float
    slack_mae: float
    tns_delta: float
    wns_delta: float
    n_pins: int
    n_endpoints: int
    n_excluded: int = 0

    def line(self) -> str:
        def fmt(x):
            return "nan" if x is None else f"{x:.6g}"

        return " ".join(f"{k}={fmt(v) if isinstance(v, float) or v is None else v}" for k, v in asdict(self).items())

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(graph: TimingGraph, estimated: SlackReport, labels: DelayLabels, timing: PinTiming) -> EvalSummary:
    """Compare estimated AT (all pins), RAT, slack and TNS/WNS against labels.

    Label slack per endpoint is label RAT minus label AT, both late-rise.
    """
    at_pred, at_true = [], []
    for v, node in enumerate(graph.nodes):
        vals = labels.pin_at.get(node.name)
        if vals is not None and vals[LR] is not None:
            at_pred.append(float(timing.at[v][LR]))
            at_true.append(float(vals[LR]))
    rat_p, rat_t, slack_p, slack_t = [], [], [], []
    excluded = 0
    for r in estimated.endpoints:
        rat = labels.pin_rat.get(r.name)
        at = labels.pin_at.get(r.name)
        if rat is None or rat[LR] is None or at is None or at[LR] is None:
            excluded += 1
            continue
        rat_p.append(r.rat_corrected)
        rat_t.append(float(rat[LR]))
        slack_p.append(r.slack_corrected)
        slack_t.append(float(rat[LR]) - float(at[LR]))
    if excluded:
        logger.warning("%d endpoint(s) without label RAT/AT excluded from evaluation", excluded)
    if not rat_t:
        raise ValueError("no endpoint carries both RAT and AT labels")
    try:
        at_r2 = r2_score(at_pred, at_true) if at_true else None
    except UndefinedMetricError:
        logger.warning("AT labels are constant; R2 reported as undefined")
        at_r2 = None
    label_tns = float(np.sum(np.minimum(slack_t, 0.0)))
    label_wns = min(0.0, float(np.min(slack_t)))
    return EvalSummary(
        at_r2,
        mae(rat_p, rat_t),
        mae(slack_p, slack_t),
        estimated.tns - label_tns,
        estimated.wns - label_wns,
        len(at_true),
        len(rat_t),
        excluded,
    )
