"""Error-detection and classification metrics.

The retain-vs-reject problem treats correct predictions as positives.
AuROC uses the rank (Mann-Whitney) formulation with average ranks for
ties; AuPR integrates the precision-recall curve step-wise over the
distinct-confidence thresholds; FPR95 is the lowest false-positive rate
among thresholds that keep at least 95% of correct predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, NoPositives, SingleClassOnly
from .scoring import Prediction

__all__ = [
    "ScoredSample",
    "EvaluationReport",
    "auroc",
    "aupr",
    "fpr_at_tpr",
    "f1_sweep",
    "accuracy",
    "default_tau_grid",
    "evaluate_method",
    "render_report_table",
]


@dataclass
class ScoredSample:
    """Confidence (higher = more likely correct) plus the correctness bit."""

    confidence: float
    correct: bool


@dataclass
class EvaluationReport:
    method_tag: str
    auroc: float
    aupr: float
    fpr95: float
    accuracy: float
    f1_curve: list[tuple[float, float]] = field(default_factory=list)
    positives: int = 0
    negatives: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method_tag,
            "auroc": self.auroc,
            "aupr": self.aupr,
            "fpr95": self.fpr95,
            "accuracy": self.accuracy,
            "positives": self.positives,
            "negatives": self.negatives,
            "f1_curve": [[t, f] for t, f in self.f1_curve],
        }


def _split(samples: list[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    conf = np.array([s.confidence for s in samples], dtype=np.float64)
    correct = np.array([s.correct for s in samples], dtype=bool)
    if not np.isfinite(conf).all():
        raise ValueError("confidences must be finite")
    return conf, correct


def auroc(samples: list[ScoredSample]) -> float:
    """P(conf_correct > conf_error) + 0.5 P(tie), via average ranks."""
    conf, correct = _split(samples)
    n_pos = int(correct.sum())
    n_neg = conf.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassOnly(f"need both classes, got {n_pos} correct / {n_neg} errors")
    ranks = rankdata(conf)
    u = ranks[correct].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _threshold_counts(conf: np.ndarray, correct: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (tp, fp) at each distinct descending threshold.

    Entry i counts samples with confidence >= the i-th distinct value.
    """
    order = np.argsort(-conf, kind="stable")
    sorted_conf = conf[order]
    tp = np.cumsum(correct[order])
    fp = np.cumsum(~correct[order])
    # block ends: last occurrence of each distinct confidence
    last = np.r_[sorted_conf[1:] != sorted_conf[:-1], True]
    return tp[last].astype(np.float64), fp[last].astype(np.float64)


def aupr(samples: list[ScoredSample]) -> float:
    """Step-wise area under the precision-recall curve."""
    conf, correct = _split(samples)
    n_pos = int(correct.sum())
    if n_pos == 0:
        raise NoPositives("precision-recall needs at least one correct prediction")
    tp, fp = _threshold_counts(conf, correct)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return float(((recall - prev) * precision).sum())


def fpr_at_tpr(samples: list[ScoredSample], tpr_target: float = 0.95) -> float:
    """Lowest FPR among thresholds whose TPR meets the target."""
    conf, correct = _split(samples)
    n_pos = int(correct.sum())
    n_neg = conf.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassOnly(f"need both classes, got {n_pos} correct / {n_neg} errors")
    tp, fp = _threshold_counts(conf, correct)
    tpr = tp / n_pos
    fpr = fp / n_neg
    feasible = tpr >= tpr_target
    return float(fpr[feasible].min())


def default_tau_grid() -> np.ndarray:
    return np.arange(101) / 100.0


def f1_sweep(
    samples: list[ScoredSample], taus: np.ndarray | None = None
) -> list[tuple[float, float]]:
    """F1 of the correct-retention classifier per threshold.

    Samples must carry confidence = 1 - s_unc so that retaining means
    s_unc <= tau. F1 is 0 whenever nothing relevant is retained.
    """
    conf, correct = _split(samples)
    taus = default_tau_grid() if taus is None else np.asarray(taus, dtype=np.float64)
    s_unc = 1.0 - conf
    curve = []
    for tau in taus:
        retained = s_unc <= tau
        tp = int((retained & correct).sum())
        fp = int((retained & ~correct).sum())
        fn = int((~retained & correct).sum())
        denom = 2 * tp + fp + fn
        curve.append((float(tau), 2.0 * tp / denom if denom else 0.0))
    return curve


def accuracy(predictions: list[Prediction]) -> float:
    """Fraction of correct predictions."""
    if not predictions:
        raise EmptyInput("no predictions to score")
    flags = [p.correct for p in predictions]
    if any(f is None for f in flags):
        raise ValueError("predictions lack ground-truth correctness")
    return float(np.mean(flags))


def evaluate_method(
    method_tag: str,
    samples: list[ScoredSample],
    f1_samples: list[ScoredSample] | None = None,
    taus: np.ndarray | None = None,
) -> EvaluationReport:
    """All metrics for one method's scored samples.

    ``f1_samples`` (confidence = 1 - s_unc scale) feeds the tau sweep;
    when omitted the primary samples are used as-is.
    """
    conf, correct = _split(samples)
    n_pos = int(correct.sum())
    n_neg = conf.shape[0] - n_pos
    preds = [Prediction(predicted_class=-1, correct=bool(c)) for c in correct]
    return EvaluationReport(
        method_tag=method_tag,
        auroc=auroc(samples),
        aupr=aupr(samples),
        fpr95=fpr_at_tpr(samples),
        accuracy=accuracy(preds),
        f1_curve=f1_sweep(f1_samples if f1_samples is not None else samples, taus),
        positives=n_pos,
        negatives=n_neg,
    )


def render_report_table(reports: list[EvaluationReport]) -> str:
    """Aligned text table, one method per row, metric columns in percent."""
    header = f"{'Method':<12} {'AuROC':>8} {'AuPR':>8} {'FPR95':>8} {'Acc':>8}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.method_tag:<12} {100 * r.auroc:>8.2f} {100 * r.aupr:>8.2f} "
            f"{100 * r.fpr95:>8.2f} {100 * r.accuracy:>8.2f}"
        )
    return "\n".join(lines)
