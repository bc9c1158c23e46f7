"""Classification accuracy and throughput reporting.

Leaf is the positive class throughout: TP counts correctly predicted leaf
points, TN correctly predicted wood, FP wood points predicted leaf, FN leaf
points predicted wood. Degenerate single-class inputs yield 0 for the
agreement coefficients together with a warning, never NaN, so batch reports
aggregate cleanly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cloud import ClassLabel
from .errors import ParameterError


class DegenerateMetricWarning(UserWarning):
    """A metric was forced to 0 because its denominator vanished."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion matrix with leaf as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _validated_labels(values: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ParameterError(f"{name} labels must be one-dimensional")
    arr = arr.astype(np.int64, copy=False)
    bad = (arr != ClassLabel.WOOD) & (arr != ClassLabel.LEAF)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ParameterError(
            f"{name} labels must be 0 (wood) or 1 (leaf); "
            f"index {i} holds {arr[i]}")
    return arr


def confusion(predicted: np.ndarray, reference: np.ndarray) -> ConfusionCounts:
    """Count the four confusion cells between two complete labelings."""
    pred = _validated_labels(predicted, "predicted")
    ref = _validated_labels(reference, "reference")
    if pred.size != ref.size:
        raise ParameterError(
            f"label lengths differ: predicted {pred.size}, reference {ref.size}")
    pred_leaf = pred == ClassLabel.LEAF
    ref_leaf = ref == ClassLabel.LEAF
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred_leaf & ref_leaf)),
        tn=int(np.count_nonzero(~pred_leaf & ~ref_leaf)),
        fp=int(np.count_nonzero(pred_leaf & ~ref_leaf)),
        fn=int(np.count_nonzero(~pred_leaf & ref_leaf)))


def overall_accuracy(counts: ConfusionCounts) -> float:
    """Fraction of points assigned their reference class."""
    n = counts.total
    if n <= 0:
        raise ParameterError("overall accuracy needs at least one point")
    return (counts.tp + counts.tn) / n


def kappa(counts: ConfusionCounts) -> float:
    """Cohen's kappa: observed agreement corrected for chance agreement.

    When both labelings are single-class the chance agreement is 1 and the
    coefficient is undefined; 0 is returned with a DegenerateMetricWarning.
    """
    n = counts.total
    if n <= 0:
        raise ParameterError("kappa needs at least one point")
    # counts promoted to float before multiplying; products overflow int64
    # near a billion points
    tp, tn, fp, fn = (float(v) for v in (counts.tp, counts.tn, counts.fp, counts.fn))
    p_observed = (tp + tn) / n
    p_chance = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (float(n) * n)
    if p_chance == 1.0:
        warnings.warn("single-class labelings make kappa undefined; returning 0",
                      DegenerateMetricWarning, stacklevel=2)
        return 0.0
    return (p_observed - p_chance) / (1.0 - p_chance)


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient of the two labelings.

    When any marginal is empty the denominator vanishes and 0 is returned
    with a DegenerateMetricWarning.
    """
    if counts.total <= 0:
        raise ParameterError("mcc needs at least one point")
    tp, tn, fp, fn = (float(v) for v in (counts.tp, counts.tn, counts.fp, counts.fn))
    factors = (tp + fp, tp + fn, tn + fp, tn + fn)
    if any(f == 0.0 for f in factors):
        warnings.warn("an empty class marginal makes mcc undefined; returning 0",
                      DegenerateMetricWarning, stacklevel=2)
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(math.prod(factors))


def throughput(elapsed_seconds: float, point_count: int) -> tuple[float, float]:
    """Processing rate as (points per second, milliseconds per million points)."""
    if elapsed_seconds <= 0:
        raise ParameterError(f"elapsed time must be > 0, got {elapsed_seconds}")
    if point_count <= 0:
        raise ParameterError(f"point count must be > 0, got {point_count}")
    points_per_second = point_count / elapsed_seconds
    ms_per_million = elapsed_seconds * 1e9 / point_count
    return points_per_second, ms_per_million


@dataclass(frozen=True)
class AccuracyReport:
    """Complete evaluation of one classified cloud against its reference."""

    counts: ConfusionCounts
    oa: float
    kappa: float
    mcc: float
    elapsed_seconds: float
    points_per_second: float
    degenerate: bool = False

    @property
    def ms_per_million(self) -> float:
        return self.elapsed_seconds * 1e9 / self.counts.total

    def as_table(self) -> str:
        """Human-readable summary, one quantity per line."""
        c = self.counts
        rows = [
            ("points", f"{c.total}"),
            ("true leaf (tp)", f"{c.tp}"),
            ("true wood (tn)", f"{c.tn}"),
            ("false leaf (fp)", f"{c.fp}"),
            ("false wood (fn)", f"{c.fn}"),
            ("overall accuracy", f"{self.oa:.4f}"),
            ("kappa", f"{self.kappa:.4f}"),
            ("mcc", f"{self.mcc:.4f}"),
            ("elapsed", f"{self.elapsed_seconds * 1e3:.1f} ms"),
            ("per million points", f"{self.ms_per_million:.1f} ms"),
        ]
        if self.degenerate:
            rows.append(("note", "degenerate single-class input; coefficients forced to 0"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)

    def as_key_values(self) -> str:
        """Machine-readable form, one key=value per line."""
        c = self.counts
        pairs = [
            ("tp", str(c.tp)),
            ("tn", str(c.tn)),
            ("fp", str(c.fp)),
            ("fn", str(c.fn)),
            ("oa", f"{self.oa:.6f}"),
            ("kappa", f"{self.kappa:.6f}"),
            ("mcc", f"{self.mcc:.6f}"),
            ("elapsed_ms", f"{self.elapsed_seconds * 1e3:.3f}"),
            ("ms_per_million", f"{self.ms_per_million:.3f}"),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs)


def evaluate(predicted: np.ndarray, reference: np.ndarray,
             elapsed_seconds: float) -> AccuracyReport:
    """Confusion counts plus all three coefficients and throughput."""
    counts = confusion(predicted, reference)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateMetricWarning)
        oa = overall_accuracy(counts)
        k = kappa(counts)
        m = mcc(counts)
    degenerate = any(issubclass(w.category, DegenerateMetricWarning) for w in caught)
    points_per_second, _ = throughput(elapsed_seconds, counts.total)
    return AccuracyReport(counts=counts, oa=oa, kappa=k, mcc=m,
                          elapsed_seconds=elapsed_seconds,
                          points_per_second=points_per_second,
                          degenerate=degenerate)
