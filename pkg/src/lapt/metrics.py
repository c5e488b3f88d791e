"""Intersection-over-union and weighted binary cross-entropy.

IoU with an empty union is undefined and reported as None (JSON null), never
silently 0, so per-scene averages are not dragged down by absent classes.
Aggregate IoU should be computed from summed counts, not by averaging
per-scene ratios.
"""

from dataclasses import dataclass

import numpy as np

from .groundtruth import SemanticGrid

# Default weight applied to positive cells in the cross-entropy.
POS_WEIGHT_DEFAULT = 2.13


def _as_binary(grid: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(grid)
    if a.dtype == bool:
        return a
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be binary")
    return a.astype(bool)


def overlap_counts(pred, gt) -> tuple[int, int, int, int]:
    """(intersection, union, pred-positive, gt-positive) cell counts."""
    p = _as_binary(pred, "pred")
    g = _as_binary(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"grid shapes differ: {p.shape} vs {g.shape}")
    inter = int(np.count_nonzero(p & g))
    union = int(np.count_nonzero(p | g))
    return inter, union, int(np.count_nonzero(p)), int(np.count_nonzero(g))


def iou(pred, gt) -> float | None:
    """|pred AND gt| / |pred OR gt|; None when the union is empty."""
    inter, union, _, _ = overlap_counts(pred, gt)
    if union == 0:
        return None
    return inter / union


def bce_loss(logits, gt, pos_weight: float = POS_WEIGHT_DEFAULT) -> float:
    """Mean weighted binary cross-entropy of logits against binary targets.

    Uses the log-sum-exp form, so the result is finite for any finite logit:
    -[w*y*log(sigmoid(l)) + (1-y)*log(1-sigmoid(l))] with
    log(sigmoid(l)) = -softplus(-l) and log(1-sigmoid(l)) = -softplus(l).
    """
    l = np.asarray(logits, dtype=np.float64)
    y = _as_binary(gt, "gt").astype(np.float64)
    if l.shape != y.shape:
        raise ValueError(f"grid shapes differ: {l.shape} vs {y.shape}")
    if not np.all(np.isfinite(l)):
        raise ValueError("logits must be finite")
    if not pos_weight > 0:
        raise ValueError(f"pos_weight must be positive, got {pos_weight!r}")
    softplus_neg = np.maximum(-l, 0.0) + np.log1p(np.exp(-np.abs(l)))  # -log sigmoid(l)
    softplus_pos = np.maximum(l, 0.0) + np.log1p(np.exp(-np.abs(l)))  # -log(1 - sigmoid(l))
    per_cell = pos_weight * y * softplus_neg + (1.0 - y) * softplus_pos
    return float(per_cell.mean())


@dataclass(frozen=True)
class ClassScore:
    iou: float | None
    intersection: int
    union: int
    pred_positive: int
    gt_positive: int


@dataclass(frozen=True)
class EvalReport:
    """Per-class IoU and overlap counts, plus an optional loss scalar."""

    classes: tuple[str, ...]
    scores: tuple[ClassScore, ...]
    threshold: float
    loss: float | None = None
    pos_weight: float | None = None

    @classmethod
    def from_grids(
        cls, pred: SemanticGrid, gt: SemanticGrid, threshold: float = 0.5
    ) -> "EvalReport":
        """Score a prediction grid against binary ground truth.

        Binary predictions are compared directly; probability predictions
        are thresholded first.
        """
        if not gt.is_binary:
            raise ValueError("ground truth grid must be binary")
        if pred.classes != gt.classes:
            raise ValueError(
                f"class lists differ: {list(pred.classes)} vs {list(gt.classes)}"
            )
        if pred.values.shape != gt.values.shape:
            raise ValueError(
                f"grid shapes differ: {pred.values.shape} vs {gt.values.shape}"
            )
        binary = pred.values.astype(bool) if pred.is_binary else pred.values > threshold
        return cls(gt.classes, cls._score(binary, gt), threshold)

    @classmethod
    def from_logits(
        cls,
        logits: np.ndarray,
        gt: SemanticGrid,
        threshold: float = 0.5,
        pos_weight: float | None = None,
    ) -> "EvalReport":
        """Score raw logit layers: threshold at log(t / (1-t)), optional loss.

        Logits are not probabilities, so they arrive as a bare (C, X, Y)
        array rather than a SemanticGrid.
        """
        if not gt.is_binary:
            raise ValueError("ground truth grid must be binary")
        l = np.asarray(logits, dtype=np.float64)
        if l.shape != gt.values.shape:
            raise ValueError(f"grid shapes differ: {l.shape} vs {gt.values.shape}")
        if not np.all(np.isfinite(l)):
            raise ValueError("logits must be finite")
        if not 0.0 < threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {threshold!r}")
        cut = float(np.log(threshold / (1.0 - threshold)))
        loss = None if pos_weight is None else bce_loss(l, gt.values, pos_weight)
        return cls(gt.classes, cls._score(l > cut, gt), threshold, loss, pos_weight)

    @staticmethod
    def _score(binary: np.ndarray, gt: SemanticGrid) -> tuple[ClassScore, ...]:
        scores = []
        for c in range(len(gt.classes)):
            inter, union, pp, gp = overlap_counts(binary[c], gt.values[c])
            scores.append(
                ClassScore(None if union == 0 else inter / union, inter, union, pp, gp)
            )
        return tuple(scores)

    def to_dict(self) -> dict:
        out = {
            "threshold": self.threshold,
            "classes": {
                name: {
                    "iou": s.iou,
                    "intersection": s.intersection,
                    "union": s.union,
                    "pred_positive": s.pred_positive,
                    "gt_positive": s.gt_positive,
                }
                for name, s in zip(self.classes, self.scores)
            },
        }
        if self.pos_weight is not None:
            out["pos_weight"] = self.pos_weight
            out["loss"] = self.loss
        return out

    def format_table(self, row_label: str = "pred") -> str:
        """One header line of class names, one row of IoU percentages."""
        names = [str(c) for c in self.classes]
        cells = [
            "n/a" if s.iou is None else f"{100.0 * s.iou:.2f}%" for s in self.scores
        ]
        widths = [max(len(n), len(v)) for n, v in zip(names, cells)]
        label_w = max(len(row_label), len("class"))
        header = "  ".join(["class".ljust(label_w)] + [n.ljust(w) for n, w in zip(names, widths)])
        row = "  ".join([row_label.ljust(label_w)] + [v.ljust(w) for v, w in zip(cells, widths)])
        return header + "\n" + row
