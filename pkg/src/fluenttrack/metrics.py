"""CLEAR-MOT evaluation and visibility-state estimation metrics.

Per-frame correspondences are solved by exact min-cost bipartite matching
among pairs passing the gate, with a persistence preference so previously
matched pairs win ties. Identity switches count changes of a ground-truth
track's matched prediction id; fragmentations count matched -> unmatched ->
matched toggles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Trajectory, VisibilityState

PERSISTENCE_TIEBREAK = 1e-9
INFEASIBLE = 1e9


@dataclass(frozen=True)
class TrackObservation:
    """One (frame, id) observation of either ground truth or a prediction."""

    frame: int
    object_id: int
    location: Optional[np.ndarray] = None
    bbox: Optional[Tuple[float, float, float, float]] = None
    state: Optional[VisibilityState] = None


@dataclass(frozen=True)
class Gate:
    """Match feasibility rule: ground-plane distance or box IoU."""

    kind: str = "distance"  # "distance" | "iou"
    threshold: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("distance", "iou"):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def cost_and_quality(self, gt: TrackObservation, pred: TrackObservation):
        """Returns (matching cost, match quality in [0, 1]) or None if gated out."""
        if self.kind == "distance":
            if gt.location is None or pred.location is None:
                return None
            d = float(np.linalg.norm(gt.location - pred.location))
            if d > self.threshold:
                return None
            return d, 1.0 - d / self.threshold
        iou = _bbox_iou(gt.bbox, pred.bbox)
        if iou < self.threshold:
            return None
        return 1.0 - iou, iou


def _bbox_iou(a, b) -> float:
    if a is None or b is None:
        return 0.0
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    x1, y1 = max(ax, bx), max(ay, by)
    x2, y2 = min(ax + aw, bx + bw), min(ay + ah, by + bh)
    inter = max(0.0, x2 - x1) * max(0.0, y2 - y1)
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


@dataclass
class MatchResult:
    """Frame-level correspondences and the accumulated CLEAR error counts."""

    matches: Dict[int, Tuple[Tuple[int, int], ...]] = field(default_factory=dict)
    fp: int = 0
    fn: int = 0
    ids: int = 0
    frag: int = 0
    quality_sum: float = 0.0
    n_matches: int = 0
    frame_precisions: List[float] = field(default_factory=list)
    gt_total: int = 0


def match_frames(
    gt: Sequence[TrackObservation],
    pred: Sequence[TrackObservation],
    gate: Gate = Gate(),
) -> MatchResult:
    """Optimal per-frame one-to-one assignment with persistence preference."""
    gt_frames: Dict[int, List[TrackObservation]] = {}
    pred_frames: Dict[int, List[TrackObservation]] = {}
    for obs in gt:
        bucket = gt_frames.setdefault(obs.frame, [])
        if any(o.object_id == obs.object_id for o in bucket):
            raise ValueError(f"duplicate gt id {obs.object_id} in frame {obs.frame}")
        bucket.append(obs)
    for obs in pred:
        bucket = pred_frames.setdefault(obs.frame, [])
        if any(o.object_id == obs.object_id for o in bucket):
            raise ValueError(f"duplicate prediction id {obs.object_id} in frame {obs.frame}")
        bucket.append(obs)

    result = MatchResult(gt_total=len(gt))
    last_pred_of: Dict[int, int] = {}   # gt id -> last matched pred id
    was_matched: Dict[int, bool] = {}   # gt id -> matched at its previous appearance
    seen_matched: Dict[int, bool] = {}  # gt id -> ever matched before

    frames = sorted(set(gt_frames) | set(pred_frames))
    for frame in frames:
        gts = sorted(gt_frames.get(frame, []), key=lambda o: o.object_id)
        preds = sorted(pred_frames.get(frame, []), key=lambda o: o.object_id)
        pairs: Tuple[Tuple[int, int], ...] = ()
        if gts and preds:
            cost = np.full((len(gts), len(preds)), INFEASIBLE)
            quality = np.zeros((len(gts), len(preds)))
            for i, g in enumerate(gts):
                for j, p in enumerate(preds):
                    cq = gate.cost_and_quality(g, p)
                    if cq is None:
                        continue
                    c, q = cq
                    if last_pred_of.get(g.object_id) == p.object_id:
                        c -= PERSISTENCE_TIEBREAK
                    cost[i, j] = c
                    quality[i, j] = q
            rows, cols = linear_sum_assignment(cost)
            chosen = []
            for i, j in zip(rows, cols):
                if cost[i, j] >= INFEASIBLE:
                    continue
                chosen.append((i, j))
            pairs = tuple(
                (gts[i].object_id, preds[j].object_id) for i, j in sorted(chosen)
            )
            qualities = [quality[i, j] for i, j in sorted(chosen)]
        else:
            qualities = []

        matched_gt = {g for g, _ in pairs}
        matched_pred = {p for _, p in pairs}
        result.matches[frame] = pairs
        result.fn += len(gts) - len(matched_gt)
        result.fp += len(preds) - len(matched_pred)
        result.n_matches += len(pairs)
        result.quality_sum += float(sum(qualities))
        if pairs:
            result.frame_precisions.append(float(np.mean(qualities)))

        for g, p in pairs:
            if g in last_pred_of and last_pred_of[g] != p:
                result.ids += 1
            last_pred_of[g] = p
        for g_obs in gts:
            gid = g_obs.object_id
            hit = gid in matched_gt
            if hit and seen_matched.get(gid, False) and not was_matched.get(gid, True):
                result.frag += 1
            was_matched[gid] = hit
            if hit:
                seen_matched[gid] = True
    return result


@dataclass(frozen=True)
class ClearMetrics:
    mota: float
    motp: float
    moda: float
    modp: float
    fp: int
    fn: int
    ids: int
    frag: int

    def as_dict(self) -> Dict[str, float]:
        return {
            "MOTA": self.mota, "MOTP": self.motp, "MODA": self.moda, "MODP": self.modp,
            "FP": self.fp, "FN": self.fn, "IDS": self.ids, "Frag": self.frag,
        }


def clear_metrics(match: MatchResult, gt_count: int) -> ClearMetrics:
    """The eight CLEAR scores from an accumulated match result.

    MOTA may go negative when FP + FN + IDS exceeds the ground-truth count.
    """
    if gt_count <= 0:
        raise ValueError("gt_count must be positive")
    motp = match.quality_sum / match.n_matches if match.n_matches else 0.0
    modp = (
        float(np.mean(match.frame_precisions)) if match.frame_precisions else 0.0
    )
    return ClearMetrics(
        mota=1.0 - (match.fp + match.fn + match.ids) / gt_count,
        motp=motp,
        moda=1.0 - (match.fp + match.fn) / gt_count,
        modp=modp,
        fp=match.fp,
        fn=match.fn,
        ids=match.ids,
        frag=match.frag,
    )


STATE_ORDER = (VisibilityState.VISIBLE, VisibilityState.OCCLUDED, VisibilityState.CONTAINED)


@dataclass(frozen=True)
class FluentReport:
    """Confusion over matched frame pairs (rows: truth, cols: prediction)."""

    confusion: np.ndarray
    precision: Dict[VisibilityState, float]
    recall: Dict[VisibilityState, float]

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        return {
            s.value: {"precision": self.precision[s], "recall": self.recall[s]}
            for s in STATE_ORDER
        }


def fluent_metrics(
    gt: Sequence[TrackObservation],
    pred: Sequence[TrackObservation],
    match: MatchResult,
) -> FluentReport:
    """Per-state precision/recall over matched (gt, pred) frame pairs.

    States without any support (no true or predicted instance among the
    matched pairs) report NaN.
    """
    gt_state = {(o.frame, o.object_id): o.state for o in gt}
    pred_state = {(o.frame, o.object_id): o.state for o in pred}
    idx = {s: i for i, s in enumerate(STATE_ORDER)}
    confusion = np.zeros((3, 3), dtype=int)
    for frame, pairs in match.matches.items():
        for g, p in pairs:
            gs = gt_state.get((frame, g))
            ps = pred_state.get((frame, p))
            if gs is None or ps is None:
                continue
            confusion[idx[gs], idx[ps]] += 1
    precision = {}
    recall = {}
    for s in STATE_ORDER:
        i = idx[s]
        col = confusion[:, i].sum()
        row = confusion[i, :].sum()
        precision[s] = confusion[i, i] / col if col else float("nan")
        recall[s] = confusion[i, i] / row if row else float("nan")
    return FluentReport(confusion=confusion, precision=precision, recall=recall)


# ---------------------------------------------------------------------------
# adapters
# ---------------------------------------------------------------------------

def trajectories_to_observations(trajectories: Sequence[Trajectory]) -> List[TrackObservation]:
    out = []
    for traj in trajectories:
        for point in traj.points:
            out.append(
                TrackObservation(
                    frame=point.frame,
                    object_id=traj.object_id,
                    location=point.location,
                    state=point.state,
                )
            )
    return out


def evaluate_trajectories(
    gt: Sequence[TrackObservation],
    trajectories: Sequence[Trajectory],
    gate: Gate = Gate(),
) -> Tuple[ClearMetrics, FluentReport, MatchResult]:
    """Convenience wrapper: match, CLEAR scores, and fluent report."""
    pred = trajectories_to_observations(trajectories)
    match = match_frames(gt, pred, gate)
    return clear_metrics(match, len(gt)), fluent_metrics(gt, pred, match), match
