"""Relationship-retrieval metrics: Recall@K and mean Recall@K.

Predictions are per-image ranked (subject, predicate, object, score)
lists; ground truth is per-image triplet sets. mR@K computes R@K for
each predicate class present in the ground truth (candidate list stays
the full ranking) and averages the classes without weighting, countering
predicate-frequency imbalance.
"""

import json
from dataclasses import dataclass


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RetrievalInstance:
    image_id: str
    # ranked (subject, predicate, object) triplets, scores non-increasing
    predictions: tuple
    gt: frozenset  # ground-truth triplets


def build_instances(pred_by_image, gt_by_image):
    """Join per-image predictions and ground truth into instances.

    Predictions are (s, p, o, score) with non-increasing scores; ties keep
    input order (stable, deterministic under re-reads).
    """
    instances = []
    for image_id in gt_by_image:
        preds = pred_by_image.get(image_id, [])
        last = None
        triplets = []
        for s, p, o, score in preds:
            if last is not None and score > last:
                raise MetricsError(
                    f"image {image_id}: prediction scores must be non-increasing"
                )
            last = score
            triplets.append((s, p, o))
        instances.append(
            RetrievalInstance(
                image_id=image_id,
                predictions=tuple(triplets),
                gt=frozenset(tuple(t) for t in gt_by_image[image_id]),
            )
        )
    return instances


def recall_at_k(instances, k):
    """Mean over images of |top-K hits| / |gt|; empty-gt images skipped."""
    if k < 1:
        raise MetricsError(f"K must be >= 1, got {k}")
    recalls = []
    for inst in instances:
        if not inst.gt:
            continue
        top = set(inst.predictions[:k])
        recalls.append(len(top & inst.gt) / len(inst.gt))
    return sum(recalls) / len(recalls) if recalls else 0.0


def mean_recall_at_k(instances, k):
    """Per-predicate-class R@K (gt restricted to the class, candidates the
    full ranking), averaged unweighted over classes present in gt."""
    if k < 1:
        raise MetricsError(f"K must be >= 1, got {k}")
    classes = sorted({p for inst in instances for (_, p, _) in inst.gt})
    if not classes:
        raise MetricsError("no ground-truth triplets: mR@K undefined")
    per_predicate = {}
    for cls in classes:
        recalls = []
        for inst in instances:
            gt_cls = {t for t in inst.gt if t[1] == cls}
            if not gt_cls:
                continue
            top = set(inst.predictions[:k])
            recalls.append(len(top & gt_cls) / len(gt_cls))
        per_predicate[cls] = sum(recalls) / len(recalls)
    mrk = sum(per_predicate.values()) / len(per_predicate)
    return mrk, per_predicate


# ---------------------------------------------------------------------------
# file formats


def load_predictions(path):
    """JSONL: {"image_id": ..., "predictions": [[s, p, o, score], ...]}"""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise MetricsError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if "image_id" not in raw or "predictions" not in raw:
                raise MetricsError(
                    f"{path}:{lineno}: expected image_id and predictions"
                )
            preds = []
            for i, entry in enumerate(raw["predictions"]):
                if len(entry) != 4:
                    raise MetricsError(
                        f"{path}:{lineno}: predictions[{i}] must be [s, p, o, score]"
                    )
                s, p, o, score = entry
                preds.append((s, p, o, float(score)))
            out[raw["image_id"]] = preds
    return out


def load_ground_truth(path):
    """JSONL: {"image_id": ..., "triplets": [[s, p, o], ...]}"""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise MetricsError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if "image_id" not in raw or "triplets" not in raw:
                raise MetricsError(f"{path}:{lineno}: expected image_id and triplets")
            triplets = []
            for i, entry in enumerate(raw["triplets"]):
                if len(entry) != 3:
                    raise MetricsError(
                        f"{path}:{lineno}: triplets[{i}] must be [s, p, o]"
                    )
                triplets.append(tuple(entry))
            out[raw["image_id"]] = triplets
    return out


def metrics_table(instances, ks):
    """R@K / mR@K table matching the supplement-style column layout."""
    header = ["metric"] + [f"@{k}" for k in ks]
    r_row = ["R"] + [f"{recall_at_k(instances, k):.4f}" for k in ks]
    mr_row = ["mR"] + [f"{mean_recall_at_k(instances, k)[0]:.4f}" for k in ks]
    widths = [max(len(row[i]) for row in (header, r_row, mr_row)) for i in range(len(header))]
    lines = []
    for row in (header, r_row, mr_row):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)
