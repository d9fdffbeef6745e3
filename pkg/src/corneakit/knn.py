"""K-nearest-neighbor classifier with a reject option.

Training memorizes z-score-normalized feature vectors; classification
votes among the k nearest stored samples under Euclidean distance in the
normalized space. A query is rejected when the vote is tied, or when the
k-th nearest neighbor lies beyond an optional distance threshold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, KTooLarge, ValidationError

__all__ = ["LabeledSample", "KnnModel", "Decision", "knn_fit", "knn_classify"]


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: str

    def __post_init__(self):
        arr = np.asarray(self.features, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("sample features must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("sample features must be finite")
        object.__setattr__(self, "features", arr)


@dataclass
class Decision:
    """Classification outcome: a label, or a reject with its reason."""

    label: Optional[str]  # None means Reject
    reject_reason: Optional[str]  # "vote_tie" | "distance" | None
    neighbor_ids: list[int]
    votes: dict[str, int]
    max_distance_used: float

    @property
    def rejected(self) -> bool:
        return self.label is None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "rejected": self.rejected,
            "reject_reason": self.reject_reason,
            "neighbor_ids": list(self.neighbor_ids),
            "votes": dict(self.votes),
            "max_distance_used": self.max_distance_used,
        }


@dataclass
class KnnModel:
    k: int
    reject_distance: Optional[float]
    samples: np.ndarray  # (n, d_kept) z-scored features
    labels: list[str]
    means: np.ndarray  # per ORIGINAL dimension
    stds: np.ndarray
    kept_dims: np.ndarray  # original indices with nonzero variance
    dropped_dims: list[int] = field(default_factory=list)

    @property
    def n_dims(self) -> int:
        """Dimensionality of the raw (pre-normalization) feature space."""
        return int(self.means.shape[0])

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "reject_distance": self.reject_distance,
            "labels": list(self.labels),
            "samples": [[float(v) for v in row] for row in self.samples],
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "kept_dims": [int(i) for i in self.kept_dims],
            "dropped_dims": [int(i) for i in self.dropped_dims],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KnnModel":
        return cls(
            k=int(doc["k"]),
            reject_distance=doc["reject_distance"],
            samples=np.asarray(doc["samples"], dtype=float).reshape(
                len(doc["labels"]), len(doc["kept_dims"])
            ),
            labels=list(doc["labels"]),
            means=np.asarray(doc["means"], dtype=float),
            stds=np.asarray(doc["stds"], dtype=float),
            kept_dims=np.asarray(doc["kept_dims"], dtype=int),
            dropped_dims=[int(i) for i in doc.get("dropped_dims", [])],
        )


def knn_fit(
    samples: Sequence[LabeledSample],
    k: int = 3,
    reject_distance: Optional[float] = None,
) -> KnnModel:
    """Memorize ``samples`` after per-dimension z-score normalization.

    Zero-variance dimensions are dropped from the stored space and
    recorded on the model. Raises EmptyTrainingSet / KTooLarge when the
    data cannot support ``k``.
    """
    if not samples:
        raise EmptyTrainingSet("no training samples")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > len(samples):
        raise KTooLarge(f"k={k} exceeds the {len(samples)} training samples")
    if reject_distance is not None and reject_distance <= 0:
        raise ValidationError(f"reject_distance must be positive, got {reject_distance}")

    dims = {s.features.shape[0] for s in samples}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent feature dimensions in training set: {sorted(dims)}")

    raw = np.array([s.features for s in samples], dtype=float)
    labels = [s.label for s in samples]
    if len(set(labels)) < 2:
        warnings.warn("training set contains a single class; every vote is unanimous")

    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    kept = np.nonzero(stds > 0.0)[0]
    dropped = [int(i) for i in np.nonzero(stds == 0.0)[0]]
    normalized = (raw[:, kept] - means[kept]) / stds[kept]
    return KnnModel(
        k=k,
        reject_distance=reject_distance,
        samples=normalized,
        labels=labels,
        means=means,
        stds=stds,
        kept_dims=kept,
        dropped_dims=dropped,
    )


def knn_classify(model: KnnModel, query: np.ndarray) -> Decision:
    """Vote among the k nearest stored samples.

    Distances are Euclidean in the z-scored space; equal distances rank by
    lower sample index. The unique top-voted label wins; a tied vote or a
    k-th-neighbor distance beyond ``reject_distance`` yields a reject.
    """
    query = np.asarray(getattr(query, "values", query), dtype=float)
    if query.ndim != 1 or query.shape[0] != model.n_dims:
        raise DimensionMismatch(
            f"query has {query.shape} features, model expects {model.n_dims}"
        )
    z = (query[model.kept_dims] - model.means[model.kept_dims]) / model.stds[model.kept_dims]
    distances = np.sqrt(np.sum((model.samples - z) ** 2, axis=1))
    order = np.argsort(distances, kind="stable")[: model.k]
    neighbor_ids = [int(i) for i in order]
    kth_distance = float(distances[order[-1]])

    votes: dict[str, int] = {}
    for i in neighbor_ids:
        votes[model.labels[i]] = votes.get(model.labels[i], 0) + 1
    top = max(votes.values())
    winners = sorted(label for label, n in votes.items() if n == top)

    if len(winners) > 1:
        return Decision(None, "vote_tie", neighbor_ids, votes, kth_distance)
    if model.reject_distance is not None and kth_distance > model.reject_distance:
        return Decision(None, "distance", neighbor_ids, votes, kth_distance)
    return Decision(winners[0], None, neighbor_ids, votes, kth_distance)
