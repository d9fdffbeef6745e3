"""End-to-end evaluation: train both classifiers, score the test split,
and render the two-classifier-by-three-combo comparison table."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from typing import Optional, Sequence

from .dataset import Dataset, DatasetEntry, stratified_split
from .errors import MissingClass, ValidationError
from .features import COMBOS, build_feature_vector
from .hmm import fit_hmm_bank
from .knn import LabeledSample, knn_classify, knn_fit
from .synth import LABELS, SyntheticParams

__all__ = [
    "EvalConfig",
    "EvalReport",
    "run_evaluation",
    "score_decisions",
    "render_table",
    "COMBO_HEADERS",
]

COMBO_HEADERS = {
    "maxdiff": "Correlation & FFT & Max Diff",
    "mindiff": "Correlation & FFT & Min Diff",
    "maxmindiff": "Correlation & FFT & Max-Min Diff",
}


@dataclass
class EvalConfig:
    """Every tunable of the pipeline in one flat, JSON-round-trippable bag."""

    seed: int = 42
    test_fraction: float = 0.3
    combos: tuple[str, ...] = ("maxdiff", "mindiff", "maxmindiff")
    bands: int = 8
    knn_k: int = 3
    knn_reject_distance: Optional[float] = None
    hmm_states: int = 5
    hmm_symbols: int = 16
    hmm_window: int = 10
    hmm_stride: int = 5
    hmm_max_iter: int = 50
    hmm_tol: float = 1e-4
    # dataset source: a manifest path, or (default) the synthetic generator
    manifest: Optional[str] = None
    channel: str = "red"
    n_per_class: int = 100
    healthy_center_range: tuple[float, float] = (500.0, 600.0)
    lasik_center_range: tuple[float, float] = (360.0, 450.0)
    lasik_asymmetry_amp: float = 180.0
    noise_std: float = 6.0
    grid_side: int = 159

    def __post_init__(self):
        self.combos = tuple(self.combos)
        unknown = [c for c in self.combos if c not in COMBOS]
        if not self.combos or unknown:
            raise ValidationError(f"combos must be drawn from {sorted(COMBOS)}, got {self.combos}")

    def synthetic_params(self) -> SyntheticParams:
        return SyntheticParams(
            healthy_center_range=tuple(self.healthy_center_range),
            lasik_center_range=tuple(self.lasik_center_range),
            lasik_asymmetry_amp=self.lasik_asymmetry_amp,
            noise_std=self.noise_std,
            grid_side=self.grid_side,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            doc[f.name] = list(value) if isinstance(value, tuple) else value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        for key in ("combos", "healthy_center_range", "lasik_center_range"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class EvalReport:
    metadata: dict
    cells: dict  # classifier -> combo key -> cell dict

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "results": self.cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def score_decisions(
    truth: Sequence[str], predicted: Sequence[Optional[str]], labels: Sequence[str] = LABELS
) -> dict:
    """Accuracy and confusion accounting; a None prediction is a reject,
    counted as an error and tallied in its own confusion column."""
    if len(truth) != len(predicted):
        raise ValidationError("truth and prediction lists differ in length")
    confusion = {t: {p: 0 for p in [*labels, "Reject"]} for t in labels}
    correct = rejects = 0
    for t, p in zip(truth, predicted):
        if p is None:
            confusion[t]["Reject"] += 1
            rejects += 1
        else:
            confusion[t][p] += 1
            if p == t:
                correct += 1
    total = len(truth)
    return {
        "accuracy_pct": 100.0 * correct / total if total else 0.0,
        "correct": correct,
        "total": total,
        "rejects": rejects,
        "confusion": confusion,
    }


def _knn_cell(
    train: Sequence[DatasetEntry], test: Sequence[DatasetEntry], combo: str, config: EvalConfig
) -> dict:
    samples = [
        LabeledSample(build_feature_vector(e.grid, e.reading, combo, config.bands).values, e.label)
        for e in train
    ]
    model = knn_fit(samples, k=config.knn_k, reject_distance=config.knn_reject_distance)
    predictions = []
    for entry in test:
        query = build_feature_vector(entry.grid, entry.reading, combo, config.bands).values
        predictions.append(knn_classify(model, query).label)
    return score_decisions([e.label for e in test], predictions)


def run_evaluation(dataset: Dataset, config: EvalConfig) -> EvalReport:
    """Train KNN (per combo) and the HMM bank, score the test split, and
    assemble the comparison report.

    The HMM operates on sliding-window observation sequences, which do not
    depend on the pachymetry combo, so its bank is trained once and its
    scores repeat across the combo columns.
    """
    if not dataset.split:
        stratified_split(dataset, config.test_fraction, config.seed)
    train = sorted(dataset.subset("train"), key=lambda e: e.sample_id)
    test = sorted(dataset.subset("test"), key=lambda e: e.sample_id)
    if not train or not test:
        raise ValidationError(
            f"both splits must be non-empty, got {len(train)} train / {len(test)} test"
        )
    train_labels = {e.label for e in train}
    missing = [lab for lab in LABELS if lab not in train_labels]
    if missing:
        raise MissingClass(f"training split lacks class(es): {missing}")

    bank = fit_hmm_bank(
        {lab: [e.grid for e in train if e.label == lab] for lab in sorted(train_labels)},
        n_states=config.hmm_states,
        n_symbols=config.hmm_symbols,
        window_height=config.hmm_window,
        stride=config.hmm_stride,
        max_iter=config.hmm_max_iter,
        tol=config.hmm_tol,
        seed=config.seed,
    )
    hmm_cell = score_decisions(
        [e.label for e in test], [bank.classify_map(e.grid)[0] for e in test]
    )

    cells = {"KNN": {}, "HMM": {}}
    for combo in config.combos:
        cells["KNN"][combo] = _knn_cell(train, test, combo, config)
        cells["HMM"][combo] = hmm_cell
    metadata = {
        "seed": config.seed,
        "config_hash": config.hash(),
        "n_train": len(train),
        "n_test": len(test),
        "train_per_label": {lab: sum(e.label == lab for e in train) for lab in sorted(LABELS)},
        "test_per_label": {lab: sum(e.label == lab for e in test) for lab in sorted(LABELS)},
        "combos": list(config.combos),
    }
    return EvalReport(metadata, cells)


def render_table(report: EvalReport) -> str:
    """Text table in the classifier-by-combo layout, percent sign first."""
    combos = [c for c in report.metadata["combos"]]
    headers = ["Model"] + [COMBO_HEADERS[c] for c in combos]
    rows = []
    for clf in ("KNN", "HMM"):
        row = [clf]
        for combo in combos:
            cell = report.cells[clf][combo]
            row.append(f"%{cell['accuracy_pct']:.1f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers, *rows]) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
