"""Dataset assembly: synthetic corpora and manifest-based ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IoError, ValidationError
from .features import PachymetryReading, load_pachymetry_csv
from .imgprep import PixelGrid, ScalarGrid, channel_contrast, read_image
from .synth import LABELS, SyntheticParams, synth_topography

__all__ = [
    "DatasetEntry",
    "Dataset",
    "make_synthetic_dataset",
    "stratified_split",
    "load_manifest",
    "MANIFEST_FIELDS",
]

MANIFEST_FIELDS = ("sample_id", "image_path", "pachy_path", "label")


@dataclass
class DatasetEntry:
    sample_id: str
    grid: ScalarGrid
    reading: PachymetryReading
    label: str
    image: Optional[PixelGrid] = None


@dataclass
class Dataset:
    entries: list[DatasetEntry]
    split: dict[str, str] = field(default_factory=dict)  # sample_id -> train|test

    def __post_init__(self):
        ids = [e.sample_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate sample ids in dataset")
        for sid, part in self.split.items():
            if part not in ("train", "test"):
                raise ValidationError(f"split for {sid!r} must be train or test, got {part!r}")

    def subset(self, part: str) -> list[DatasetEntry]:
        return [e for e in self.entries if self.split.get(e.sample_id) == part]


def make_synthetic_dataset(n_per_class: int, params: SyntheticParams) -> Dataset:
    """Generate n samples per class with consecutive per-class sample seeds."""
    if n_per_class < 1:
        raise ValidationError(f"n_per_class must be >= 1, got {n_per_class}")
    entries = []
    for label_idx, label in enumerate(LABELS):
        for i in range(n_per_class):
            grid, reading, image = synth_topography(label, params, label_idx * n_per_class + i)
            entries.append(
                DatasetEntry(f"{label.lower()}_{i:04d}", grid, reading, label, image)
            )
    return Dataset(entries)


def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> None:
    """Assign every entry to train or test, per-label, deterministically."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    by_label: dict[str, list[str]] = {}
    for entry in dataset.entries:
        by_label.setdefault(entry.label, []).append(entry.sample_id)
    split: dict[str, str] = {}
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        order = rng.permutation(len(ids))
        n_test = int(round(len(ids) * test_fraction))
        test_ids = {ids[i] for i in order[:n_test]}
        for sid in ids:
            split[sid] = "test" if sid in test_ids else "train"
    dataset.split = split


def load_manifest(path, channel: str = "red") -> Dataset:
    """Ingest preprocessed maps listed in a manifest CSV.

    Each row names an image (already cropped and line-cleaned), its
    pachymetry CSV, and the class label; paths are resolved relative to
    the manifest file. The scalar map is the ``channel`` contrast of the
    image.
    """
    path = Path(path)
    base = path.parent
    entries = []
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(MANIFEST_FIELDS) <= set(reader.fieldnames):
                raise IoError(f"{path}: expected CSV header {','.join(MANIFEST_FIELDS)}")
            for row in reader:
                label = row["label"]
                if label not in LABELS:
                    raise ValidationError(
                        f"{path}: label {label!r} for {row['sample_id']!r} "
                        f"not one of {LABELS}"
                    )
                image = read_image(base / row["image_path"])
                entries.append(
                    DatasetEntry(
                        sample_id=row["sample_id"],
                        grid=channel_contrast(image, channel),
                        reading=load_pachymetry_csv(base / row["pachy_path"]),
                        label=label,
                        image=image,
                    )
                )
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not entries:
        raise IoError(f"{path}: manifest lists no samples")
    return Dataset(entries)
