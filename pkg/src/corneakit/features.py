"""Discriminative features for topography maps.

Three ingredients feed the classifiers: the left/right mirror-symmetry
correlation of the map, radially binned FFT spectrum energies, and the
pachymetry differences between the corneal center and its four side
readings. ``build_feature_vector`` assembles them into the named
combinations used by the evaluation report.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidBands, IoError, ValidationError
from .imgprep import ScalarGrid

__all__ = [
    "PachymetryReading",
    "FeatureVector",
    "COMBOS",
    "symmetry_correlation",
    "mirror_correlation",
    "fft_spectrum_energy",
    "max_radial_index",
    "max_power",
    "min_power",
    "build_feature_vector",
    "load_pachymetry_csv",
    "write_pachymetry_csv",
]

# combo key -> (canonical name, include max_power, include min_power)
COMBOS = {
    "maxdiff": ("CorrFftMaxDiff", True, False),
    "mindiff": ("CorrFftMinDiff", False, True),
    "maxmindiff": ("CorrFftMaxMinDiff", True, True),
}


@dataclass(frozen=True)
class PachymetryReading:
    """Five corneal thickness readings in microns: center plus four sides."""

    center: float
    up: float
    down: float
    left: float
    right: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not (math.isfinite(value) and 0.0 < value < 2000.0):
                raise ValidationError(
                    f"pachymetry {name}={value} outside the plausible (0, 2000) um range"
                )

    def as_dict(self) -> dict[str, float]:
        return {
            "center": self.center,
            "up": self.up,
            "down": self.down,
            "left": self.left,
            "right": self.right,
        }

    def sides(self) -> tuple[float, float, float, float]:
        return (self.up, self.down, self.left, self.right)


@dataclass(frozen=True)
class FeatureVector:
    combo: str  # canonical combo name
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != len(self.names):
            raise ValidationError("feature names and values disagree in length")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("feature values must be finite")
        object.__setattr__(self, "values", arr)

    def to_dict(self) -> dict:
        return {
            "combo": self.combo,
            "names": list(self.names),
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureVector":
        return cls(doc["combo"], tuple(doc["names"]), np.asarray(doc["values"], dtype=float))


def mirror_correlation(values: np.ndarray) -> float:
    """Pearson correlation of the left half against the mirrored right half.

    Odd widths drop the center column. Returns 0.0 when either half has
    zero variance; the result is clipped into [-1, 1].
    """
    values = np.asarray(values, dtype=float)
    width = values.shape[1]
    if width < 2:
        raise ValidationError(f"mirror correlation needs width >= 2, got {width}")
    half = width // 2
    left = values[:, :half].ravel()
    right = values[:, width - half :][:, ::-1].ravel()
    dl = left - left.mean()
    dr = right - right.mean()
    sl = np.sqrt(np.sum(dl * dl))
    sr = np.sqrt(np.sum(dr * dr))
    if sl == 0.0 or sr == 0.0:
        return 0.0
    return float(np.clip(np.sum(dl * dr) / (sl * sr), -1.0, 1.0))


def symmetry_correlation(grid: ScalarGrid) -> float:
    """Left/right mirror-symmetry correlation of a scalar map."""
    return mirror_correlation(grid.values)


def max_radial_index(height: int, width: int) -> int:
    """Largest whole radial frequency index representable on an HxW grid."""
    return int(math.hypot(height // 2, width // 2))


def fft_spectrum_energy(grid: ScalarGrid, bands: int) -> list[float]:
    """Spectrum energy of the mean-subtracted map, binned radially.

    The 2-D DFT magnitudes squared are summed into ``bands`` equal-width
    annuli of radial frequency; the DC term is excluded (the mean is
    removed beforehand, so it is zero anyway).
    """
    h, w = grid.height, grid.width
    rmax = max_radial_index(h, w)
    if not 1 <= bands <= rmax:
        raise InvalidBands(f"bands must be in 1..{rmax} for a {h}x{w} grid, got {bands}")
    centered = grid.values - grid.values.mean()
    power = np.abs(np.fft.fft2(centered)) ** 2
    fy = np.minimum(np.arange(h), h - np.arange(h))
    fx = np.minimum(np.arange(w), w - np.arange(w))
    radius = np.hypot(fy[:, None], fx[None, :])
    nonzero = radius > 0
    idx = np.minimum((radius[nonzero] * bands / float(rmax)).astype(int), bands - 1)
    out = np.bincount(idx, weights=power[nonzero], minlength=bands)
    return [float(v) for v in out]


def max_power(reading: PachymetryReading) -> float:
    """Center thickness minus the maximum of the four side readings."""
    return reading.center - max(reading.sides())


def min_power(reading: PachymetryReading) -> float:
    """Center thickness minus the minimum of the four side readings."""
    return reading.center - min(reading.sides())


def build_feature_vector(
    grid: ScalarGrid, reading: PachymetryReading, combo: str, bands: int = 8
) -> FeatureVector:
    """Assemble [correlation, fft bands..., pachymetry diffs] for one combo.

    ``combo`` is one of maxdiff / mindiff / maxmindiff (or the canonical
    CorrFft* spelling); the slot order is fixed: correlation first, then
    the ``bands`` spectrum energies, then max_power and/or min_power.
    """
    key = combo.lower()
    if key not in COMBOS:
        by_canonical = {canon.lower(): k for k, (canon, _, _) in COMBOS.items()}
        if key in by_canonical:
            key = by_canonical[key]
        else:
            raise ValidationError(f"unknown combo {combo!r}; expected one of {sorted(COMBOS)}")
    canonical, with_max, with_min = COMBOS[key]

    names = ["correlation"] + [f"fft_band_{i}" for i in range(bands)]
    values = [symmetry_correlation(grid)] + fft_spectrum_energy(grid, bands)
    if with_max:
        names.append("max_power")
        values.append(max_power(reading))
    if with_min:
        names.append("min_power")
        values.append(min_power(reading))
    return FeatureVector(canonical, tuple(names), np.asarray(values, dtype=float))


PACHY_FIELDS = ("center", "up", "down", "left", "right")


def load_pachymetry_csv(path) -> PachymetryReading:
    """Read one reading from a CSV with header center,up,down,left,right."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(PACHY_FIELDS) <= set(reader.fieldnames):
                raise IoError(f"{path}: expected CSV header {','.join(PACHY_FIELDS)}")
            row = next(reader, None)
            if row is None:
                raise IoError(f"{path}: no reading row found")
            try:
                return PachymetryReading(**{k: float(row[k]) for k in PACHY_FIELDS})
            except (TypeError, ValueError) as exc:
                raise IoError(f"{path}: malformed reading: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def write_pachymetry_csv(path, reading: PachymetryReading) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(PACHY_FIELDS)
            writer.writerow([repr(getattr(reading, k)) for k in PACHY_FIELDS])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
