"""Stagewise least-squares fitting of lines and quadratics.

The stagewise procedure grows the fitted point set one point at a time:
stage k solves the least-squares problem on the first k points, using the
coefficients from stage k-1 as the starting state of an iterative
refinement. The refinement only affects how many correction steps the
solver takes; the solution of every stage is the exact prefix optimum, so
the final stagewise model always agrees with the one-shot batch fit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateInput, IoError

__all__ = [
    "Point2",
    "LineModel",
    "QuadModel",
    "FitStage",
    "FitTrace",
    "fit_line_batch",
    "fit_quad_batch",
    "fit_line_stagewise",
    "fit_quad_stagewise",
    "residual_sum",
    "load_points_csv",
]


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DegenerateInput(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class LineModel:
    """y = a*x + b."""

    a: float
    b: float

    def predict(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b

    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class QuadModel:
    """y = a*x^2 + b*x + c."""

    a: float
    b: float
    c: float

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        return (self.a * x + self.b) * x + self.c

    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c)


Model = Union[LineModel, QuadModel]


@dataclass
class FitStage:
    index: int  # number of points in the fitted prefix
    model: Model
    residual: float


@dataclass
class FitTrace:
    stages: list[FitStage] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)  # degenerate prefix sizes

    def to_dict(self) -> dict:
        return {
            "stages": [
                {
                    "index": s.index,
                    "coefficients": list(s.model.coefficients()),
                    "residual": s.residual,
                }
                for s in self.stages
            ],
            "skipped": list(self.skipped),
        }


def _design_matrix(points: Sequence[Point2], degree: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([p.x for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    cols = [x**d for d in range(degree, 0, -1)] + [np.ones_like(x)]
    return np.column_stack(cols), y


def _solve_normal_equations(
    design: np.ndarray,
    y: np.ndarray,
    warm_start: Optional[Sequence[float]] = None,
    max_refinements: int = 4,
) -> np.ndarray:
    """Solve min ||design @ theta - y||^2 via the normal equations.

    ``warm_start`` seeds an iterative-refinement loop: starting from the
    previous coefficients, each pass solves for the residual correction
    G @ delta = rhs - G @ theta. One exact pass already lands on the
    optimum; extra passes only polish rounding. The result is therefore
    independent of the starting state.
    """
    gram = design.T @ design
    rhs = design.T @ y
    try:
        if warm_start is None:
            theta = np.linalg.solve(gram, rhs)
            start = 1
        else:
            theta = np.asarray(warm_start, dtype=float).copy()
            start = 0
        for _ in range(start, max_refinements):
            delta = np.linalg.solve(gram, rhs - gram @ theta)
            theta = theta + delta
            if np.max(np.abs(delta)) <= 1e-14 * (1.0 + np.max(np.abs(theta))):
                break
    except np.linalg.LinAlgError as exc:
        raise DegenerateInput(f"singular normal equations: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise DegenerateInput("normal equations produced non-finite coefficients")
    return theta


def _line_degenerate(points: Sequence[Point2]) -> bool:
    xs = {p.x for p in points}
    return len(points) < 2 or len(xs) < 2


def _quad_degenerate(points: Sequence[Point2]) -> bool:
    xs = {p.x for p in points}
    return len(points) < 3 or len(xs) < 3


def fit_line_batch(
    points: Sequence[Point2], warm_start: Optional[Sequence[float]] = None
) -> LineModel:
    """Least-squares line through ``points``, minimizing the summed squared
    vertical distances. Raises DegenerateInput for < 2 points or all-equal x."""
    if _line_degenerate(points):
        raise DegenerateInput(
            f"line fit needs >= 2 points with distinct x, got {len(points)}"
        )
    design, y = _design_matrix(points, degree=1)
    a, b = _solve_normal_equations(design, y, warm_start)
    return LineModel(float(a), float(b))


def fit_quad_batch(
    points: Sequence[Point2], warm_start: Optional[Sequence[float]] = None
) -> QuadModel:
    """Least-squares quadratic through ``points``. Raises DegenerateInput for
    < 3 points or a singular Vandermonde system."""
    if _quad_degenerate(points):
        raise DegenerateInput(
            f"quadratic fit needs >= 3 points with 3 distinct x, got {len(points)}"
        )
    design, y = _design_matrix(points, degree=2)
    a, b, c = _solve_normal_equations(design, y, warm_start)
    return QuadModel(float(a), float(b), float(c))


def residual_sum(model: Model, points: Sequence[Point2]) -> float:
    """Sum of squared vertical distances from ``points`` to the model curve."""
    if not points:
        return 0.0
    x = np.array([p.x for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    return float(np.sum((y - model.predict(x)) ** 2))


def _fit_stagewise(points, first_stage, degenerate, fit_batch):
    m = len(points)
    if m < first_stage:
        raise DegenerateInput(f"stagewise fit needs >= {first_stage} points, got {m}")
    trace = FitTrace()
    warm: Optional[tuple[float, ...]] = None
    model: Optional[Model] = None
    for k in range(first_stage, m + 1):
        prefix = points[:k]
        if degenerate(prefix):
            trace.skipped.append(k)
            continue
        try:
            model = fit_batch(prefix, warm_start=warm)
        except DegenerateInput:
            trace.skipped.append(k)
            continue
        warm = model.coefficients()
        trace.stages.append(FitStage(k, model, residual_sum(model, prefix)))
    if model is None:
        raise DegenerateInput("every prefix was degenerate; nothing to fit")
    return model, trace


def fit_line_stagewise(points: Sequence[Point2]) -> tuple[LineModel, FitTrace]:
    """Grow the line fit over prefixes of 2..m points.

    Each stage is the exact least-squares line on its prefix, warm-started
    from the previous stage. Degenerate prefixes (all x equal) are skipped
    and recorded in the trace rather than aborting the fit.
    """
    return _fit_stagewise(list(points), 2, _line_degenerate, fit_line_batch)


def fit_quad_stagewise(points: Sequence[Point2]) -> tuple[QuadModel, FitTrace]:
    """Grow the quadratic fit over prefixes of 3..m points; see
    fit_line_stagewise for the stagewise contract."""
    return _fit_stagewise(list(points), 3, _quad_degenerate, fit_quad_batch)


def load_points_csv(path) -> list[Point2]:
    """Read points from a CSV file with an ``x,y`` header row."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
                raise IoError(f"{path}: expected a CSV header with columns x,y")
            try:
                return [Point2(float(row["x"]), float(row["y"])) for row in reader]
            except (TypeError, ValueError) as exc:
                raise IoError(f"{path}: malformed point row: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
