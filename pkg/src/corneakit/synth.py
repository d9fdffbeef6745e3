"""Seeded synthetic topography generator.

Encodes the clinical screening rules as a parametric surface model:
healthy corneas are radially symmetric thickness maps inside the normal
420-800 um band, thinnest at the center; post-refractive-surgery corneas
have an ablated (thin) center plus a superior-thick / inferior-thin
vertical warp that breaks the up/down symmetry. Each sample also renders
a color-mapped raster (optionally with a dark reference grid drawn over
it) and reads a five-point pachymetry off the surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, ValidationError
from .features import PachymetryReading
from .imgprep import PixelGrid, ScalarGrid

__all__ = [
    "HEALTHY",
    "LASIK",
    "LABELS",
    "SyntheticParams",
    "synth_topography",
    "thickness_colormap",
    "overlay_dark_grid",
]

HEALTHY = "Healthy"
LASIK = "Lasik"
LABELS = (HEALTHY, LASIK)

# clinical thickness band for an unoperated cornea, microns
CLINICAL_BAND = (420.0, 800.0)

# dome rise from center to the mid-edge of the map, microns
PERIPHERAL_RISE = 120.0

# color scale anchor range for rendering, microns
RENDER_RANGE = (300.0, 800.0)


@dataclass(frozen=True)
class SyntheticParams:
    healthy_center_range: tuple[float, float] = (500.0, 600.0)
    lasik_center_range: tuple[float, float] = (360.0, 450.0)
    lasik_asymmetry_amp: float = 180.0
    noise_std: float = 6.0
    grid_side: int = 159
    seed: int = 0
    grid_overlay_spacing: int | None = None  # draw black grid lines every N px

    def __post_init__(self):
        h_lo, h_hi = self.healthy_center_range
        l_lo, l_hi = self.lasik_center_range
        if not (CLINICAL_BAND[0] <= h_lo < h_hi <= CLINICAL_BAND[1]):
            raise InvalidParams(
                f"healthy_center_range {self.healthy_center_range} must sit inside "
                f"the clinical band {CLINICAL_BAND}"
            )
        if not (0.0 < l_lo < l_hi <= h_lo):
            raise InvalidParams(
                f"lasik_center_range {self.lasik_center_range} must be positive and "
                f"below the healthy range"
            )
        if self.lasik_asymmetry_amp < 0.0:
            raise InvalidParams("lasik_asymmetry_amp must be >= 0")
        if self.noise_std < 0.0:
            raise InvalidParams("noise_std must be >= 0")
        if self.grid_side < 32:
            raise InvalidParams(f"grid_side must be >= 32, got {self.grid_side}")
        if self.grid_overlay_spacing is not None and self.grid_overlay_spacing < 2:
            raise InvalidParams("grid_overlay_spacing must be >= 2 when set")


def _patch_mean(values: np.ndarray, y: int, x: int) -> float:
    """3x3 neighborhood mean, clipped at the borders (sensor spot average)."""
    h, w = values.shape
    return float(values[max(0, y - 1) : y + 2, max(0, x - 1) : x + 2].mean())


def _read_pachymetry(grid: ScalarGrid) -> PachymetryReading:
    h, w = grid.height, grid.width
    cy, cx = (h - 1) // 2, (w - 1) // 2
    v = grid.values
    return PachymetryReading(
        center=_patch_mean(v, cy, cx),
        up=_patch_mean(v, 0, cx),
        down=_patch_mean(v, h - 1, cx),
        left=_patch_mean(v, cy, 0),
        right=_patch_mean(v, cy, w - 1),
    )


# piecewise-linear topography palette; one channel is always saturated,
# so rendered pixels can never fall below the dark-line threshold
_PALETTE = np.array(
    [
        (0, 0, 255),  # deep blue  (thin)
        (0, 255, 255),  # cyan
        (0, 255, 0),  # green
        (255, 255, 0),  # yellow
        (255, 0, 0),  # red        (thick)
    ],
    dtype=float,
)


def thickness_colormap(grid: ScalarGrid) -> PixelGrid:
    """Render a thickness map through the blue-to-red topography palette."""
    lo, hi = RENDER_RANGE
    u = np.clip((grid.values - lo) / (hi - lo), 0.0, 1.0)
    pos = u * (len(_PALETTE) - 1)
    idx = np.minimum(pos.astype(int), len(_PALETTE) - 2)
    frac = (pos - idx)[..., None]
    rgb = _PALETTE[idx] * (1.0 - frac) + _PALETTE[idx + 1] * frac
    return PixelGrid(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


def overlay_dark_grid(image: PixelGrid, spacing: int, offset: int | None = None) -> PixelGrid:
    """Draw 1-pixel black grid lines every ``spacing`` pixels."""
    if spacing < 2:
        raise ValidationError(f"grid spacing must be >= 2, got {spacing}")
    if offset is None:
        offset = spacing // 2
    data = image.data.copy()
    data[offset::spacing, :] = 0
    data[:, offset::spacing] = 0
    return PixelGrid(data)


def synth_topography(
    label: str, params: SyntheticParams, sample_seed: int
) -> tuple[ScalarGrid, PachymetryReading, PixelGrid]:
    """Generate one labeled sample: thickness map, pachymetry, rendering.

    Fully deterministic for a given (params, sample_seed) pair. Healthy
    surfaces are radial domes; operated ones start from a thinner center
    and add the vertical asymmetry warp (superior +amp, inferior -amp at
    the mid-edges).
    """
    if label not in LABELS:
        raise ValidationError(f"label must be one of {LABELS}, got {label!r}")
    rng = np.random.default_rng([params.seed, sample_seed])
    side = params.grid_side
    c = (side - 1) / 2.0
    yy, xx = np.mgrid[0:side, 0:side].astype(float)
    rho2 = ((xx - c) ** 2 + (yy - c) ** 2) / (c * c)

    if label == HEALTHY:
        center = rng.uniform(*params.healthy_center_range)
        surface = center + PERIPHERAL_RISE * rho2
    else:
        center = rng.uniform(*params.lasik_center_range)
        surface = center + PERIPHERAL_RISE * rho2
        surface -= params.lasik_asymmetry_amp * (yy - c) / c
    surface = surface + rng.normal(0.0, params.noise_std, surface.shape)

    grid = ScalarGrid(surface)
    reading = _read_pachymetry(grid)
    image = thickness_colormap(grid)
    if params.grid_overlay_spacing is not None:
        image = overlay_dark_grid(image, params.grid_overlay_spacing)
    return grid, reading, image
