"""Topography image preparation: cropping, grid-line removal, channel maps.

Device screenshots carry a dark reference grid drawn over the colored map.
``remove_dark_lines`` restores those pixels with a rank-order filter that
ignores dark neighbors: each dark pixel becomes the channel-wise median of
the non-dark pixels around it in the original image, growing the window
when a neighborhood is entirely dark.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IoError, OutOfBounds, ValidationError

__all__ = [
    "PixelGrid",
    "ScalarGrid",
    "RepairReport",
    "crop_map",
    "remove_dark_lines",
    "channel_contrast",
    "read_image",
    "write_image",
    "read_ppm",
    "write_ppm",
]

CHANNELS = {"red": 0, "green": 1, "blue": 2}


@dataclass(frozen=True)
class PixelGrid:
    """H x W raster of 8-bit RGB pixels (row-major numpy array)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValidationError(
                f"PixelGrid needs a (H, W, 3) uint8 array, got {arr.shape} {arr.dtype}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ScalarGrid:
    """H x W real-valued map (channel contrast, or thickness in microns)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValidationError(f"ScalarGrid needs a 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("ScalarGrid values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class RepairReport:
    """Outcome of a dark-line removal pass."""

    darkness_threshold: int
    window_radius: int
    dark_pixels: int = 0
    repaired: int = 0
    unrepaired: list[tuple[int, int]] = field(default_factory=list)  # (x, y)

    def to_dict(self) -> dict:
        return {
            "darkness_threshold": self.darkness_threshold,
            "window_radius": self.window_radius,
            "dark_pixels": self.dark_pixels,
            "repaired": self.repaired,
            "unrepaired": [list(p) for p in self.unrepaired],
        }


def crop_map(image: PixelGrid, center: tuple[int, int], side: int = 159) -> PixelGrid:
    """Cut the side x side square whose center pixel is ``center`` (x, y).

    The center lands on index side//2 of the crop, so a 159-wide crop
    around x reaches from x-79 to x+79 inclusive.
    """
    if side < 1:
        raise ValidationError(f"side must be positive, got {side}")
    cx, cy = int(center[0]), int(center[1])
    half = side // 2
    x0, y0 = cx - half, cy - half
    if x0 < 0 or y0 < 0 or x0 + side > image.width or y0 + side > image.height:
        raise OutOfBounds(
            f"{side}x{side} crop at center ({cx}, {cy}) exceeds "
            f"{image.width}x{image.height} image"
        )
    return PixelGrid(image.data[y0 : y0 + side, x0 : x0 + side].copy())


def _dark_mask(data: np.ndarray, threshold: int) -> np.ndarray:
    # a pixel is dark only when ALL channels sit below the threshold
    return data.max(axis=2) < threshold


def remove_dark_lines(
    image: PixelGrid, darkness_threshold: int = 60, window_radius: int = 2
) -> tuple[PixelGrid, RepairReport]:
    """Replace dark overlay pixels by the median of their non-dark neighbors.

    A pixel is dark iff max(r, g, b) < darkness_threshold. Every dark pixel
    becomes the channel-wise median of the non-dark pixels inside its
    (2*radius+1)^2 window of the ORIGINAL image; non-dark pixels pass
    through untouched. Windows that contain no non-dark pixel grow by
    radius doubling up to min(width, height)//2; pixels that still find
    none are left unchanged and listed in the repair report.
    """
    if not 0 <= darkness_threshold <= 255:
        raise ValidationError(f"darkness_threshold must be in 0..255, got {darkness_threshold}")
    if window_radius < 1:
        raise ValidationError(f"window_radius must be >= 1, got {window_radius}")

    src = image.data
    h, w = src.shape[:2]
    dark = _dark_mask(src, darkness_threshold)
    report = RepairReport(darkness_threshold, window_radius, dark_pixels=int(dark.sum()))
    if report.dark_pixels == 0:
        return PixelGrid(src.copy()), report

    out = src.copy()
    max_radius = max(window_radius, min(w, h) // 2)
    radii = [window_radius]
    while radii[-1] < max_radius:
        radii.append(min(radii[-1] * 2, max_radius))

    ys, xs = np.nonzero(dark)
    for y, x in zip(ys.tolist(), xs.tolist()):
        for r in radii:
            y0, y1 = max(0, y - r), min(h, y + r + 1)
            x0, x1 = max(0, x - r), min(w, x + r + 1)
            window = src[y0:y1, x0:x1]
            keep = ~dark[y0:y1, x0:x1]
            if keep.any():
                med = np.median(window[keep].reshape(-1, 3), axis=0)
                out[y, x] = np.clip(np.rint(med), 0, 255).astype(np.uint8)
                report.repaired += 1
                break
        else:
            report.unrepaired.append((x, y))
    return PixelGrid(out), report


def channel_contrast(image: PixelGrid, channel: str) -> ScalarGrid:
    """One color channel rescaled to [0, 1]."""
    if channel not in CHANNELS:
        raise ValidationError(f"channel must be one of {sorted(CHANNELS)}, got {channel!r}")
    return ScalarGrid(image.data[:, :, CHANNELS[channel]].astype(float) / 255.0)


# ---------------------------------------------------------------------------
# Image I/O. Binary P6 PPM (maxval 255) is the bit-exact reference format;
# PNG is accepted as an input convenience via Pillow.
# ---------------------------------------------------------------------------


def read_ppm(path) -> PixelGrid:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not raw.startswith(b"P6"):
        raise IoError(f"{path}: not a binary P6 PPM file")
    # header = magic, width, height, maxval, each ending in one whitespace;
    # comment lines (#...) may appear between tokens
    pos, tokens = 2, []
    while len(tokens) < 3:
        match = re.match(rb"(?:\s|#[^\n]*\n)*(\d+)", raw[pos:])
        if match is None:
            raise IoError(f"{path}: malformed PPM header")
        tokens.append(int(match.group(1)))
        pos += match.end()
    width, height, maxval = tokens
    if maxval != 255:
        raise IoError(f"{path}: only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    pixels = raw[pos : pos + expected]
    if len(pixels) != expected:
        raise IoError(f"{path}: truncated pixel data ({len(pixels)} of {expected} bytes)")
    data = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
    return PixelGrid(data.copy())


def write_ppm(path, image: PixelGrid) -> None:
    path = Path(path)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    try:
        path.write_bytes(header + image.data.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_image(path) -> PixelGrid:
    """Read a PPM (reference format) or any Pillow-readable RGB image."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path)
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            data = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (OSError, UnidentifiedImageError) as exc:
        raise IoError(f"{path}: unreadable image: {exc}") from exc
    return PixelGrid(data)


def write_image(path, image: PixelGrid) -> None:
    """Write a PPM when the suffix is .ppm, else delegate to Pillow."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(path, image)
        return
    from PIL import Image

    try:
        Image.fromarray(image.data, mode="RGB").save(path)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
