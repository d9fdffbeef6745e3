import numpy as np
import pytest

from corneakit.errors import IoError, OutOfBounds, ValidationError
from corneakit.imgprep import (
    PixelGrid,
    ScalarGrid,
    channel_contrast,
    crop_map,
    read_image,
    read_ppm,
    remove_dark_lines,
    write_image,
    write_ppm,
)


def coordinate_image(h, w):
    """Image whose pixels encode their own (x, y) position."""
    data = np.zeros((h, w, 3), dtype=np.uint8)
    data[:, :, 0] = (np.arange(w) % 256)[None, :]
    data[:, :, 1] = (np.arange(h) % 256)[:, None]
    data[:, :, 2] = 128
    return PixelGrid(data)


def random_image(rng, h, w, low=0, high=256):
    return PixelGrid(rng.integers(low, high, (h, w, 3), dtype=np.uint8))


class TestGrids:
    def test_pixelgrid_shape_validation(self):
        with pytest.raises(ValidationError):
            PixelGrid(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValidationError):
            PixelGrid(np.zeros((4, 4, 3), dtype=np.float64))

    def test_scalargrid_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            ScalarGrid(np.array([[1.0, np.nan]]))


class TestCrop:
    def test_center_crop_indexing(self):
        image = coordinate_image(300, 300)
        crop = crop_map(image, (150, 150), side=159)
        assert crop.width == crop.height == 159
        assert tuple(crop.data[0, 0]) == tuple(image.data[71, 71])
        assert np.array_equal(crop.data, image.data[71:230, 71:230])

    def test_out_of_bounds(self):
        image = coordinate_image(300, 300)
        with pytest.raises(OutOfBounds):
            crop_map(image, (10, 10), side=159)
        with pytest.raises(OutOfBounds):
            crop_map(image, (295, 150), side=159)

    def test_uniform_image_uniform_crop(self):
        data = np.full((200, 200, 3), 77, dtype=np.uint8)
        crop = crop_map(PixelGrid(data), (100, 100), side=159)
        assert np.all(crop.data == 77)

    def test_crop_composition(self):
        image = coordinate_image(300, 300)
        outer = crop_map(image, (150, 150), side=159)
        inner = crop_map(outer, (79, 79), side=101)
        direct = crop_map(image, (150, 150), side=101)
        assert np.array_equal(inner.data, direct.data)


class TestRemoveDarkLines:
    def test_no_dark_pixels_is_identity(self):
        rng = np.random.default_rng(0)
        image = random_image(rng, 40, 40, low=70)
        out, report = remove_dark_lines(image, darkness_threshold=60)
        assert np.array_equal(out.data, image.data)
        assert report.dark_pixels == 0

    def test_single_black_pixel_in_uniform_field(self):
        data = np.full((21, 21, 3), (200, 120, 90), dtype=np.uint8)
        data[10, 10] = 0
        out, report = remove_dark_lines(PixelGrid(data))
        assert tuple(out.data[10, 10]) == (200, 120, 90)
        assert report.repaired == 1 and report.unrepaired == []

    def test_only_dark_pixels_modified(self):
        rng = np.random.default_rng(1)
        image = random_image(rng, 50, 50)
        dark = image.data.max(axis=2) < 60
        out, report = remove_dark_lines(image)
        assert np.array_equal(out.data[~dark], image.data[~dark])
        assert report.dark_pixels == int(dark.sum())

    def test_idempotent_once_clean(self):
        rng = np.random.default_rng(2)
        image = random_image(rng, 40, 40, low=80)
        image.data[5:8, :] = 10  # dark stripe
        once, _ = remove_dark_lines(PixelGrid(image.data))
        assert (once.data.max(axis=2) >= 60).all()
        twice, report = remove_dark_lines(once)
        assert np.array_equal(once.data, twice.data)
        assert report.dark_pixels == 0

    def test_radius_doubles_for_wide_dark_region(self):
        # 9x9 dark block: its middle pixel sees no non-dark pixel at radius 2
        data = np.full((31, 31, 3), 150, dtype=np.uint8)
        data[10:19, 10:19] = 5
        out, report = remove_dark_lines(PixelGrid(data), window_radius=2)
        assert tuple(out.data[14, 14]) == (150, 150, 150)
        assert report.unrepaired == []

    def test_all_dark_image_flagged_unchanged(self):
        data = np.full((8, 8, 3), 3, dtype=np.uint8)
        out, report = remove_dark_lines(PixelGrid(data))
        assert np.array_equal(out.data, data)
        assert report.repaired == 0
        assert len(report.unrepaired) == 64

    def test_grid_overlay_restoration(self):
        # smooth gradient field with a black grid drawn over it
        h = w = 60
        base = np.zeros((h, w, 3), dtype=np.uint8)
        ramp = np.clip(np.arange(w) * 2 + 90, 0, 255).astype(np.uint8)
        base[:, :, 0] = ramp[None, :]
        base[:, :, 1] = 200
        base[:, :, 2] = ramp[::-1][None, :]
        clean = PixelGrid(base)
        overlaid = base.copy()
        overlaid[7::12, :] = 0
        overlaid[:, 7::12] = 0
        mask = (overlaid != base).any(axis=2)
        out, report = remove_dark_lines(PixelGrid(overlaid))
        diff = np.abs(out.data.astype(int) - base.astype(int)).max(axis=2)
        assert (diff[mask] <= 8).mean() >= 0.99
        assert np.array_equal(out.data[~mask], base[~mask])

    def test_threshold_validation(self):
        image = coordinate_image(10, 10)
        with pytest.raises(ValidationError):
            remove_dark_lines(image, darkness_threshold=300)
        with pytest.raises(ValidationError):
            remove_dark_lines(image, window_radius=0)

    def test_report_round_trips_to_json_dict(self):
        data = np.full((8, 8, 3), 3, dtype=np.uint8)
        _, report = remove_dark_lines(PixelGrid(data))
        doc = report.to_dict()
        assert doc["dark_pixels"] == 64
        assert doc["unrepaired"][0] == [0, 0]


class TestChannelContrast:
    def test_pure_red(self):
        data = np.zeros((5, 5, 3), dtype=np.uint8)
        data[:, :, 0] = 255
        grid = channel_contrast(PixelGrid(data), "red")
        assert np.all(grid.values == 1.0)
        assert np.all(channel_contrast(PixelGrid(data), "green").values == 0.0)

    def test_grayscale_channels_identical(self):
        rng = np.random.default_rng(3)
        gray = rng.integers(0, 256, (12, 12), dtype=np.uint8)
        image = PixelGrid(np.repeat(gray[:, :, None], 3, axis=2))
        r = channel_contrast(image, "red").values
        g = channel_contrast(image, "green").values
        b = channel_contrast(image, "blue").values
        assert np.array_equal(r, g) and np.array_equal(g, b)

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(4)
        image = random_image(rng, 9, 7)
        grid = channel_contrast(image, "blue")
        for y in range(9):
            for x in range(7):
                assert grid.values[y, x] == image.data[y, x, 2] / 255.0
        assert grid.values.min() >= 0.0 and grid.values.max() <= 1.0

    def test_unknown_channel(self):
        with pytest.raises(ValidationError):
            channel_contrast(coordinate_image(4, 4), "alpha")


class TestImageIo:
    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        image = random_image(rng, 17, 23)
        path = tmp_path / "img.ppm"
        write_ppm(path, image)
        assert np.array_equal(read_ppm(path).data, image.data)

    def test_ppm_header_comments(self, tmp_path):
        path = tmp_path / "c.ppm"
        pixels = bytes(range(12))
        path.write_bytes(b"P6\n# a comment\n2 2\n# more\n255\n" + pixels)
        image = read_ppm(path)
        assert image.width == 2 and image.height == 2
        assert image.data.tobytes() == pixels

    def test_ppm_rejects_wrong_magic_and_truncation(self, tmp_path):
        bad = tmp_path / "bad.ppm"
        bad.write_bytes(b"P3\n2 2\n255\n")
        with pytest.raises(IoError):
            read_ppm(bad)
        short = tmp_path / "short.ppm"
        short.write_bytes(b"P6\n2 2\n255\n\x00\x01")
        with pytest.raises(IoError):
            read_ppm(short)

    def test_png_round_trip_matches(self, tmp_path):
        rng = np.random.default_rng(6)
        image = random_image(rng, 10, 14)
        path = tmp_path / "img.png"
        write_image(path, image)
        assert np.array_equal(read_image(path).data, image.data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_image(tmp_path / "absent.ppm")
        with pytest.raises(IoError):
            read_image(tmp_path / "absent.png")
