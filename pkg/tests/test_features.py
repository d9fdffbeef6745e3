import math

import numpy as np
import pytest

from corneakit.errors import InvalidBands, IoError, ValidationError
from corneakit.features import (
    FeatureVector,
    PachymetryReading,
    build_feature_vector,
    fft_spectrum_energy,
    load_pachymetry_csv,
    max_power,
    max_radial_index,
    min_power,
    symmetry_correlation,
    write_pachymetry_csv,
)
from corneakit.imgprep import ScalarGrid


def reading(center=550.0, up=600.0, down=610.0, left=590.0, right=605.0):
    return PachymetryReading(center, up, down, left, right)


def pearson_oracle(a, b):
    """Two-pass textbook Pearson correlation."""
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def naive_dft2(values):
    """Matrix-form DFT straight from the definition (no FFT)."""
    h, w = values.shape
    eh = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    ew = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    return eh @ values @ ew.T


def bands_oracle(values, n_bands):
    """Bin naive-DFT power into radial annuli, independent of the library."""
    centered = values - values.mean()
    power = np.abs(naive_dft2(centered)) ** 2
    h, w = values.shape
    rmax = int(math.hypot(h // 2, w // 2))
    out = [0.0] * n_bands
    for u in range(h):
        for v in range(w):
            r = math.hypot(min(u, h - u), min(v, w - v))
            if r == 0:
                continue
            out[min(int(r * n_bands / rmax), n_bands - 1)] += power[u, v]
    return out


class TestSymmetryCorrelation:
    def test_mirror_symmetric_grid(self):
        rng = np.random.default_rng(20)
        half = rng.random((10, 6))
        grid = ScalarGrid(np.hstack([half, half[:, ::-1]]))
        assert symmetry_correlation(grid) == pytest.approx(1.0, abs=1e-12)

    def test_antisymmetric_about_mean(self):
        rng = np.random.default_rng(21)
        d = rng.random((8, 5)) + 0.1
        mean = 10.0
        grid = ScalarGrid(np.hstack([mean + d, (mean - d)[:, ::-1]]))
        assert symmetry_correlation(grid) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_pearson_oracle(self):
        rng = np.random.default_rng(22)
        for w in (6, 7, 12):
            values = rng.random((9, w))
            half = w // 2
            left = values[:, :half].ravel().tolist()
            right = values[:, w - half :][:, ::-1].ravel().tolist()
            expected = pearson_oracle(left, right)
            assert symmetry_correlation(ScalarGrid(values)) == pytest.approx(expected, abs=1e-12)

    def test_equal_under_horizontal_flip(self):
        rng = np.random.default_rng(23)
        for w in (8, 9):
            values = rng.random((7, w))
            assert symmetry_correlation(ScalarGrid(values)) == symmetry_correlation(
                ScalarGrid(values[:, ::-1])
            )

    def test_bounded_and_affine_invariant(self):
        rng = np.random.default_rng(24)
        for _ in range(20):
            values = rng.random((6, 10))
            c = symmetry_correlation(ScalarGrid(values))
            assert -1.0 <= c <= 1.0
            rescaled = symmetry_correlation(ScalarGrid(3.7 * values + 11.0))
            assert rescaled == pytest.approx(c, abs=1e-10)

    def test_zero_variance_half_returns_zero(self):
        values = np.ones((4, 6))
        values[:, 4:] = np.arange(8).reshape(4, 2)
        assert symmetry_correlation(ScalarGrid(values)) == 0.0

    def test_width_one_rejected(self):
        with pytest.raises(ValidationError):
            symmetry_correlation(ScalarGrid(np.ones((4, 1))))


class TestFftSpectrumEnergy:
    def test_constant_grid_all_zero(self):
        bands = fft_spectrum_energy(ScalarGrid(np.full((16, 16), 4.2)), 4)
        assert bands == [0.0] * 4

    def test_single_cosine_concentration(self):
        w = h = 32
        x = np.arange(w)
        values = np.tile(np.cos(2 * np.pi * 4 * x / w), (h, 1))
        bands = fft_spectrum_energy(ScalarGrid(values), 8)
        rmax = max_radial_index(h, w)
        target = min(int(4 * 8 / rmax), 7)
        assert bands[target] >= 0.99 * sum(bands)

    def test_matches_naive_dft_oracle(self):
        rng = np.random.default_rng(25)
        for h, w in ((8, 8), (16, 12), (32, 32)):
            values = rng.random((h, w))
            got = fft_spectrum_energy(ScalarGrid(values), 5)
            expected = bands_oracle(values, 5)
            for g, e in zip(got, expected):
                assert g == pytest.approx(e, rel=1e-9, abs=1e-9)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(26)
        values = rng.random((20, 20))
        a = fft_spectrum_energy(ScalarGrid(values), 6)
        b = fft_spectrum_energy(ScalarGrid(values + 123.456), 6)
        for x, y in zip(a, b):
            assert y == pytest.approx(x, rel=1e-9, abs=1e-9)

    def test_parseval_total(self):
        rng = np.random.default_rng(27)
        values = rng.random((24, 18))
        bands = fft_spectrum_energy(ScalarGrid(values), 7)
        n = values.size
        expected = n * np.sum((values - values.mean()) ** 2)
        assert sum(bands) == pytest.approx(expected, rel=1e-9)

    def test_band_count_validation(self):
        grid = ScalarGrid(np.random.default_rng(28).random((8, 8)))
        with pytest.raises(InvalidBands):
            fft_spectrum_energy(grid, 0)
        with pytest.raises(InvalidBands):
            fft_spectrum_energy(grid, max_radial_index(8, 8) + 1)


class TestPachymetryPowers:
    def test_uniform_reading(self):
        r = PachymetryReading(550, 550, 550, 550, 550)
        assert max_power(r) == 0.0
        assert min_power(r) == 0.0

    def test_worked_example(self):
        r = PachymetryReading(550, 500, 520, 540, 560)
        assert max_power(r) == pytest.approx(-10.0)
        assert min_power(r) == pytest.approx(50.0)

    def test_formula_oracle_and_ordering(self):
        rng = np.random.default_rng(29)
        for _ in range(1000):
            vals = rng.uniform(300, 900, 5)
            r = PachymetryReading(*vals)
            sides = vals[1:]
            assert max_power(r) == vals[0] - sides.max()
            assert min_power(r) == vals[0] - sides.min()
            assert max_power(r) <= min_power(r)

    def test_reading_validation(self):
        with pytest.raises(ValidationError):
            PachymetryReading(0.0, 500, 500, 500, 500)
        with pytest.raises(ValidationError):
            PachymetryReading(500, 500, 2000.0, 500, 500)
        with pytest.raises(ValidationError):
            PachymetryReading(float("nan"), 500, 500, 500, 500)


class TestBuildFeatureVector:
    @pytest.fixture
    def grid(self):
        return ScalarGrid(np.random.default_rng(30).random((40, 40)) * 100 + 500)

    def test_lengths_per_combo(self, grid):
        assert len(build_feature_vector(grid, reading(), "maxdiff", 8).values) == 10
        assert len(build_feature_vector(grid, reading(), "mindiff", 8).values) == 10
        assert len(build_feature_vector(grid, reading(), "maxmindiff", 8).values) == 11

    def test_components_match_individual_features(self, grid):
        r = reading()
        vec = build_feature_vector(grid, r, "maxmindiff", 6)
        assert vec.combo == "CorrFftMaxMinDiff"
        assert vec.values[0] == symmetry_correlation(grid)
        assert list(vec.values[1:7]) == fft_spectrum_energy(grid, 6)
        assert vec.values[7] == max_power(r)
        assert vec.values[8] == min_power(r)
        assert vec.names[0] == "correlation"
        assert vec.names[-2:] == ("max_power", "min_power")

    def test_canonical_combo_names_accepted(self, grid):
        vec = build_feature_vector(grid, reading(), "CorrFftMaxDiff", 4)
        assert vec.names[-1] == "max_power"

    def test_unknown_combo(self, grid):
        with pytest.raises(ValidationError):
            build_feature_vector(grid, reading(), "everything", 8)

    def test_feature_vector_round_trip(self, grid):
        vec = build_feature_vector(grid, reading(), "mindiff", 8)
        clone = FeatureVector.from_dict(vec.to_dict())
        assert clone.combo == vec.combo
        assert clone.names == vec.names
        assert np.array_equal(clone.values, vec.values)


class TestPachymetryCsv:
    def test_round_trip(self, tmp_path):
        r = PachymetryReading(543.21, 600.5, 611.125, 598.0, 607.75)
        path = tmp_path / "pachy.csv"
        write_pachymetry_csv(path, r)
        assert load_pachymetry_csv(path) == r

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("a,b,c,d,e\n1,2,3,4,5\n")
        with pytest.raises(IoError):
            load_pachymetry_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("center,up,down,left,right\n")
        with pytest.raises(IoError):
            load_pachymetry_csv(path)
