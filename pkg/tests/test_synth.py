import numpy as np
import pytest

from corneakit.dataset import Dataset, make_synthetic_dataset, stratified_split
from corneakit.errors import InvalidParams, ValidationError
from corneakit.features import min_power, symmetry_correlation
from corneakit.imgprep import ScalarGrid
from corneakit.synth import (
    HEALTHY,
    LASIK,
    SyntheticParams,
    overlay_dark_grid,
    synth_topography,
    thickness_colormap,
)


class TestParams:
    def test_defaults_valid(self):
        SyntheticParams()

    def test_healthy_range_must_sit_in_clinical_band(self):
        with pytest.raises(InvalidParams):
            SyntheticParams(healthy_center_range=(300.0, 600.0))
        with pytest.raises(InvalidParams):
            SyntheticParams(healthy_center_range=(500.0, 900.0))

    def test_lasik_range_below_healthy(self):
        with pytest.raises(InvalidParams):
            SyntheticParams(lasik_center_range=(400.0, 550.0))
        with pytest.raises(InvalidParams):
            SyntheticParams(lasik_center_range=(-10.0, 400.0))

    def test_grid_side_minimum(self):
        with pytest.raises(InvalidParams):
            SyntheticParams(grid_side=16)

    def test_negative_noise_rejected(self):
        with pytest.raises(InvalidParams):
            SyntheticParams(noise_std=-1.0)


class TestGenerator:
    def test_deterministic_for_same_seed(self):
        params = SyntheticParams(seed=5)
        a = synth_topography(LASIK, params, 12)
        b = synth_topography(LASIK, params, 12)
        assert np.array_equal(a[0].values, b[0].values)
        assert a[1] == b[1]
        assert np.array_equal(a[2].data, b[2].data)

    def test_different_seeds_differ(self):
        params = SyntheticParams(seed=5)
        a = synth_topography(HEALTHY, params, 0)
        b = synth_topography(HEALTHY, params, 1)
        assert not np.array_equal(a[0].values, b[0].values)

    def test_noiseless_healthy_is_mirror_symmetric(self):
        params = SyntheticParams(noise_std=0.0)
        grid, _, _ = synth_topography(HEALTHY, params, 3)
        assert symmetry_correlation(grid) == pytest.approx(1.0, abs=1e-9)

    def test_lasik_reading_contract_over_seeds(self):
        params = SyntheticParams()
        for seed in range(100):
            _, reading, _ = synth_topography(LASIK, params, seed)
            assert min_power(reading) > 0.0
            assert reading.center < 460.0

    def test_class_separation_margin_noiseless(self):
        params = SyntheticParams(noise_std=0.0)
        for seed in range(50):
            _, healthy, _ = synth_topography(HEALTHY, params, seed)
            _, lasik, _ = synth_topography(LASIK, params, seed)
            assert min_power(lasik) - min_power(healthy) > 0.0

    def test_unknown_label(self):
        with pytest.raises(ValidationError):
            synth_topography("Unknown", SyntheticParams(), 0)

    def test_grid_side_respected(self):
        params = SyntheticParams(grid_side=65)
        grid, _, image = synth_topography(HEALTHY, params, 0)
        assert grid.values.shape == (65, 65)
        assert image.data.shape == (65, 65, 3)


class TestRendering:
    def test_colormap_never_dark(self):
        params = SyntheticParams()
        for seed in range(5):
            for label in (HEALTHY, LASIK):
                _, _, image = synth_topography(label, params, seed)
                assert image.data.max(axis=2).min() >= 128

    def test_colormap_scale_anchors(self):
        lo = thickness_colormap(ScalarGrid(np.full((2, 2), 300.0)))
        hi = thickness_colormap(ScalarGrid(np.full((2, 2), 800.0)))
        assert tuple(lo.data[0, 0]) == (0, 0, 255)
        assert tuple(hi.data[0, 0]) == (255, 0, 0)

    def test_overlay_draws_expected_lines(self):
        params = SyntheticParams(noise_std=0.0)
        _, _, clean = synth_topography(HEALTHY, params, 0)
        overlaid = overlay_dark_grid(clean, spacing=20)
        assert np.all(overlaid.data[10, :] == 0)
        assert np.all(overlaid.data[:, 30] == 0)
        untouched = np.ones(clean.height, dtype=bool)
        untouched[10::20] = False
        assert np.array_equal(overlaid.data[untouched][:, untouched], clean.data[untouched][:, untouched])

    def test_params_overlay_flag(self):
        params = SyntheticParams(grid_overlay_spacing=16)
        _, _, image = synth_topography(HEALTHY, params, 0)
        assert (image.data.max(axis=2) < 60).sum() > 0


class TestDataset:
    def test_make_synthetic_unique_ids_and_labels(self):
        dataset = make_synthetic_dataset(5, SyntheticParams())
        assert len(dataset.entries) == 10
        ids = [e.sample_id for e in dataset.entries]
        assert len(set(ids)) == 10
        assert sum(e.label == HEALTHY for e in dataset.entries) == 5

    def test_duplicate_ids_rejected(self):
        dataset = make_synthetic_dataset(2, SyntheticParams())
        entries = dataset.entries + [dataset.entries[0]]
        with pytest.raises(ValidationError):
            Dataset(entries)

    def test_stratified_split_counts(self):
        dataset = make_synthetic_dataset(20, SyntheticParams())
        stratified_split(dataset, 0.3, seed=9)
        assert set(dataset.split) == {e.sample_id for e in dataset.entries}
        train, test = dataset.subset("train"), dataset.subset("test")
        assert len(train) == 28 and len(test) == 12
        for label in (HEALTHY, LASIK):
            assert sum(e.label == label for e in test) == 6

    def test_split_deterministic(self):
        a = make_synthetic_dataset(10, SyntheticParams())
        b = make_synthetic_dataset(10, SyntheticParams())
        stratified_split(a, 0.3, seed=4)
        stratified_split(b, 0.3, seed=4)
        assert a.split == b.split

    def test_bad_test_fraction(self):
        dataset = make_synthetic_dataset(2, SyntheticParams())
        with pytest.raises(ValidationError):
            stratified_split(dataset, 1.5, seed=0)
