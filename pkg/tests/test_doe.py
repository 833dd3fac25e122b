import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynshape.doe import (
    DesignMatrix,
    InputBox,
    lhd_sample,
    maximin_lhd,
    min_pairwise_distance,
    normalize_to_unit,
    scale_to_box,
)

TABLE_BOX = InputBox(
    lower=np.array([0.15, 10.0, 0.5]),
    upper=np.array([0.35, 300.0, 1.0]),
    names=("PORO", "KSAND", "KRSAND"),
)


def assert_stratified(points):
    n = points.shape[0]
    for col in points.T:
        strata = np.floor(col * n).astype(int)
        assert sorted(strata) == list(range(n))


class TestLhdSample:
    def test_stratification_4x2(self):
        pts = lhd_sample(4, 2, seed=0).points
        for col in pts.T:
            for lo in (0.0, 0.25, 0.5, 0.75):
                assert ((col >= lo) & (col < lo + 0.25)).sum() == 1

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 40), d=st.integers(1, 5), seed=st.integers(0, 10**6))
    def test_stratification_property(self, n, d, seed):
        assert_stratified(lhd_sample(n, d, seed).points)

    def test_co2_study_size(self):
        design = lhd_sample(30, 3, seed=5)
        assert design.points.shape == (30, 3)
        assert_stratified(design.points)

    def test_degenerate_n_rejected(self):
        with pytest.raises(ValueError):
            lhd_sample(1, 2, seed=0)
        with pytest.raises(ValueError):
            lhd_sample(5, 0, seed=0)

    def test_deterministic(self):
        a = lhd_sample(12, 3, seed=42).points
        b = lhd_sample(12, 3, seed=42).points
        assert np.array_equal(a, b)
        assert not np.array_equal(a, lhd_sample(12, 3, seed=43).points)


class TestMaximin:
    def test_single_restart_improves_base(self):
        base = lhd_sample(10, 2, seed=7)
        improved = maximin_lhd(10, 2, seed=7, restarts=1)
        assert min_pairwise_distance(improved.points) >= min_pairwise_distance(base.points)
        assert_stratified(improved.points)

    def test_two_points_one_dim(self):
        pts = maximin_lhd(2, 1, seed=0, restarts=3).points
        strata = np.floor(pts[:, 0] * 2).astype(int)
        assert sorted(strata) == [0, 1]
        assert min_pairwise_distance(pts) > 0

    def test_beats_plain_lhd_ensemble(self):
        # the maximin search must beat the median of its own restart pool
        n, d, seed, restarts = 30, 3, 11, 50
        champion = maximin_lhd(n, d, seed=seed, restarts=restarts)
        plain = [min_pairwise_distance(lhd_sample(n, d, seed + r).points) for r in range(restarts)]
        assert min_pairwise_distance(champion.points) > float(np.median(plain))

    def test_deterministic(self):
        a = maximin_lhd(9, 2, seed=3, restarts=5).points
        b = maximin_lhd(9, 2, seed=3, restarts=5).points
        assert np.array_equal(a, b)

    def test_restart_validation(self):
        with pytest.raises(ValueError):
            maximin_lhd(5, 2, seed=0, restarts=0)


class TestScaleToBox:
    def test_table_corners(self):
        design = DesignMatrix(points=np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]), normalized=True)
        scaled = scale_to_box(design, TABLE_BOX)
        np.testing.assert_allclose(scaled.points[0], [0.15, 10.0, 0.5])
        np.testing.assert_allclose(scaled.points[1], [0.35, 300.0, 1.0])
        assert not scaled.normalized

    def test_identity_box(self):
        box = InputBox(lower=np.zeros(2), upper=np.ones(2))
        design = lhd_sample(6, 2, seed=1)
        scaled = scale_to_box(design, box)
        assert np.array_equal(scaled.points, design.points)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            scale_to_box(lhd_sample(4, 2, seed=0), TABLE_BOX)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_affine_round_trip(self, seed):
        design = lhd_sample(8, 3, seed=seed)
        back = normalize_to_unit(scale_to_box(design, TABLE_BOX), TABLE_BOX)
        np.testing.assert_allclose(back.points, design.points, rtol=1e-12, atol=1e-15)


class TestInputBox:
    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            InputBox(lower=np.array([0.0, 1.0]), upper=np.array([1.0, 1.0]))

    def test_names_length(self):
        with pytest.raises(ValueError):
            InputBox(lower=np.zeros(2), upper=np.ones(2), names=("a",))
