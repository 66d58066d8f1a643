import numpy as np
import pytest

from nph2ph.data.survival import TrialData
from nph2ph.data.timescale import build, from_unit, to_unit
from nph2ph.exceptions import NoInformativeFailures


def test_build_drops_uninformative_failures(small_trial):
    ts = build(small_trial)
    np.testing.assert_array_equal(ts.times, [1.0, 2.0])
    assert ts.k == 2
    np.testing.assert_array_equal(ts.units, [0.5, 1.0])
    # The failure at 4 happens with group 1 gone
    np.testing.assert_array_equal(ts.excluded, [4])


def test_build_can_keep_uninformative_failures(small_trial):
    with pytest.warns(UserWarning):
        ts = build(small_trial, exclude_uninformative=False)
    np.testing.assert_array_equal(ts.times, [1.0, 2.0, 4.0])
    assert ts.excluded.size == 0


def test_build_without_informative_failures():
    one_arm = TrialData.from_arrays([1.0, 2.0], [1, 1], [0, 0])
    with pytest.raises(NoInformativeFailures):
        build(one_arm)
    censored = TrialData.from_arrays([1.0, 2.0], [0, 0], [0, 1])
    with pytest.raises(NoInformativeFailures):
        build(censored)


def test_to_unit_is_a_right_continuous_step(small_trial):
    ts = build(small_trial)
    np.testing.assert_array_equal(
        to_unit(ts, np.array([0.5, 1.0, 1.5, 2.0, 10.0])), [0.0, 0.5, 0.5, 1.0, 1.0]
    )
    assert to_unit(ts, 1.0) == 0.5


def test_from_unit(small_trial):
    ts = build(small_trial)
    assert from_unit(ts, 0.0) == 0.0
    assert from_unit(ts, 0.3) == 1.0
    assert from_unit(ts, 0.5) == 1.0
    assert from_unit(ts, 0.51) == 2.0
    assert from_unit(ts, 1.0) == 2.0
    with pytest.raises(ValueError):
        from_unit(ts, 1.5)


def test_unit_and_original_scales_invert_on_the_grid(ph_trial):
    ts = build(ph_trial)
    np.testing.assert_array_equal(from_unit(ts, to_unit(ts, ts.times)), ts.times)
    np.testing.assert_allclose(to_unit(ts, from_unit(ts, ts.units)), ts.units)


def test_to_frame(small_trial):
    frame = build(small_trial).to_frame()
    assert list(frame.columns) == ["original", "unit"]
    assert len(frame) == 2


def test_four_subjects_with_alternating_groups():
    data = TrialData.from_arrays([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1], [1, 0, 1, 0])
    ts = build(data)
    assert ts.k == 3
    np.testing.assert_array_equal(ts.times, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("transform", [lambda t: t ** 3, np.log1p, lambda t: 5.0 * t + 2.0])
def test_grid_size_ignores_increasing_time_transforms(ph_trial, transform):
    moved = TrialData.from_arrays(transform(ph_trial.time), ph_trial.event, ph_trial.group)
    original, transformed = build(ph_trial), build(moved)
    assert transformed.k == original.k
    np.testing.assert_array_equal(transformed.units, original.units)
