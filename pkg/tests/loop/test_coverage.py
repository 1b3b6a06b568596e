import numpy as np
import pytest

from tacslam.geometry import TransformSE3
from tacslam.loop import CoverageSet, cell_keys, coverage_update
from tacslam.sim import contact_pose
from tacslam.tracking import Keyframe


LIFT = TransformSE3(np.eye(3), [0.0, 0.0, 5.0])


@pytest.fixture
def far_pose(textured):
    point, normal = textured.surface_point(np.array([0.0, 1.0, 0.0]))
    return contact_pose(point, normal, np.array([1.0, 0.0, 0.0]), depth=1.0)


def test_cell_keys_unique_per_cell():
    pts = np.array([[0.01, 0.01, 0.01], [0.2, 0.2, 0.2], [0.3, 0.0, 0.0], [-0.1, 0.0, 0.0]])
    keys = cell_keys(pts, 0.25)
    assert len(keys) == 3


def test_duplicate_keyframe_is_not_added(spec, base_pose, keyframe_at):
    cov = CoverageSet(spec)
    assert cov.update(keyframe_at(base_pose, 0), base_pose)
    area = cov.union_area()
    assert area > 1.0
    assert not cov.update(keyframe_at(base_pose, 1), base_pose)
    assert cov.members == [0]
    assert cov.union_area() == pytest.approx(area)


def test_distant_keyframe_is_added_and_both_kept(spec, base_pose, far_pose, keyframe_at):
    cov = CoverageSet(spec)
    cov = coverage_update(cov, keyframe_at(base_pose, 0), base_pose)
    first = cov.union_area()
    cov = coverage_update(cov, keyframe_at(far_pose, 1), far_pose)
    assert cov.members == [0, 1]
    assert cov.union_area() > first
    assert cov.unique_area(0) > cov.area_min and cov.unique_area(1) > cov.area_min
    assert [kf.id for kf in cov] == [0, 1]


def test_empty_keyframe_never_joins(spec, base_pose, keyframe_at):
    cov = CoverageSet(spec)
    assert not cov.update(keyframe_at(base_pose @ LIFT, 0), base_pose)
    assert len(cov) == 0


def test_pose_update_moves_footprints(spec, base_pose, far_pose, keyframe_at):
    cov = CoverageSet(spec)
    cov.update(keyframe_at(base_pose, 0), base_pose)
    before = cov.footprint(0)
    cov.set_poses({0: far_pose})
    assert cov.pose(0) is far_pose
    assert len(np.intersect1d(before, cov.footprint(0))) == 0
    assert 0 in cov and 1 not in cov


def test_rejects_bad_parameters(spec):
    with pytest.raises(ValueError):
        CoverageSet(spec, cell_size=0.0)
    with pytest.raises(ValueError):
        CoverageSet(spec, area_min=-1.0)


def test_protected_member_survives_prune(spec, base_pose, keyframe_at):
    cov = CoverageSet(spec, area_min=0.0)
    kf0, kf1 = keyframe_at(base_pose, 0), keyframe_at(base_pose, 1)
    cov.update(kf0, base_pose)
    # force a second identical member in, then prune around it
    cov._insert(kf1, cov._lift(kf1), base_pose)
    removed = cov.prune(protect=1)
    assert removed == [0]
    assert cov.members == [1]
    assert isinstance(cov.keyframe(1), Keyframe)
