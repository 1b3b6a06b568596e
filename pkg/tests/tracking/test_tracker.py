import numpy as np
import pytest

from tacslam.geometry import TransformSE3, pose_difference
from tacslam.sim import contact_pose
from tacslam.tracking import FailureThresholds, TrackEvent, Tracker, TrackingParams


def shift(tx, ty, deg=0.0):
    return TransformSE3.from_rotvec([0.0, 0.0, np.radians(deg)], [tx, ty, 0.0])


LIFT = TransformSE3(np.eye(3), [0.0, 0.0, 5.0])


@pytest.fixture
def far_pose(textured):
    point, normal = textured.surface_point(np.array([1.0, 0.0, 0.0]))
    return contact_pose(point, normal, np.array([0.0, 1.0, 0.0]), depth=1.0)


def test_profiles_and_overrides():
    assert FailureThresholds.profile("tracking") == FailureThresholds(0.85, 0.3)
    assert FailureThresholds.profile("reconstruction") == FailureThresholds(0.7, 0.3)
    assert TrackingParams(profile="tracking", scr_min=0.5).thresholds == FailureThresholds(0.85, 0.5)
    with pytest.raises(ValueError):
        FailureThresholds.profile("fast")
    with pytest.raises(ValueError):
        FailureThresholds(1.2, 0.3)


def test_tracks_small_motion_against_first_keyframe(spec, base_pose, press):
    truth = [shift(0.05 * k, 0.02 * k, 0.5 * k) for k in range(6)]
    tracker = Tracker(spec)
    results = [tracker.track(press(base_pose @ D, k, k / 25)) for k, D in enumerate(truth)]

    assert results[0].event is TrackEvent.NEW_KEYFRAME
    assert [r.event for r in results[1:]] == [TrackEvent.TRACKED] * 5
    assert tracker.state.keyframes == [0]
    poses = tracker.session_poses()
    for k, D in enumerate(truth):
        deg, mm = pose_difference(poses[k], D)
        assert deg < 1.0 and mm < 0.05, k


def test_failure_promotes_previous_frame_then_opens_session(spec, base_pose, far_pose, press):
    tracker = Tracker(spec)
    tracker.track(press(base_pose, 0))
    tracker.track(press(base_pose @ shift(0.1, 0.0), 1))
    res = tracker.track(press(far_pose, 2))

    assert res.event is TrackEvent.TRACKING_LOST
    assert [kf.id for kf in res.new_keyframes] == [1, 2]
    assert [(c.i, c.j) for c in res.constraints] == [(0, 1)]
    assert tracker.n_sessions == 2
    assert tracker.state.sessions == {0: 0, 1: 0, 2: 1}
    # the promoted keyframe keeps its tracked pose, the new session restarts at identity
    assert pose_difference(tracker.state.keyframe_poses[1], shift(0.1, 0.0))[1] < 0.05
    assert tracker.state.keyframe_poses[2].allclose(TransformSE3.identity())


def test_lost_contact_and_new_session(spec, base_pose, press):
    tracker = Tracker(spec)
    tracker.track(press(base_pose, 0))
    lost = tracker.track(press(base_pose @ LIFT, 1))
    assert lost.event is TrackEvent.TRACKING_LOST
    assert lost.new_keyframes == ()
    assert not tracker.state.active

    idle = tracker.track(press(base_pose @ LIFT, 2))
    assert idle.event is None

    again = tracker.track(press(base_pose @ shift(0.3, 0.0), 3))
    assert again.event is TrackEvent.NEW_KEYFRAME
    assert again.new_keyframes[0].session == 1
    assert tracker.n_sessions == 2
    assert sorted(tracker.state.anchors) == [0, 3]


def test_frames_must_arrive_in_order(spec, base_pose, press):
    tracker = Tracker(spec)
    tracker.track(press(base_pose, 5))
    with pytest.raises(ValueError):
        tracker.track(press(base_pose, 4))
