import numpy as np
import pytest

from tacslam.geometry import TransformSE3
from tacslam.sim import BumpySphere, RenderParams, contact_pose, render_frame
from tacslam.surface import SensorSpec, frame_from_normals
from tacslam.tracking import Keyframe


@pytest.fixture(autouse=True)
def _isolated_store(tmp_path, monkeypatch):
    # Never read or write the real ~/.config/tacslam store from tests
    import tacslam.config
    monkeypatch.setattr(tacslam.config, "CONFIG_FILE", tmp_path / "store" / ".config.json")


@pytest.fixture
def spec():
    # 12.8 x 9.6 mm gel at 0.1 mm/px keeps the maps small
    return SensorSpec(width=128, height=96, pitch=0.1)


@pytest.fixture
def textured():
    return BumpySphere(radius=8.0, amplitude=0.05, frequency=0.8, n_waves=8, seed=3)


@pytest.fixture
def base_pose(textured):
    point, normal = textured.surface_point(np.array([0.0, 0.0, 1.0]))
    return contact_pose(point, normal, np.array([1.0, 0.0, 0.0]), depth=1.0)


@pytest.fixture
def press(spec, textured):
    """Noise-free frame of the textured sphere at a sensor pose."""
    def _press(pose: TransformSE3, frame_id: int = 0, timestamp: float = 0.0):
        r = render_frame(textured, pose, spec, RenderParams(noise_deg=0.0))
        return frame_from_normals(frame_id, timestamp, r.normal)
    return _press


@pytest.fixture
def keyframe_at(press):
    def _keyframe(pose: TransformSE3, kf_id: int, session: int = 0):
        return Keyframe(kf_id, session, press(pose, kf_id, 0.04 * kf_id), pose)
    return _keyframe
