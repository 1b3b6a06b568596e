import numpy as np
import pytest
import trimesh

from tacslam.geometry import TransformSE3
from tacslam.sim import (BumpySphere, InvalidObjectSpec, MeshObject, NoContact, PhotometricModel, RenderParams,
                         Sphere, Superellipsoid, contact_pose, make_object, perturb_normals, render_frame)
from tacslam.surface import SensorSpec


def test_factory_builds_every_kind():
    assert isinstance(make_object({"kind": "sphere", "radius": 5.0}), Sphere)
    assert isinstance(make_object({"kind": "superellipsoid", "a": 6.0}), Superellipsoid)
    bumpy = make_object({"amplitude": 0.05})
    assert isinstance(bumpy, BumpySphere) and bumpy.texture_amplitude == 0.05


@pytest.mark.parametrize("spec", [
    {"kind": "cube"},
    {"kind": "sphere", "radius": -1.0},
    {"kind": "sphere", "edge": 2.0},
    {"kind": "bumpy-sphere", "radius": 4.0, "amplitude": 1.0},
    {"kind": "mesh"},
])
def test_factory_rejects_bad_specs(spec):
    with pytest.raises(InvalidObjectSpec):
        make_object(spec)


def test_open_mesh_is_rejected(tmp_path):
    path = tmp_path / "tri.ply"
    trimesh.Trimesh(np.eye(3), [[0, 1, 2]], process=False).export(path)
    with pytest.raises(InvalidObjectSpec, match="watertight"):
        make_object({"kind": "mesh", "path": str(path)})


def test_texture_bounded_by_indentation():
    with pytest.raises(InvalidObjectSpec):
        BumpySphere(radius=8.0, amplitude=1.5).validate(SensorSpec())
    BumpySphere(radius=8.0, amplitude=0.5).validate(SensorSpec())


def test_surface_points():
    p, n = Sphere(5.0).surface_point(np.array([0.0, 0.0, 2.0]))
    assert np.allclose(p, [0.0, 0.0, 5.0]) and np.allclose(n, [0.0, 0.0, 1.0], atol=1e-4)
    mesh_obj = MeshObject(trimesh.creation.icosphere(subdivisions=3, radius=4.0))
    q, m = mesh_obj.surface_point(np.array([1.0, 1.0, 0.0]))
    assert np.linalg.norm(q) == pytest.approx(4.0, abs=0.05)
    assert np.dot(m, q / np.linalg.norm(q)) > 0.95


def test_press_on_sphere(spec):
    ball = Sphere(8.0)
    pose = contact_pose(np.array([0.0, 0.0, 8.0]), np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), depth=1.0)
    r = render_frame(ball, pose, spec, RenderParams(noise_deg=0.0, gel_sigma=0.0))
    assert r.in_contact
    cu, cv = spec.center
    v, u = np.nonzero(r.mask)
    assert u.mean() == pytest.approx(cu, abs=0.5) and v.mean() == pytest.approx(cv, abs=0.5)
    # contact radius sqrt(2 R d - d^2) for a rigid ball
    assert np.sqrt(r.mask.sum() / np.pi) * spec.pitch == pytest.approx(np.sqrt(15.0), rel=0.05)
    assert r.height.max() == pytest.approx(1.0 / spec.pitch, rel=0.02)
    assert np.allclose(np.linalg.norm(r.normal, axis=-1), 1.0)
    assert r.rgb.shape == spec.shape + (3,) and r.rgb.min() >= 0.0 and r.rgb.max() <= 1.0


def test_lifted_sensor_sees_nothing(spec):
    pose = TransformSE3(np.eye(3), [0.0, 0.0, 20.0])
    r = render_frame(Sphere(8.0), pose, spec)
    assert not r.in_contact
    with pytest.raises(NoContact):
        render_frame(Sphere(8.0), pose, spec, RenderParams(allow_empty=False))


def test_normal_noise_is_seeded_and_small():
    n = np.zeros((30, 30, 3))
    n[..., 2] = -1.0
    a = perturb_normals(n, 0.5, np.random.default_rng(1))
    b = perturb_normals(n, 0.5, np.random.default_rng(1))
    assert np.array_equal(a, b)
    angle = np.degrees(np.arccos(np.clip(-a[..., 2], -1.0, 1.0)))
    assert 0.0 < angle.mean() < 2.0
    assert np.allclose(np.linalg.norm(a, axis=-1), 1.0)


def test_photometric_inverse_on_lit_cone():
    model = PhotometricModel()
    assert model.is_injective()
    rng = np.random.default_rng(2)
    g = rng.normal(0, 0.3, size=(500, 2))
    n = np.column_stack([g, -np.ones(500)])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    assert np.allclose(model.invert(model.render(n)), n, atol=1e-9)
