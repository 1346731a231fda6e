import numpy as np
import pytest
from hypothesis import given, strategies as st

from cablerecon.errors import DegenerateGeometryError
from cablerecon.geom import (
    ReconParams,
    frame_from_y_z,
    is_rotation,
    rotation_about_axis,
)

Z = np.array([0.0, 0.0, 1.0])


class TestRotationAboutAxis:
    def test_zero_angle_is_identity(self):
        assert np.allclose(rotation_about_axis(Z, 0.0), np.eye(3))

    def test_quarter_turn_about_z(self):
        r = rotation_about_axis(Z, 90.0)
        assert np.allclose(r @ np.array([1.0, 0, 0]), [0, 1, 0], atol=1e-12)

    def test_24_composed_15_degree_steps_close_the_circle(self):
        r = rotation_about_axis(Z, 15.0)
        acc = np.eye(3)
        for _ in range(24):
            acc = acc @ r
        assert np.abs(acc - np.eye(3)).max() < 1e-9

    def test_non_unit_axis_rejected(self):
        with pytest.raises(ValueError):
            rotation_about_axis(np.array([0.0, 0.0, 2.0]), 10.0)

    @given(
        st.floats(-360, 720),
        st.integers(0, 2),
    )
    def test_always_a_proper_rotation(self, angle, axis_index):
        axis = np.eye(3)[axis_index]
        assert is_rotation(rotation_about_axis(axis, angle))


class TestFrameFromYZ:
    def test_axis_aligned(self):
        f = frame_from_y_z(np.array([0.0, 1, 0]), Z)
        assert np.allclose(f, np.eye(3))

    def test_gram_schmidt_removes_z_component(self):
        f = frame_from_y_z(np.array([0.0, 1.0, 0.5]), Z)
        assert np.allclose(f[:, 1], [0, 1, 0], atol=1e-12)

    def test_x_column_is_y_cross_z(self):
        y = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        f = frame_from_y_z(y, Z)
        assert np.allclose(f[:, 0], [1 / np.sqrt(2), -1 / np.sqrt(2), 0])

    def test_near_parallel_inputs_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            frame_from_y_z(np.array([1e-3, 0, 1.0]), Z)

    def test_scale_invariance(self):
        y = np.array([0.3, 1.0, 0.2])
        z = np.array([0.1, -0.2, 2.0])
        a = frame_from_y_z(y, z)
        b = frame_from_y_z(17.3 * y, 0.004 * z)
        assert np.abs(a - b).max() < 1e-12

    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3),
        st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    )
    def test_result_is_orthonormal_right_handed(self, y, z):
        y = np.asarray(y)
        z = np.asarray(z)
        ny, nz = np.linalg.norm(y), np.linalg.norm(z)
        if ny < 1e-3 or nz < 1e-3:
            return
        cos = abs(np.dot(y / ny, z / nz))
        if cos > np.cos(np.radians(2.0)):
            return
        assert is_rotation(frame_from_y_z(y, z))


class TestReconParams:
    def test_published_defaults(self):
        p = ReconParams()
        assert p.d_min == 0.0150
        assert p.d_m == 0.0200
        assert p.t_p == 0.0080
        assert p.t_h == 0.0011
        assert p.delta_y == 0.0100
        assert p.delta_z == 0.0015
        assert p.theta_deg == 15.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ReconParams(d_m=0.0)

    def test_theta_must_divide_full_turn_when_attempts_match(self):
        with pytest.raises(ValueError):
            ReconParams(theta_deg=17.0, max_rotation_attempts=round(360 / 17.0))

    def test_replace_copies(self):
        p = ReconParams()
        q = p.replace(delta_y=0.02)
        assert q.delta_y == 0.02 and p.delta_y == 0.01
