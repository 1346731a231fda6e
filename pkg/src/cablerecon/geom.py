"""Shared geometric primitives and frame conventions.

Base frame is right-handed and z-up; every cloud and pose in the package
lives in this single frame. Rotation matrices use the column convention:
columns are the end-effector x, y, z axes expressed in the base frame.
Public angles are degrees; conversion to radians happens once, here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError

UNIT_TOL = 1e-9


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < UNIT_TOL:
        raise DegenerateGeometryError("cannot normalize a near-zero vector")
    return np.asarray(v, dtype=float) / n


def is_rotation(mat: np.ndarray, tol: float = UNIT_TOL) -> bool:
    """True if `mat` is orthonormal with determinant +1 within `tol`."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (3, 3):
        return False
    if not np.allclose(mat.T @ mat, np.eye(3), atol=tol):
        return False
    return abs(np.linalg.det(mat) - 1.0) <= tol


@dataclass
class Pose:
    """Rigid placement of a frame in the base frame.

    rotation: 3x3 matrix whose columns are the frame axes in base
    coordinates; translation: frame origin in meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        if not is_rotation(self.rotation, tol=1e-8):
            raise ValueError("pose rotation must be orthonormal with det +1")

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map points (N,3) or (3,) from this frame into the base frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


def rotation_about_axis(axis: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis by `angle_deg` degrees."""
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
        raise ValueError("rotation axis must be unit-norm")
    theta = np.radians(angle_deg)
    kx, ky, kz = axis
    k_cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return (
        np.eye(3)
        + np.sin(theta) * k_cross
        + (1.0 - np.cos(theta)) * (k_cross @ k_cross)
    )


def frame_from_y_z(y_dir: np.ndarray, z_dir: np.ndarray) -> np.ndarray:
    """Right-handed frame with z trusted and y corrected to be orthogonal.

    z column = normalize(z_dir); y column = y_dir minus its z component,
    normalized; x column = y x z. The z direction comes from the fitted
    plane and is kept exact; y comes from noisy cloud differences and is
    Gram-Schmidt corrected against z. Raises DegenerateGeometryError when
    the inputs are within 1 degree of parallel.
    """
    z = normalize(z_dir)
    y_raw = np.asarray(y_dir, dtype=float)
    y_norm = np.linalg.norm(y_raw)
    if y_norm < UNIT_TOL:
        raise DegenerateGeometryError("y direction is near zero")
    cos_angle = abs(float(np.dot(y_raw / y_norm, z)))
    if cos_angle > np.cos(np.radians(1.0)):
        raise DegenerateGeometryError(
            "y and z directions are within 1 degree of parallel"
        )
    y = y_raw - np.dot(y_raw, z) * z
    y = y / np.linalg.norm(y)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


@dataclass
class ReconParams:
    """Tunable parameters of the reconstruction pipeline.

    The first seven follow the published defaults for cable reconstruction;
    the rest are implementation parameters of this artifact. Distances are
    meters, angles degrees, pressures in simulated taxel units.
    """

    d_min: float = 0.0150       # stop distance to an endpoint
    d_m: float = 0.0200         # voxel edge for downsampling
    t_p: float = 0.0080         # midpoint-merge distance threshold
    t_h: float = 0.0011         # contact-curvature indicator threshold
    delta_y: float = 0.0100     # advance step along the cable
    delta_z: float = 0.0015     # descent step toward the surface
    theta_deg: float = 15.0     # retry rotation about the plane normal
    r_search: float = 0.0350    # sorter neighbor radius (1.75 * d_m)
    alpha_max_deg: float = 75.0  # sorter angular deviation cap
    max_rotation_attempts: int = 24  # 360 / theta_deg
    eps_contact: float = 0.05   # touch detection pressure threshold
    probe_budget: int = 10000   # hard cap on probe calls per run
    hover_height: float = 0.0200  # descent start height above the plane
    voxel_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.voxel_origin = np.asarray(self.voxel_origin, dtype=float)
        for name in (
            "d_min", "d_m", "t_p", "t_h", "delta_y", "delta_z", "theta_deg",
            "r_search", "alpha_max_deg", "max_rotation_attempts",
            "eps_contact", "probe_budget", "hover_height",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        ratio = 360.0 / self.theta_deg
        if self.max_rotation_attempts == round(ratio) and abs(
            ratio - round(ratio)
        ) > 1e-9:
            raise ValueError("theta_deg must divide 360 evenly")

    def replace(self, **overrides) -> "ReconParams":
        """Copy with some fields overridden."""
        kwargs = {
            "d_min": self.d_min, "d_m": self.d_m, "t_p": self.t_p,
            "t_h": self.t_h, "delta_y": self.delta_y, "delta_z": self.delta_z,
            "theta_deg": self.theta_deg, "r_search": self.r_search,
            "alpha_max_deg": self.alpha_max_deg,
            "max_rotation_attempts": self.max_rotation_attempts,
            "eps_contact": self.eps_contact,
            "probe_budget": self.probe_budget,
            "hover_height": self.hover_height,
            "voxel_origin": self.voxel_origin.copy(),
        }
        kwargs.update(overrides)
        return ReconParams(**kwargs)
