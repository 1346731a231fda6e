"""Simulation oracle: ground-truth cables, synthetic camera, tactile pad.

Stands in for the physical bench: a support plane carrying spline-shaped
cables, axis-aligned occluder boxes that block the camera but not the
probe, a pinhole RGB-D render, and a rigid quasi-static contact model for
the 6x2 taxel pad. Everything is deterministic given the scene seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .cloudproc import PlaneModel, project_to_plane
from .errors import EmptyContactError, InvalidViewError
from .fitting import BSplineCurve, sample_curve
from .geom import Pose
from .imgproc import CameraIntrinsics, ImageGrid

PRESSURE_GAIN = 1000.0   # pressure units per meter of penetration
EPS_CONTACT = 0.05       # touch threshold in pressure units
DENSE_SAMPLES = 4096     # centerline discretization for distance queries

SHELF_COLOR = np.array([185.0, 170.0, 150.0])
OCCLUDER_COLOR = np.array([90.0, 90.0, 95.0])


def _point_to_polyline(queries: np.ndarray, samples: np.ndarray, tree: cKDTree):
    """Distance from each query to the polyline through `samples`.

    Uses the nearest sample then exact point-to-segment distance on its two
    adjacent segments; works for 2D and 3D. Returns (distances, closest).
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    _, idx = tree.query(q)
    best_d = np.full(len(q), np.inf)
    best_p = np.zeros((len(q), samples.shape[1]))
    for off in (-1, 0):
        i0 = np.clip(idx + off, 0, len(samples) - 2)
        a = samples[i0]
        b = samples[i0 + 1]
        ab = b - a
        denom = (ab * ab).sum(axis=1)
        t = np.clip(
            np.where(denom > 0, ((q - a) * ab).sum(axis=1) / np.maximum(denom, 1e-300), 0.0),
            0.0,
            1.0,
        )
        proj = a + t[:, None] * ab
        d = np.linalg.norm(q - proj, axis=1)
        closer = d < best_d
        best_d[closer] = d[closer]
        best_p[closer] = proj[closer]
    return best_d, best_p


@dataclass
class GroundTruthCable:
    """Parametric cable: a C2 centerline one radius above the plane."""

    centerline: BSplineCurve
    radius: float
    color: np.ndarray  # RGB in [0, 255]

    def __post_init__(self):
        self.color = np.asarray(self.color, dtype=float)
        if self.radius <= 0:
            raise ValueError("cable radius must be positive")
        self._samples = sample_curve(self.centerline, DENSE_SAMPLES)
        self._tree = cKDTree(self._samples)
        self._plan: np.ndarray | None = None
        self._plan_tree: cKDTree | None = None

    @property
    def dense_samples(self) -> np.ndarray:
        return self._samples

    def arc_length(self) -> float:
        return float(
            np.linalg.norm(np.diff(self._samples, axis=0), axis=1).sum()
        )

    def distance_to_centerline(self, points: np.ndarray) -> np.ndarray:
        d, _ = _point_to_polyline(points, self._samples, self._tree)
        return d

    def plan_distance(self, plane: PlaneModel, uv_points: np.ndarray) -> np.ndarray:
        """In-plane distance from 2D plane coords to the centerline plan."""
        if self._plan is None:
            self._plan = plane.to_plane_coords(self._samples)
            self._plan_tree = cKDTree(self._plan)
        d, _ = _point_to_polyline(uv_points, self._plan, self._plan_tree)
        return d


@dataclass
class TactilePad:
    """6x2 taxel array; the long (6 taxel) side lies along end-effector x."""

    rows: int = 6
    cols: int = 2
    pitch: float = 0.005

    def __post_init__(self):
        if (self.rows, self.cols) != (6, 2):
            raise ValueError("pad grid is fixed at 6x2")

    def taxel_centers(self) -> np.ndarray:
        """(12, 3) taxel centers in the pad frame, face at z = 0."""
        xs = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.pitch
        ys = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.pitch
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack(
            [gx.ravel(), gy.ravel(), np.zeros(self.rows * self.cols)]
        )


@dataclass
class TactileMap:
    """Taxel pressures captured at one contact, with the pad pose."""

    pressures: np.ndarray  # (6, 2), nonnegative
    pose: Pose

    def __post_init__(self):
        self.pressures = np.asarray(self.pressures, dtype=float)
        if self.pressures.shape != (6, 2):
            raise ValueError("tactile map must be 6x2")
        if (self.pressures < 0).any():
            raise ValueError("pressures must be nonnegative")


@dataclass
class WorldScene:
    """Immutable world used both to render images and to answer probes."""

    support_plane: PlaneModel
    cables: list[GroundTruthCable]
    occluders: list[tuple[np.ndarray, np.ndarray]]
    camera: CameraIntrinsics
    width: int
    height: int
    seed: int = 0
    pressure_noise_sigma: float = 0.0
    pad: TactilePad = field(default_factory=TactilePad)

    def __post_init__(self):
        self.occluders = [
            (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
            for lo, hi in self.occluders
        ]
        cam_height = float(
            self.support_plane.signed_distance(self.camera.pose.translation)[0]
        )
        if cam_height <= 0:
            raise InvalidViewError("camera is on or behind the support plane")
        for i, cable in enumerate(self.cables):
            heights = self.support_plane.signed_distance(cable.dense_samples)
            if np.max(np.abs(heights - cable.radius)) > 1e-6:
                raise ValueError(
                    f"cable {i} centerline is not one radius above the plane"
                )


@dataclass
class RenderResult:
    cable_masks: list[ImageGrid]
    color: ImageGrid
    depth: ImageGrid
    shelf_mask: ImageGrid

    def union_cable_mask(self) -> ImageGrid:
        grid = np.zeros(
            (self.color.height, self.color.width), dtype=bool
        )
        for mask in self.cable_masks:
            grid |= np.asarray(mask.data, dtype=bool)
        return ImageGrid(grid)


def _ray_grid(scene: WorldScene):
    intr = scene.camera
    cols, rows = np.meshgrid(
        np.arange(scene.width, dtype=float),
        np.arange(scene.height, dtype=float),
    )
    dirs_cam = np.stack(
        [(cols - intr.cx) / intr.fx, (rows - intr.cy) / intr.fy, np.ones_like(cols)],
        axis=-1,
    )
    dirs_world = dirs_cam @ intr.pose.rotation.T
    return intr.pose.translation, dirs_world


def _box_entry_depth(origin, dirs, lo, hi):
    """Camera-z of each ray's entry into the box; inf where it misses."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / dirs
        t2 = (hi - origin) / dirs
    t_near = np.nanmax(np.minimum(t1, t2), axis=-1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (t_near <= t_far) & (t_far > 0)
    entry = np.where(hit, np.maximum(t_near, 0.0), np.inf)
    return entry


def render(scene: WorldScene) -> RenderResult:
    """Rasterize the scene into per-cable masks, color, depth, shelf mask.

    Cable centerlines are stamped with their projected width and carry the
    depth of the generating centerline sample; occluder boxes remove cable
    pixels whose ray they block and cover the shelf where they project.
    Depth is camera-frame z in meters, 0 where no surface is hit.
    """
    origin, dirs = _ray_grid(scene)
    h, w = scene.height, scene.width
    plane = scene.support_plane

    denom = dirs @ plane.normal
    num = -(float(plane.signed_distance(origin)[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = num / denom
    plane_hit = (denom < 0) & (t_plane > 0)
    plane_z = np.where(plane_hit, t_plane, np.inf)

    box_z = np.full((h, w), np.inf)
    for lo, hi in scene.occluders:
        box_z = np.minimum(box_z, _box_entry_depth(origin, dirs, lo, hi))

    intr = scene.camera
    cable_z = np.full((len(scene.cables), h, w), np.inf)
    disk_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for ci, cable in enumerate(scene.cables):
        pts = cable.dense_samples
        cam = (pts - intr.pose.translation) @ intr.pose.rotation
        z = cam[:, 2]
        front = z > 1e-6
        col = intr.fx * cam[front, 0] / z[front] + intr.cx
        row = intr.fy * cam[front, 1] / z[front] + intr.cy
        rad = 0.5 * (intr.fx + intr.fy) * cable.radius / z[front]
        buf = cable_z[ci]
        for r0, c0, z0, rp in zip(row, col, z[front], rad):
            ri = int(round(rp))
            if ri not in disk_cache:
                dd = np.arange(-ri, ri + 1)
                gr, gc = np.meshgrid(dd, dd, indexing="ij")
                keep = gr * gr + gc * gc <= (ri + 0.5) ** 2
                disk_cache[ri] = (gr[keep], gc[keep])
            dr, dc = disk_cache[ri]
            rr = np.round(r0 + dr).astype(int)
            cc = np.round(c0 + dc).astype(int)
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            rr, cc = rr[ok], cc[ok]
            np.minimum.at(buf, (rr, cc), z0)

    if scene.cables:
        nearest_cable = cable_z.min(axis=0)
        winner = cable_z.argmin(axis=0)
    else:
        nearest_cable = np.full((h, w), np.inf)
        winner = np.zeros((h, w), dtype=int)
    masks = []
    for ci in range(len(scene.cables)):
        visible = (
            np.isfinite(cable_z[ci]) & (winner == ci) & (cable_z[ci] < box_z)
        )
        masks.append(ImageGrid(visible))

    covered_by_cable = np.zeros((h, w), dtype=bool)
    for m in masks:
        covered_by_cable |= m.data
    shelf = plane_hit & (plane_z < box_z) & ~covered_by_cable

    depth = np.full((h, w), np.inf)
    depth = np.minimum(depth, plane_z)
    depth = np.minimum(depth, box_z)
    depth = np.where(covered_by_cable, nearest_cable, depth)
    depth = np.where(np.isfinite(depth), depth, 0.0)

    color = np.zeros((h, w, 3))
    color[plane_hit] = SHELF_COLOR
    color[np.isfinite(box_z) & (box_z < plane_z)] = OCCLUDER_COLOR
    for ci, m in enumerate(masks):
        color[m.data] = scene.cables[ci].color

    return RenderResult(
        cable_masks=masks,
        color=ImageGrid(color),
        depth=ImageGrid(depth),
        shelf_mask=ImageGrid(shelf),
    )


def probe(
    scene: WorldScene,
    pad_pose: Pose,
    pad: TactilePad | None = None,
    eps_contact: float = EPS_CONTACT,
) -> tuple[bool, TactileMap]:
    """Rigid quasi-static contact of the pad face against plane and cables.

    Per taxel, penetration is the height of the tallest surface under the
    taxel (support plane at 0, cable tube tops at r + sqrt(r^2 - rho^2))
    minus the pad face height; pressure is PRESSURE_GAIN times positive
    penetration. Identical poses give bit-identical maps: optional noise is
    seeded from the scene seed and the pose bytes.
    """
    if pad is None:
        pad = scene.pad
    plane = scene.support_plane
    centers = pad_pose.transform(pad.taxel_centers())
    face_height = plane.signed_distance(centers)
    penetration = -face_height

    uv = plane.to_plane_coords(centers)
    for cable in scene.cables:
        rho = cable.plan_distance(plane, uv)
        under = rho <= cable.radius
        if under.any():
            surf = cable.radius + np.sqrt(
                np.maximum(cable.radius**2 - rho[under] ** 2, 0.0)
            )
            pen_cable = surf - face_height[under]
            penetration[under] = np.maximum(penetration[under], pen_cable)

    pressures = PRESSURE_GAIN * np.maximum(penetration, 0.0)
    if scene.pressure_noise_sigma > 0:
        tag = zlib.crc32(
            np.ascontiguousarray(pad_pose.rotation).tobytes()
            + np.ascontiguousarray(pad_pose.translation).tobytes()
        )
        rng = np.random.default_rng(
            np.random.SeedSequence([scene.seed, tag])
        )
        pressures = np.maximum(
            pressures + rng.normal(0.0, scene.pressure_noise_sigma, 12), 0.0
        )
    pressures = pressures.reshape(pad.rows, pad.cols)
    touched = bool((pressures > eps_contact).any())
    return touched, TactileMap(pressures=pressures, pose=pad_pose)


def map_centroid(tmap: TactileMap, plane: PlaneModel, pad: TactilePad | None = None) -> np.ndarray:
    """Pressure-weighted mean of active taxel positions, on the plane."""
    if pad is None:
        pad = TactilePad()
    weights = tmap.pressures.ravel()
    total = weights.sum()
    if total <= 0:
        raise EmptyContactError("tactile map has no active taxel")
    centers = tmap.pose.transform(pad.taxel_centers())
    centroid = (centers * weights[:, None]).sum(axis=0) / total
    return project_to_plane(centroid, plane)[0]


class TactileProbe:
    """Probe interface handed to the exploration loop; counts its calls."""

    def __init__(self, scene: WorldScene, eps_contact: float = EPS_CONTACT):
        self.scene = scene
        self.eps_contact = eps_contact
        self.calls = 0

    @property
    def pad(self) -> TactilePad:
        return self.scene.pad

    def __call__(self, pad_pose: Pose) -> tuple[bool, TactileMap]:
        self.calls += 1
        return probe(self.scene, pad_pose, self.scene.pad, self.eps_contact)
