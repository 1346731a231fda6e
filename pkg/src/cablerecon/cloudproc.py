"""Point-cloud conditioning: plane fit, downsampling, merging, projection.

Clouds are plain (N, 3) float arrays in the base frame. All operations are
pure and deterministic; RANSAC takes an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometryError

RANSAC_INLIER_TOL = 0.003
RANSAC_MAX_ITERS = 500


def as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.size and not np.isfinite(pts).all():
        raise ValueError("point cloud contains non-finite values")
    return pts


@dataclass
class PlaneModel:
    """Plane ax + by + cz + d = 0 with unit (a, b, c).

    The normal is oriented toward the viewpoint used at fit time, so it
    points away from the support surface, up into the workspace.
    """

    coefficients: np.ndarray  # (4,), (a, b, c) unit-norm
    inlier_count: int = 0

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        norm = np.linalg.norm(coeffs[:3])
        if norm < 1e-12:
            raise DegenerateGeometryError("plane normal is zero")
        self.coefficients = coeffs / norm

    @property
    def normal(self) -> np.ndarray:
        return self.coefficients[:3]

    @property
    def offset(self) -> float:
        return float(self.coefficients[3])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normal + self.offset

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic in-plane orthonormal basis (u, v) with u x v = n."""
        n = self.normal
        ref = np.array([1.0, 0.0, 0.0])
        if abs(n[0]) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        u = ref - np.dot(ref, n) * n
        u = u / np.linalg.norm(u)
        v = np.cross(n, u)
        return u, v

    def to_plane_coords(self, points: np.ndarray) -> np.ndarray:
        """2D (u, v) coordinates of points relative to the plane origin."""
        u, v = self.basis()
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        origin = -self.offset * self.normal
        rel = pts - origin
        return np.column_stack([rel @ u, rel @ v])

    def from_plane_coords(self, uv: np.ndarray) -> np.ndarray:
        u, v = self.basis()
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        origin = -self.offset * self.normal
        return origin + uv[:, :1] * u + uv[:, 1:2] * v


def _plane_through(p0, p1, p2) -> np.ndarray | None:
    normal = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        return None
    normal = normal / norm
    return np.append(normal, -np.dot(normal, p0))


def ransac_plane(
    cloud: np.ndarray,
    inlier_tol: float = RANSAC_INLIER_TOL,
    max_iters: int = RANSAC_MAX_ITERS,
    seed: int = 0,
    orient_toward: np.ndarray | None = None,
) -> PlaneModel:
    """Best plane by inlier count over seeded 3-point hypotheses.

    The winning consensus set is refit by least squares (centroid plus the
    smallest covariance eigenvector). `orient_toward` flips the normal so it
    points at that position (the camera); without it the normal takes
    positive z, breaking ties toward +y then +x.
    """
    pts = as_cloud(cloud)
    if len(pts) < 3:
        raise DegenerateGeometryError("plane fit needs at least 3 points")
    rng = np.random.default_rng(seed)
    best = None  # (inlier_count, hypothesis_index, coeffs)
    for it in range(max_iters):
        idx = rng.choice(len(pts), size=3, replace=False)
        coeffs = _plane_through(*pts[idx])
        if coeffs is None:
            continue
        dist = np.abs(pts @ coeffs[:3] + coeffs[3])
        count = int(np.count_nonzero(dist <= inlier_tol))
        if best is None or count > best[0]:
            best = (count, it, coeffs)
    if best is None:
        raise DegenerateGeometryError("all RANSAC samples were collinear")

    inliers = pts[np.abs(pts @ best[2][:3] + best[2][3]) <= inlier_tol]
    centroid = inliers.mean(axis=0)
    cov = np.cov((inliers - centroid).T)
    eigvals, eigvecs = np.linalg.eigh(np.atleast_2d(cov))
    normal = eigvecs[:, 0]
    coeffs = np.append(normal, -np.dot(normal, centroid))

    if orient_toward is not None:
        toward = np.asarray(orient_toward, dtype=float)
        if np.dot(coeffs[:3], toward) + coeffs[3] < 0:
            coeffs = -coeffs
    else:
        n = coeffs[:3]
        if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
            coeffs = -coeffs
    return PlaneModel(coeffs, inlier_count=int(best[0]))


def voxel_downsample(
    cloud: np.ndarray, d_m: float, origin: np.ndarray | None = None
) -> np.ndarray:
    """One centroid per occupied voxel of edge `d_m`, anchored at `origin`.

    Output order is lexicographic in the voxel index, so the result is
    independent of input ordering.
    """
    if d_m <= 0:
        raise ValueError("voxel size must be positive")
    pts = as_cloud(cloud)
    if len(pts) == 0:
        return pts
    if origin is None:
        origin = np.zeros(3)
    bins = np.floor((pts - np.asarray(origin, dtype=float)) / d_m).astype(np.int64)
    uniq, inverse = np.unique(bins, axis=0, return_inverse=True)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    return sums / counts[:, None]


def merge_close_points(cloud: np.ndarray, t_p: float) -> np.ndarray:
    """Collapse the closest pair under `t_p` to its midpoint, repeatedly.

    Iterates until every pairwise distance is at least `t_p`; the guarantee
    is what keeps the direction-following sorter stable on the result. Ties
    on distance break by lexicographic point order.
    """
    if t_p <= 0:
        raise ValueError("merge threshold must be positive")
    pts = [p for p in as_cloud(cloud)]
    while len(pts) > 1:
        arr = np.array(pts)
        diff = arr[:, None, :] - arr[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        dmin = dist[i, j]
        if dmin >= t_p:
            break
        candidates = np.argwhere(np.isclose(dist, dmin, rtol=0, atol=1e-12))
        pick = min(
            (
                (tuple(arr[min(a, b)]), tuple(arr[max(a, b)]), min(a, b), max(a, b))
                for a, b in candidates
                if a < b
            ),
        )
        a, b = pick[2], pick[3]
        midpoint = 0.5 * (arr[a] + arr[b])
        pts[a] = midpoint
        del pts[b]
    return np.array(pts).reshape(-1, 3)


def project_to_plane(cloud: np.ndarray, plane: PlaneModel) -> np.ndarray:
    """Orthogonal projection of every point onto the plane."""
    pts = as_cloud(cloud)
    if len(pts) == 0:
        return pts
    dist = plane.signed_distance(pts)
    return pts - dist[:, None] * plane.normal


def save_ply(path, cloud: np.ndarray) -> None:
    pts = as_cloud(cloud)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    for p in pts:
        lines.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_ply(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    try:
        end = text.index("end_header")
    except ValueError:
        raise ValueError(f"{path}: missing PLY header terminator")
    count = 0
    for line in text[:end]:
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
    rows = [tuple(map(float, line.split()[:3])) for line in text[end + 1 : end + 1 + count]]
    return np.array(rows, dtype=float).reshape(-1, 3)


def save_csv(path, cloud: np.ndarray) -> None:
    pts = as_cloud(cloud)
    lines = ["x,y,z"]
    for p in pts:
        lines.append(f"{p[0]:.9g},{p[1]:.9g},{p[2]:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    rows = [tuple(map(float, line.split(","))) for line in lines[1:] if line]
    return np.array(rows, dtype=float).reshape(-1, 3)
