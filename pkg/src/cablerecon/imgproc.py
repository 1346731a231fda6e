"""Mask-to-skeleton-cloud front end.

Turns binary segmentation masks into per-cable skeleton point clouds:
blur and contour removal, density clustering in a joint space/color
feature space, topology-preserving thinning, and pinhole back-projection
of the surviving pixels through the depth image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInputError, InsufficientDepthError
from .geom import Pose

SPATIAL_WEIGHT = 0.5      # pixels weighted against CIELAB units
CUT_THRESHOLD = 60.0      # MST edge length above which clusters separate
MIN_CLUSTER_SIZE = 30

DEPTH_MAGIC = b"DPTHF32\x00"


@dataclass
class ImageGrid:
    """Row-major raster; (h, w) for masks/depth, (h, w, 3) for color.

    Mask data is {0, 1} float or bool, color is [0, 255], depth is meters
    with 0 marking invalid pixels.
    """

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim not in (2, 3):
            raise ValueError("image data must be 2D or 2D x 3 channels")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


@dataclass
class CameraIntrinsics:
    """Pinhole parameters plus the camera-to-base pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    pose: Pose

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass
class PixelCluster:
    pixels: np.ndarray       # (n, 2) int (row, col)
    mean_color: np.ndarray   # (3,) RGB in [0, 255]

    def as_mask(self, height: int, width: int) -> ImageGrid:
        grid = np.zeros((height, width), dtype=bool)
        grid[self.pixels[:, 0], self.pixels[:, 1]] = True
        return ImageGrid(grid)


@dataclass
class PixelClusterSet:
    clusters: list[PixelCluster]
    noise: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))


def _binary(mask_img: ImageGrid) -> np.ndarray:
    return np.asarray(mask_img.data, dtype=float) > 0.5


def blur_and_clean(mask_img: ImageGrid, color_img: ImageGrid) -> ImageGrid:
    """3x3 box blur re-binarized at 0.5, then one erosion with a cross.

    The blur suppresses isolated specks, the erosion strips the 1-pixel
    contour where mask colors bleed into the background.
    """
    if (mask_img.height, mask_img.width) != (color_img.height, color_img.width):
        raise ValueError("mask and color image dimensions differ")
    mask = _binary(mask_img).astype(float)
    padded = np.pad(mask, 1, mode="constant")
    acc = np.zeros_like(mask)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            acc += padded[dr : dr + mask.shape[0], dc : dc + mask.shape[1]]
    blurred = acc / 9.0 >= 0.5

    padded = np.pad(blurred, 1, mode="constant")
    eroded = (
        blurred
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return ImageGrid(eroded)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB in [0, 255] to CIELAB under D65, vectorized over leading axes."""
    c = np.asarray(rgb, dtype=float) / 255.0
    c = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = c @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    f = np.where(t > (6.0 / 29.0) ** 3, np.cbrt(t), t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _mst_edges(features: np.ndarray, k: int) -> list[tuple[float, int, int]]:
    """Prim's MST over mutual-reachability distances, O(n^2) time."""
    n = len(features)
    k_eff = min(k, n - 1)
    if k_eff <= 0:
        return []
    tree = cKDTree(features)
    core = tree.query(features, k=k_eff + 1)[0][:, -1]

    in_tree = np.zeros(n, dtype=bool)
    best_dist = np.full(n, np.inf)
    best_from = np.full(n, -1)
    in_tree[0] = True
    current = 0
    edges = []
    for _ in range(n - 1):
        d = np.linalg.norm(features - features[current], axis=1)
        mreach = np.maximum(np.maximum(core, core[current]), d)
        update = ~in_tree & (mreach < best_dist)
        best_dist[update] = mreach[update]
        best_from[update] = current
        best_dist[in_tree] = np.inf
        nxt = int(np.argmin(best_dist))
        edges.append((float(best_dist[nxt]), int(best_from[nxt]), nxt))
        in_tree[nxt] = True
        best_dist[nxt] = np.inf
        current = nxt
    return edges


def cluster_pixels(
    mask_img: ImageGrid,
    color_img: ImageGrid,
    min_cluster_size: int = MIN_CLUSTER_SIZE,
    spatial_weight: float = SPATIAL_WEIGHT,
    cut_threshold: float = CUT_THRESHOLD,
) -> PixelClusterSet:
    """Separate cables by color and position with a density MST cut.

    Each foreground pixel becomes a feature (s*row, s*col, L, a, b). A
    minimum spanning tree over mutual-reachability distances (core size =
    `min_cluster_size`) is cut at edges longer than `cut_threshold`;
    components smaller than `min_cluster_size` are returned as noise. With
    the default weights, color dominates, so one cable split spatially by
    an occluder stays a single cluster while differently colored cables
    separate.
    """
    mask = _binary(mask_img)
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        raise EmptyInputError("mask has no foreground pixels")
    colors = np.asarray(color_img.data, dtype=float)[rows, cols]
    lab = rgb_to_lab(colors)
    features = np.column_stack(
        [spatial_weight * rows, spatial_weight * cols, lab]
    ).astype(float)

    edges = _mst_edges(features, k=min_cluster_size)
    parent = np.arange(len(rows))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for weight, a, b in edges:
        if weight <= cut_threshold:
            parent[find(a)] = find(b)

    labels = np.array([find(i) for i in range(len(rows))])
    clusters = []
    noise_parts = []
    for root in np.unique(labels):
        members = np.nonzero(labels == root)[0]
        pix = np.column_stack([rows[members], cols[members]]).astype(int)
        if len(members) < min_cluster_size:
            noise_parts.append(pix)
            continue
        clusters.append(PixelCluster(pixels=pix, mean_color=colors[members].mean(axis=0)))

    clusters.sort(
        key=lambda c: (tuple(np.round(c.mean_color, 6)), tuple(c.pixels.mean(axis=0)))
    )
    noise = (
        np.vstack(noise_parts) if noise_parts else np.zeros((0, 2), dtype=int)
    )
    noise = noise[np.lexsort((noise[:, 1], noise[:, 0]))] if len(noise) else noise
    return PixelClusterSet(clusters=clusters, noise=noise)


def _thinning_pass(img: np.ndarray, step: int) -> np.ndarray:
    """One Zhang-Suen subiteration; returns the deletion mask."""
    padded = np.pad(img, 1, mode="constant").astype(np.uint8)
    p2 = padded[:-2, 1:-1]
    p3 = padded[:-2, 2:]
    p4 = padded[1:-1, 2:]
    p5 = padded[2:, 2:]
    p6 = padded[2:, 1:-1]
    p7 = padded[2:, :-2]
    p8 = padded[1:-1, :-2]
    p9 = padded[:-2, :-2]
    ring = [p2, p3, p4, p5, p6, p7, p8, p9]
    b = sum(ring)
    a = sum(
        ((ring[i] == 0) & (ring[(i + 1) % 8] == 1)).astype(np.uint8)
        for i in range(8)
    )
    if step == 0:
        cond = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        cond = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    return (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond


def skeletonize(cluster_img: ImageGrid) -> ImageGrid:
    """Zhang-Suen thinning to convergence; 1-pixel-wide, topology kept."""
    img = _binary(cluster_img).astype(np.uint8)
    while True:
        changed = False
        for step in (0, 1):
            remove = _thinning_pass(img, step)
            if remove.any():
                img[remove] = 0
                changed = True
        if not changed:
            return ImageGrid(img.astype(bool))


def pixels_to_cloud(
    pixels: np.ndarray, depth_img: ImageGrid, intr: CameraIntrinsics
) -> np.ndarray:
    """Back-project (row, col) pixels through depth into the base frame.

    Pixels with zero depth are skipped; if fewer than half carry depth the
    cloud is too unreliable to use and InsufficientDepthError is raised.
    """
    pix = np.asarray(pixels, dtype=int).reshape(-1, 2)
    if len(pix) == 0:
        return np.zeros((0, 3))
    depth = np.asarray(depth_img.data, dtype=float)[pix[:, 0], pix[:, 1]]
    valid = depth > 0
    if np.count_nonzero(valid) < 0.5 * len(pix):
        raise InsufficientDepthError(
            f"only {int(np.count_nonzero(valid))} of {len(pix)} pixels have depth"
        )
    rows = pix[valid, 0].astype(float)
    cols = pix[valid, 1].astype(float)
    z = depth[valid]
    cam = np.column_stack(
        [(cols - intr.cx) / intr.fx * z, (rows - intr.cy) / intr.fy * z, z]
    )
    return intr.pose.transform(cam)


def project_to_pixels(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Base-frame points to (row, col) image coordinates (float)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cam = (pts - intr.pose.translation) @ intr.pose.rotation
    z = cam[:, 2]
    col = intr.fx * cam[:, 0] / z + intr.cx
    row = intr.fy * cam[:, 1] / z + intr.cy
    return np.column_stack([row, col])


def save_pgm(path, mask_img: ImageGrid) -> None:
    """Binary PGM (P5); foreground 255, background 0."""
    mask = _binary(mask_img)
    header = f"P5\n{mask.shape[1]} {mask.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + (mask * np.uint8(255)).astype(np.uint8).tobytes())


def load_pgm(path) -> ImageGrid:
    raw = Path(path).read_bytes()
    magic, rest = raw.split(b"\n", 1)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    fields = []
    while len(fields) < 3:
        line, rest = rest.split(b"\n", 1)
        if line.startswith(b"#"):
            continue
        fields.extend(line.split())
    width, height, maxval = (int(f) for f in fields[:3])
    data = np.frombuffer(rest[: width * height], dtype=np.uint8).reshape(height, width)
    return ImageGrid(data > maxval // 2)


def save_ppm(path, color_img: ImageGrid) -> None:
    """Binary PPM (P6) color image."""
    data = np.asarray(color_img.data)
    header = f"P6\n{data.shape[1]} {data.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + np.clip(data, 0, 255).astype(np.uint8).tobytes())


def load_ppm(path) -> ImageGrid:
    raw = Path(path).read_bytes()
    magic, rest = raw.split(b"\n", 1)
    if magic != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    fields = []
    while len(fields) < 3:
        line, rest = rest.split(b"\n", 1)
        if line.startswith(b"#"):
            continue
        fields.extend(line.split())
    width, height, _ = (int(f) for f in fields[:3])
    data = np.frombuffer(rest[: width * height * 3], dtype=np.uint8)
    return ImageGrid(data.reshape(height, width, 3).copy())


def save_depth(path, depth_img: ImageGrid) -> None:
    """Raw float32 depth with a 16-byte header (magic, width, height)."""
    data = np.asarray(depth_img.data, dtype=np.float32)
    header = DEPTH_MAGIC + struct.pack("<II", data.shape[1], data.shape[0])
    Path(path).write_bytes(header + data.tobytes())


def load_depth(path) -> ImageGrid:
    raw = Path(path).read_bytes()
    if raw[:8] != DEPTH_MAGIC:
        raise ValueError(f"{path}: bad depth file magic")
    width, height = struct.unpack("<II", raw[8:16])
    data = np.frombuffer(raw[16 : 16 + 4 * width * height], dtype=np.float32)
    return ImageGrid(data.reshape(height, width).astype(float))
