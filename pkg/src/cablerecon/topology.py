"""Direction-following sort of a planar cable cloud into ordered segments.

The sorter walks the cloud the way the cable runs: seed at the point
farthest from the centroid of what is left, then repeatedly step to the
neighbor that deviates least from the current travel direction. Where no
acceptable neighbor exists the walk turns around once and extends from the
seed end, then the segment closes. Endpoints are the segment extremes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloudproc import PlaneModel, as_cloud
from .errors import EmptyInputError, NoDirectionError

TIE_TOL = 1e-9
# candidates farther than this multiple of the nearest admissible candidate
# are dropped; keeps the straightest-first rule from skipping over points
# across inflections while leaving real gap-jumps (no nearer option) intact
NEAREST_WINDOW = 1.6


@dataclass(frozen=True)
class Endpoint:
    segment_id: int
    which_end: str  # "first" | "last"
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=float)
        )


@dataclass
class SortedPolyline:
    """Partition of a cloud into ordered index runs plus their extremes."""

    points: np.ndarray            # (N, 3) source cloud
    segments: list[np.ndarray]    # ordered index arrays, disjoint cover

    @property
    def endpoints(self) -> list[Endpoint]:
        out = []
        for sid, seg in enumerate(self.segments):
            out.append(Endpoint(sid, "first", self.points[seg[0]]))
            out.append(Endpoint(sid, "last", self.points[seg[-1]]))
        return out

    def segment_points(self, segment_id: int) -> np.ndarray:
        return self.points[self.segments[segment_id]]

    def ordered_points(self) -> np.ndarray:
        """All points in walk order, segments concatenated."""
        if not self.segments:
            return np.zeros((0, 3))
        return np.vstack([self.points[seg] for seg in self.segments])


def _lex_key(p: np.ndarray) -> tuple:
    return tuple(np.round(np.asarray(p, dtype=float), 12))


def _pick(candidates: list[tuple[float, float, tuple, int]]) -> int:
    """Least deviation, then least distance, then lexicographic coords.

    The first two stages tolerate 1e-9 so that geometric ties resolve the
    same way no matter how the input was ordered.
    """
    best_dev = min(c[0] for c in candidates)
    pool = [c for c in candidates if c[0] <= best_dev + TIE_TOL]
    best_dist = min(c[1] for c in pool)
    pool = [c for c in pool if c[1] <= best_dist + TIE_TOL]
    return min(pool, key=lambda c: c[2])[3]


def _grow(
    order: list[int],
    uv: np.ndarray,
    pts3: np.ndarray,
    unvisited: set,
    r_search: float,
    cos_min: float,
) -> None:
    """Extend `order` forward in place until no candidate survives."""
    while unvisited:
        tail = uv[order[-1]]
        direction = None
        if len(order) >= 2:
            step = tail - uv[order[-2]]
            norm = np.linalg.norm(step)
            if norm > 1e-15:
                direction = step / norm

        candidates = []
        for idx in unvisited:
            offset = uv[idx] - tail
            dist = float(np.linalg.norm(offset))
            if dist > r_search or dist < 1e-15:
                continue
            if direction is None:
                candidates.append((0.0, dist, _lex_key(pts3[idx]), idx))
            else:
                cos_dev = float(np.dot(offset / dist, direction))
                if cos_dev < cos_min:
                    continue
                # -cos grows with angular deviation
                candidates.append((-cos_dev, dist, _lex_key(pts3[idx]), idx))
        if not candidates:
            return
        d_near = min(c[1] for c in candidates)
        candidates = [c for c in candidates if c[1] <= NEAREST_WINDOW * d_near]
        chosen = _pick(candidates)
        order.append(chosen)
        unvisited.discard(chosen)


def _stitch_crossings(
    uv: np.ndarray, segments: list[list[int]], r_stitch: float
) -> list[list[int]]:
    """Re-thread self-intersections that left a loop-shaped orphan segment.

    At an X crossing the greedy walk can pass straight through the blended
    junction and strand off the loop as its own segment whose both ends
    land next to two adjacent points of the host walk. Splicing the orphan
    back between those two points restores the single traversal. The same
    rule re-inserts isolated points the walk skipped over. Only this
    both-ends-adjacent pattern is touched; gap-separated segments (real
    occlusions, separate cables) never qualify.
    """
    while True:
        best = None  # (total_dist, host_idx, k, orphan_idx, reversed)
        for oi, orphan in enumerate(segments):
            o_first, o_last = uv[orphan[0]], uv[orphan[-1]]
            for hi, host in enumerate(segments):
                if hi == oi or len(host) < 2:
                    continue
                a = uv[host[:-1]]
                b = uv[host[1:]]
                for rev, (p, q) in enumerate(
                    [(o_first, o_last), (o_last, o_first)]
                ):
                    da = np.linalg.norm(a - p, axis=1)
                    db = np.linalg.norm(b - q, axis=1)
                    ok = (da <= r_stitch) & (db <= r_stitch)
                    if not ok.any():
                        continue
                    total = np.where(ok, da + db, np.inf)
                    k = int(np.argmin(total))
                    cand = (float(total[k]), hi, k, oi, bool(rev))
                    if best is None or cand[0] < best[0] - 1e-12:
                        best = cand
        if best is None:
            return segments
        _, hi, k, oi, rev = best
        orphan = segments[oi][::-1] if rev else segments[oi]
        host = segments[hi]
        merged = host[: k + 1] + list(orphan) + host[k + 1 :]
        segments = [
            seg for i, seg in enumerate(segments) if i not in (hi, oi)
        ]
        segments.append(merged)


def sort_and_find_endpoints(
    cloud: np.ndarray,
    plane: PlaneModel,
    r_search: float = 0.035,
    alpha_max_deg: float = 75.0,
    stitch_crossings: bool = True,
) -> SortedPolyline:
    """Greedy direction-following walk over a plane-projected cloud.

    Seeds at the unvisited point farthest from the unvisited centroid,
    takes the nearest neighbor within `r_search` first, then always the
    candidate with the least angular deviation from the running direction
    (rejecting anything past `alpha_max_deg`). When the walk stalls, the
    segment is extended once from its seed end in the reverse direction,
    then closed. Loop orphans left at self-intersections are spliced back
    into their host walk unless `stitch_crossings` is off. Tie-breaks
    depend only on geometry, so any permutation of the input produces the
    same segments.
    """
    pts = as_cloud(cloud)
    if len(pts) == 0:
        raise EmptyInputError("cannot sort an empty cloud")
    uv = plane.to_plane_coords(pts)
    cos_min = float(np.cos(np.radians(alpha_max_deg)))

    unvisited = set(range(len(pts)))
    raw: list[list[int]] = []
    while unvisited:
        # canonical order makes the centroid sum permutation-independent
        rem = sorted(unvisited, key=lambda i: _lex_key(pts[i]))
        centroid = uv[rem].mean(axis=0)
        dists = np.linalg.norm(uv[rem] - centroid, axis=1)
        dmax = float(dists.max())
        pool = [i for i, d in zip(rem, dists) if d >= dmax - TIE_TOL]
        seed = min(pool, key=lambda i: _lex_key(pts[i]))
        unvisited.discard(seed)

        order = [seed]
        _grow(order, uv, pts, unvisited, r_search, cos_min)
        # the farthest-from-centroid seed is not guaranteed to be a true
        # extreme; try the other direction from the seed end once
        order.reverse()
        _grow(order, uv, pts, unvisited, r_search, cos_min)
        order.reverse()
        raw.append(order)

    if stitch_crossings and len(raw) > 1:
        raw = _stitch_crossings(uv, raw, r_search)
    return SortedPolyline(points=pts, segments=[np.array(s, dtype=int) for s in raw])


def previous_point(poly: SortedPolyline, endpoint: Endpoint) -> np.ndarray:
    """The neighbor of an endpoint inside its segment."""
    seg = poly.segments[endpoint.segment_id]
    if len(seg) < 2:
        raise NoDirectionError(
            f"segment {endpoint.segment_id} is a singleton; no direction"
        )
    if endpoint.which_end == "first":
        return poly.points[seg[1]]
    return poly.points[seg[-2]]


def save_sorted_csv(path, poly: SortedPolyline) -> None:
    lines = ["segment_id,order_index,x,y,z"]
    for sid, seg in enumerate(poly.segments):
        for oi, idx in enumerate(seg):
            p = poly.points[idx]
            lines.append(f"{sid},{oi},{p[0]:.9g},{p[1]:.9g},{p[2]:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_sorted_csv(path) -> SortedPolyline:
    lines = Path(path).read_text().splitlines()[1:]
    rows = [line.split(",") for line in lines if line]
    pts = np.array([[float(r[2]), float(r[3]), float(r[4])] for r in rows])
    seg_ids = np.array([int(r[0]) for r in rows])
    segments = [np.nonzero(seg_ids == sid)[0] for sid in np.unique(seg_ids)]
    return SortedPolyline(points=pts.reshape(-1, 3), segments=segments)
