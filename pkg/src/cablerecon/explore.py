"""Gradient-based tactile exploration of cable gaps.

From every unvisited endpoint the end effector advances one step along the
cable direction, descends until the pad touches, and classifies the contact
with a curvature indicator built from per-taxel Hessian norms. Cable
contacts extend the walk and re-aim the frame; flat contacts rotate the
frame about the plane normal to try another direction. A walk closes when
it comes within d_min of another endpoint or exhausts a full turn of
rotations (a true cable end).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloudproc import PlaneModel
from .errors import DescentOverrunError, NoDirectionError, ProbeBudgetError
from .geom import Pose, ReconParams, frame_from_y_z, rotation_about_axis
from .topology import SortedPolyline, previous_point
from .worldsim import TactileMap, map_centroid

DESCENT_LIMIT = 0.010  # meters below the plane before declaring overrun


def indicator(tmap: TactileMap | np.ndarray, pitch: float = 0.005) -> float:
    """Frobenius norm of the 6x2 matrix of per-taxel Hessian norms.

    The map is padded to 8x4 by edge replication (the 2-wide axis has no
    interior for a central difference), then every original cell gets a 2x2
    finite-difference Hessian with grid step `pitch`. Flat uniform contact
    gives exactly 0; a cable ridge concentrates pressure and scores high.
    """
    p = tmap.pressures if isinstance(tmap, TactileMap) else np.asarray(tmap, dtype=float)
    if p.shape != (6, 2):
        raise ValueError("indicator expects a 6x2 map")
    padded = np.pad(p, 1, mode="edge")
    h2 = pitch * pitch
    center = padded[1:-1, 1:-1]
    hxx = (padded[2:, 1:-1] - 2.0 * center + padded[:-2, 1:-1]) / h2
    hyy = (padded[1:-1, 2:] - 2.0 * center + padded[1:-1, :-2]) / h2
    hxy = (
        padded[2:, 2:] - padded[2:, :-2] - padded[:-2, 2:] + padded[:-2, :-2]
    ) / (4.0 * h2)
    norms = np.sqrt(hxx**2 + 2.0 * hxy**2 + hyy**2)
    return float(np.linalg.norm(norms))


@dataclass
class ExplorationState:
    """Mutable state of one endpoint walk."""

    pose: Pose
    last_point: np.ndarray
    rotation_attempts: int = 0


@dataclass
class ExplorationResult:
    tactile_cloud: np.ndarray
    trace: list[dict] = field(default_factory=list)
    probes_used: int = 0
    dead_ends: int = 0

    def save_trace_csv(self, path) -> None:
        cols = [
            "step", "endpoint_id",
            "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22",
            "tx", "ty", "tz", "touched", "indicator", "accepted",
            "px", "py", "pz",
        ]
        lines = [",".join(cols)]
        for row in self.trace:
            lines.append(",".join(str(row[c]) for c in cols))
        Path(path).write_text("\n".join(lines) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


class _Tracer:
    def __init__(self):
        self.rows: list[dict] = []
        self.step = 0

    def log(self, endpoint_id, pose, touched, ind, accepted, p_new):
        r = pose.rotation
        t = pose.translation
        row = {
            "step": self.step,
            "endpoint_id": endpoint_id,
            "touched": int(touched),
            "indicator": _fmt(ind) if ind is not None else "",
            "accepted": int(accepted),
            "px": _fmt(p_new[0]) if p_new is not None else "",
            "py": _fmt(p_new[1]) if p_new is not None else "",
            "pz": _fmt(p_new[2]) if p_new is not None else "",
        }
        for i in range(3):
            for j in range(3):
                row[f"r{i}{j}"] = _fmt(r[i, j])
        row["tx"], row["ty"], row["tz"] = _fmt(t[0]), _fmt(t[1]), _fmt(t[2])
        self.rows.append(row)
        self.step += 1


def _descend(
    probe_fn,
    rotation: np.ndarray,
    target_on_plane: np.ndarray,
    normal: np.ndarray,
    plane: PlaneModel,
    params: ReconParams,
    budget: list[int],
    tracer: _Tracer,
    endpoint_id: int,
) -> TactileMap | None:
    """Lower the pad along -normal in delta_z steps until it touches."""
    pos = target_on_plane + params.hover_height * normal
    while True:
        pose = Pose(rotation.copy(), pos.copy())
        budget[0] -= 1
        if budget[0] < 0:
            raise ProbeBudgetError("probe budget exhausted during exploration")
        touched, tmap = probe_fn(pose)
        if not touched:
            tracer.log(endpoint_id, pose, False, None, False, None)
        if touched:
            return tmap
        height = float(plane.signed_distance(pos)[0])
        if height < -DESCENT_LIMIT:
            raise DescentOverrunError(
                "probe descended past the plane without any contact"
            )
        pos = pos - params.delta_z * normal


def explore_from_endpoints(
    poly: SortedPolyline,
    plane: PlaneModel,
    probe_fn,
    params: ReconParams | None = None,
    pad_pitch: float = 0.005,
) -> ExplorationResult:
    """Run the per-endpoint exploration walks and collect tactile points.

    `probe_fn(pose) -> (touched, TactileMap)` is the only way the loop sees
    the world. A walk's own starting endpoint is excluded from the d_min
    stop check: the first advance lands delta_y < d_min away from it, so
    including it would stop every walk immediately. Every other endpoint,
    visited or not, terminates the walk and is marked visited. Rotation
    retries beyond a full turn close the walk as a dead end.
    """
    if params is None:
        params = ReconParams()
    normal = plane.normal
    r_step = rotation_about_axis(np.array([0.0, 0.0, 1.0]), params.theta_deg)

    endpoints = poly.endpoints
    positions = [ep.position for ep in endpoints]
    visited: set[int] = set()
    tactile: list[np.ndarray] = []
    tracer = _Tracer()
    budget = [params.probe_budget]
    dead_ends = 0

    for eid, endpoint in enumerate(endpoints):
        if eid in visited:
            continue
        visited.add(eid)
        try:
            prev = previous_point(poly, endpoint)
        except NoDirectionError:
            continue
        heading = endpoint.position - prev
        if np.linalg.norm(heading) < 1e-12:
            continue
        state = ExplorationState(
            pose=Pose(frame_from_y_z(heading, normal), endpoint.position.copy()),
            last_point=endpoint.position.copy(),
        )

        walking = True
        while walking:
            y_dir = state.pose.rotation[:, 1]
            target = state.last_point + params.delta_y * y_dir
            tmap = _descend(
                probe_fn, state.pose.rotation, target, normal, plane,
                params, budget, tracer, eid,
            )
            ind = indicator(tmap, pitch=pad_pitch)
            if ind > params.t_h:
                p_new = map_centroid(tmap, plane)
                advance = p_new - state.last_point
                if np.linalg.norm(advance) < 1e-12:
                    # centroid landed on the frontier; treat as no progress
                    accepted = False
                else:
                    accepted = True
                tracer.log(eid, tmap.pose, True, ind, accepted, p_new if accepted else None)
                if accepted:
                    tactile.append(p_new)
                    state.rotation_attempts = 0
                    reached = [
                        oid
                        for oid, pos in enumerate(positions)
                        if oid != eid
                        and np.linalg.norm(p_new - pos) < params.d_min
                    ]
                    if reached:
                        visited.update(reached)
                        walking = False
                        continue
                    state.pose = Pose(frame_from_y_z(advance, normal), p_new)
                    state.last_point = p_new
                    continue
            else:
                tracer.log(eid, tmap.pose, True, ind, False, None)
            # flat or degenerate contact: turn and retry from the same point
            state.rotation_attempts += 1
            if state.rotation_attempts >= params.max_rotation_attempts:
                dead_ends += 1
                walking = False
                continue
            state.pose = Pose(
                state.pose.rotation @ r_step, state.pose.translation
            )

    cloud = np.array(tactile).reshape(-1, 3)
    return ExplorationResult(
        tactile_cloud=cloud,
        trace=tracer.rows,
        probes_used=params.probe_budget - budget[0],
        dead_ends=dead_ends,
    )


def merge_clouds(visual: np.ndarray, tactile: np.ndarray) -> np.ndarray:
    """Union of the two clouds with exact duplicates (< 1e-9) removed."""
    vis = np.asarray(visual, dtype=float).reshape(-1, 3)
    tac = np.asarray(tactile, dtype=float).reshape(-1, 3)
    out: list[np.ndarray] = []
    for p in np.vstack([vis, tac]):
        if out and np.linalg.norm(np.array(out) - p, axis=1).min() < 1e-9:
            continue
        out.append(p)
    return np.array(out).reshape(-1, 3)
