"""Reconstruction accuracy metrics: ICP alignment RMSE and, in simulation,
direct distance between the fitted curve and the generating centerline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometryError
from .fitting import BSplineCurve, sample_curve
from .worldsim import GroundTruthCable

ICP_MAX_ITERS = 60
ICP_TOL = 1e-10


@dataclass
class RegistrationResult:
    rotation: np.ndarray
    translation: np.ndarray
    rmse: float
    iterations: int
    converged: bool
    rmse_history: list[float] = field(default_factory=list)

    def transform(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def _best_rigid(source: np.ndarray, target: np.ndarray):
    """Least-squares rigid transform mapping source onto target pairs."""
    cs = source.mean(axis=0)
    ct = target.mean(axis=0)
    h = (source - cs).T @ (target - ct)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = ct - r @ cs
    return r, t


def icp(
    source: np.ndarray,
    target: np.ndarray,
    max_iters: int = ICP_MAX_ITERS,
    tol: float = ICP_TOL,
) -> RegistrationResult:
    """Point-to-point ICP aligning `source` onto `target`.

    Alternates nearest-neighbor correspondence with the SVD-optimal rigid
    update (reflection-corrected) until the RMSE improvement drops below
    `tol` or `max_iters` passes. The per-iteration RMSE sequence is
    non-increasing and returned for inspection.
    """
    src = np.asarray(source, dtype=float).reshape(-1, 3)
    tgt = np.asarray(target, dtype=float).reshape(-1, 3)
    if len(src) < 3 or len(tgt) < 3:
        raise DegenerateGeometryError("ICP needs at least 3 points per cloud")
    if np.ptp(src, axis=0).max() < 1e-12:
        raise DegenerateGeometryError("all source points coincide")

    tree = cKDTree(tgt)
    rot = np.eye(3)
    trans = np.zeros(3)
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        moved = src @ rot.T + trans
        dist, idx = tree.query(moved)
        rmse = float(np.sqrt(np.mean(dist**2)))
        history.append(rmse)
        if rmse < tol or (len(history) >= 2 and abs(history[-2] - rmse) < tol):
            converged = True
            break
        r_step, t_step = _best_rigid(moved, tgt[idx])
        rot = r_step @ rot
        trans = r_step @ trans + t_step

    return RegistrationResult(
        rotation=rot,
        translation=trans,
        rmse=history[-1],
        iterations=iterations,
        converged=converged,
        rmse_history=history,
    )


def curve_error(
    curve: BSplineCurve, truth: GroundTruthCable, n: int = 200
) -> tuple[float, float]:
    """Mean and max distance from curve samples to the truth centerline."""
    if n < 10:
        raise ValueError("need at least 10 samples for a stable error")
    samples = sample_curve(curve, n)
    d = truth.distance_to_centerline(samples)
    return float(d.mean()), float(d.max())
