"""Post-fusion reconstruction: second conditioning pass and B-spline fit.

The fit interpolates (it does not smooth): the pipeline has already
regularized the cloud through downsampling and midpoint merging, and the
tactile points carry real contacts that the curve must honor.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy.interpolate import BSpline, make_interp_spline

from .cloudproc import merge_close_points, voxel_downsample
from .geom import ReconParams


@dataclass
class BSplineCurve:
    """Clamped B-spline with a fixed sampling convention for export."""

    degree: int
    knots: np.ndarray
    control_points: np.ndarray
    sampling_count: int = 200

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.control_points = np.asarray(self.control_points, dtype=float)
        k, n = self.degree, len(self.control_points)
        if len(self.knots) != n + k + 1:
            raise ValueError("knot count must equal control points + degree + 1")
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if not (
            np.allclose(self.knots[: k + 1], self.knots[0])
            and np.allclose(self.knots[-k - 1 :], self.knots[-1])
        ):
            raise ValueError("end knots must be clamped to multiplicity degree+1")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def evaluate(self, ts: np.ndarray) -> np.ndarray:
        spl = BSpline(self.knots, self.control_points, self.degree, extrapolate=False)
        return np.atleast_2d(spl(np.asarray(ts, dtype=float)))

    def translated(self, offset: np.ndarray) -> "BSplineCurve":
        """Rigidly shifted copy (affine invariance of the control polygon)."""
        return BSplineCurve(
            degree=self.degree,
            knots=self.knots.copy(),
            control_points=self.control_points + np.asarray(offset, dtype=float),
            sampling_count=self.sampling_count,
        )


def refine_merged(cloud: np.ndarray, params: ReconParams) -> np.ndarray:
    """Re-run voxel downsampling and midpoint merging on a fused cloud.

    After tactile exploration the merged cloud can be locally dense enough
    to confuse the direction-following sorter; this pass restores the
    spacing guarantees of the first-pass conditioning. Already-sparse
    clouds pass through with the same point set.
    """
    out = voxel_downsample(cloud, params.d_m, params.voxel_origin)
    return merge_close_points(out, params.t_p)


def chord_length_params(points: np.ndarray) -> np.ndarray:
    """Cumulative chord lengths normalized to [0, 1]."""
    pts = np.asarray(points, dtype=float)
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = chords.sum()
    if total <= 0:
        raise ValueError("points have zero total chord length")
    params = np.concatenate([[0.0], np.cumsum(chords) / total])
    params[-1] = 1.0  # cumsum can overshoot the sum by one ulp
    return params


def _averaged_knots(params: np.ndarray, degree: int) -> np.ndarray:
    n = len(params)
    interior = [
        params[j : j + degree].mean() for j in range(1, n - degree)
    ]
    return np.concatenate(
        [np.zeros(degree + 1), interior, np.ones(degree + 1)]
    )


def _polyline_curve(points: np.ndarray, params: np.ndarray) -> BSplineCurve:
    # degree-1 clamped spline through the data is exactly the polyline
    knots = np.concatenate([[params[0]], params, [params[-1]]])
    return BSplineCurve(degree=1, knots=knots, control_points=points)


def fit_bspline(points: np.ndarray, degree: int = 3) -> BSplineCurve:
    """Interpolating spline through ordered points, chord-parameterized.

    Clamped knots come from knot averaging, so the curve starts and ends
    exactly at the first and last data points. Fewer points than degree+1
    drop the degree; a degenerate collocation system falls back to the
    polyline through the data.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-12
    pts = pts[keep]
    if len(pts) < 2:
        raise ValueError("need at least 2 distinct points to fit a curve")
    k = min(degree, len(pts) - 1)
    params = chord_length_params(pts)
    if k == 1:
        return _polyline_curve(pts, params)
    knots = _averaged_knots(params, k)
    try:
        spl = make_interp_spline(params, pts, k=k, t=knots)
    except np.linalg.LinAlgError:
        return _polyline_curve(pts, params)
    return BSplineCurve(degree=k, knots=spl.t, control_points=spl.c)


def sample_curve(curve: BSplineCurve, n: int) -> np.ndarray:
    """n points at uniform parameter steps, both ends included."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, n)
    return curve.evaluate(ts)


def bspline_from_control_points(
    control_points: np.ndarray, degree: int = 3
) -> BSplineCurve:
    """Clamped spline shaped by a control polygon (no interpolation)."""
    ctrl = np.asarray(control_points, dtype=float).reshape(-1, 3)
    if len(ctrl) < degree + 1:
        raise ValueError("need at least degree+1 control points")
    interior = len(ctrl) - degree - 1
    knots = np.concatenate(
        [
            np.zeros(degree + 1),
            (np.arange(1, interior + 1)) / (interior + 1),
            np.ones(degree + 1),
        ]
    )
    return BSplineCurve(degree=degree, knots=knots, control_points=ctrl)


def save_spline(path, curve: BSplineCurve) -> None:
    lines = [f"degree: {curve.degree}", "knots:"]
    for t in curve.knots:
        lines.append(f"- {t:.9g}")
    lines.append("control_points:")
    for p in curve.control_points:
        lines.append(f"- [{p[0]:.9g}, {p[1]:.9g}, {p[2]:.9g}]")
    lines.append(f"sampling_count: {curve.sampling_count}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_spline(path) -> BSplineCurve:
    doc = yaml.safe_load(Path(path).read_text())
    return BSplineCurve(
        degree=int(doc["degree"]),
        knots=np.asarray(doc["knots"], dtype=float),
        control_points=np.asarray(doc["control_points"], dtype=float),
        sampling_count=int(doc.get("sampling_count", 200)),
    )
