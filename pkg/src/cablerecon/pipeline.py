"""End-to-end orchestration: run a scenario, evaluate a run, plot a run.

A run directory is self-describing: it holds a copy of its scenario, every
intermediate cloud under the stage names P_skeleton, P_down, P_proj,
P_sorted, P_tactile, P_merged, P_interpolated, the dense per-cable
reference cloud, the exploration trace, and a manifest with sha256
checksums of every artifact. The same scenario and seed reproduce every
artifact byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import cloudproc, explore, fitting, imgproc, scenarios, topology, worldsim
from .errors import EmptyInputError
from .evaluation import curve_error, icp
from .geom import ReconParams

EXIT_COMPLETE = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2
EXIT_BUDGET = 3

CANONICAL_CLOUDS = (
    "P_skeleton",
    "P_down",
    "P_proj",
    "P_sorted",
    "P_tactile",
    "P_merged",
    "P_interpolated",
)

MAX_PLANE_PIXELS = 20000


@dataclass
class CableRunStats:
    directory: str
    color: list[float]
    radius: float
    first_sort_segments: int = 0
    first_sort_endpoints: int = 0
    raw_merged_segments: int = 0
    final_segments: int = 0
    final_endpoints: int = 0
    tactile_points: int = 0
    probes_used: int = 0
    dead_ends: int = 0
    complete: bool = False


@dataclass
class RunResult:
    out_dir: Path
    exit_status: int
    stats: list[CableRunStats] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_params(
    scenario_doc: dict, params_file=None
) -> tuple[ReconParams, dict]:
    overrides = dict(scenario_doc.get("params") or {})
    if params_file is not None:
        overrides.update(yaml.safe_load(Path(params_file).read_text()) or {})
    cluster_keys = {
        k: overrides.pop(k)
        for k in ("min_cluster_size", "spatial_weight", "cut_threshold")
        if k in overrides
    }
    params = ReconParams(**overrides)
    return params, cluster_keys


def _match_cable(scene: worldsim.WorldScene, mean_color: np.ndarray) -> int:
    colors = np.array([c.color for c in scene.cables])
    return int(np.argmin(np.linalg.norm(colors - mean_color, axis=1)))


def run_pipeline(
    scenario_path,
    out_dir,
    params_file=None,
    seed: int | None = None,
    tactile: bool = True,
) -> RunResult:
    """Execute the reconstruction pipeline and write the run directory."""
    t_start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    doc = scenarios.load_scenario(scenario_path)
    if seed is not None:
        doc["seed"] = int(seed)
    scenarios.save_scenario(out / "scenario.yaml", doc)
    params, cluster_keys = _load_params(doc, params_file)
    scene = scenarios.build_scene(doc)

    rendered = worldsim.render(scene)
    images = out / "images"
    images.mkdir(exist_ok=True)
    union_mask = rendered.union_cable_mask()
    imgproc.save_ppm(images / "color.ppm", rendered.color)
    imgproc.save_depth(images / "depth.f32", rendered.depth)
    imgproc.save_pgm(images / "mask_union.pgm", union_mask)
    imgproc.save_pgm(images / "shelf.pgm", rendered.shelf_mask)
    for i, mask in enumerate(rendered.cable_masks):
        imgproc.save_pgm(images / f"mask_cable_{i:02d}.pgm", mask)

    # support plane from the shelf pixels, exactly as a real scene would
    shelf_pixels = np.argwhere(rendered.shelf_mask.data)
    stride = max(1, len(shelf_pixels) // MAX_PLANE_PIXELS)
    shelf_cloud = imgproc.pixels_to_cloud(
        shelf_pixels[::stride], rendered.depth, scene.camera
    )
    plane = cloudproc.ransac_plane(
        shelf_cloud,
        seed=int(doc.get("seed", 0)),
        orient_toward=scene.camera.pose.translation,
    )

    cleaned = imgproc.blur_and_clean(union_mask, rendered.color)
    clusters = imgproc.cluster_pixels(cleaned, rendered.color, **cluster_keys)

    stats_list: list[CableRunStats] = []
    for ci, cluster in enumerate(clusters.clusters):
        cable_dir = out / f"cable_{ci:02d}"
        cable_dir.mkdir(exist_ok=True)
        truth_idx = _match_cable(scene, cluster.mean_color)
        radius = scene.cables[truth_idx].radius
        stats = CableRunStats(
            directory=cable_dir.name,
            color=[float(c) for c in cluster.mean_color],
            radius=radius,
        )

        dense = imgproc.pixels_to_cloud(cluster.pixels, rendered.depth, scene.camera)
        cloudproc.save_ply(cable_dir / "P_dense.ply", dense)

        cluster_mask = cluster.as_mask(rendered.color.height, rendered.color.width)
        skeleton = imgproc.skeletonize(cluster_mask)
        skeleton_pixels = np.argwhere(skeleton.data)
        p_skeleton = imgproc.pixels_to_cloud(
            skeleton_pixels, rendered.depth, scene.camera
        )
        cloudproc.save_ply(cable_dir / "P_skeleton.ply", p_skeleton)

        p_down = cloudproc.merge_close_points(
            cloudproc.voxel_downsample(p_skeleton, params.d_m, params.voxel_origin),
            params.t_p,
        )
        cloudproc.save_ply(cable_dir / "P_down.ply", p_down)

        p_proj = cloudproc.project_to_plane(p_down, plane)
        cloudproc.save_ply(cable_dir / "P_proj.ply", p_proj)

        poly = topology.sort_and_find_endpoints(
            p_proj, plane, params.r_search, params.alpha_max_deg
        )
        topology.save_sorted_csv(cable_dir / "P_sorted.csv", poly)
        stats.first_sort_segments = len(poly.segments)
        stats.first_sort_endpoints = 2 * len(poly.segments)

        if tactile:
            probe_fn = worldsim.TactileProbe(scene, eps_contact=params.eps_contact)
            result = explore.explore_from_endpoints(
                poly, plane, probe_fn, params, pad_pitch=scene.pad.pitch
            )
            p_tactile = result.tactile_cloud
            result.save_trace_csv(cable_dir / "trace.csv")
            stats.probes_used = result.probes_used
            stats.dead_ends = result.dead_ends
        else:
            p_tactile = np.zeros((0, 3))
            explore.ExplorationResult(p_tactile).save_trace_csv(
                cable_dir / "trace.csv"
            )
        stats.tactile_points = len(p_tactile)
        cloudproc.save_ply(cable_dir / "P_tactile.ply", p_tactile)

        p_merged = explore.merge_clouds(poly.ordered_points(), p_tactile)
        cloudproc.save_ply(cable_dir / "P_merged.ply", p_merged)

        # the plain greedy walk (no crossing recovery) fragments on dense
        # merged clouds; recorded to witness that refinement is what makes
        # the final sort viable
        raw_sort = topology.sort_and_find_endpoints(
            p_merged, plane, params.r_search, params.alpha_max_deg,
            stitch_crossings=False,
        )
        stats.raw_merged_segments = len(raw_sort.segments)

        p_refined = fitting.refine_merged(p_merged, params)
        final = topology.sort_and_find_endpoints(
            p_refined, plane, params.r_search, params.alpha_max_deg
        )
        topology.save_sorted_csv(cable_dir / "P_resorted.csv", final)
        stats.final_segments = len(final.segments)
        stats.final_endpoints = 2 * len(final.segments)

        # reconstructed curves live on the fitted plane; real centerlines
        # run one radius above it, so exported models are lifted back up
        lift = radius * plane.normal
        samples = []
        fitted = 0
        for sid, seg in enumerate(final.segments):
            if len(seg) < 2:
                continue
            curve = fitting.fit_bspline(final.points[seg]).translated(lift)
            fitting.save_spline(cable_dir / f"spline_seg{sid:02d}.yaml", curve)
            samples.append(fitting.sample_curve(curve, curve.sampling_count))
            fitted += 1
        p_interp = np.vstack(samples) if samples else np.zeros((0, 3))
        cloudproc.save_ply(cable_dir / "P_interpolated.ply", p_interp)

        stats.complete = len(final.segments) == 1 and fitted == 1
        stats_list.append(stats)

    exit_status = (
        EXIT_COMPLETE if all(s.complete for s in stats_list) else EXIT_PARTIAL
    )

    artifacts = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name not in ("manifest.json", "timing.txt"):
            artifacts[str(path.relative_to(out))] = _sha256(path)

    manifest = {
        "scenario": "scenario.yaml",
        "seed": int(doc.get("seed", 0)),
        "no_tactile": not tactile,
        "params": {
            "d_min": params.d_min, "d_m": params.d_m, "t_p": params.t_p,
            "t_h": params.t_h, "delta_y": params.delta_y,
            "delta_z": params.delta_z, "theta_deg": params.theta_deg,
            "r_search": params.r_search,
            "alpha_max_deg": params.alpha_max_deg,
            "max_rotation_attempts": params.max_rotation_attempts,
            "eps_contact": params.eps_contact,
            "probe_budget": params.probe_budget,
            "hover_height": params.hover_height,
            "voxel_origin": [float(v) for v in params.voxel_origin],
            **cluster_keys,
        },
        "plane": [float(c) for c in plane.coefficients],
        "cables": [vars(s) for s in stats_list],
        "exit_status": exit_status,
        "artifacts": artifacts,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    (out / "timing.txt").write_text(f"{time.perf_counter() - t_start:.3f}\n")
    return RunResult(out_dir=out, exit_status=exit_status, stats=stats_list, manifest=manifest)


def _reference_dense_clouds(reference) -> list[tuple[np.ndarray, np.ndarray]]:
    """(mean_color, dense cloud) pairs from a run dir or a scenario file."""
    ref = Path(reference)
    if ref.is_dir():
        manifest = json.loads((ref / "manifest.json").read_text())
        out = []
        for cable in manifest["cables"]:
            cloud = cloudproc.load_ply(ref / cable["directory"] / "P_dense.ply")
            out.append((np.asarray(cable["color"], dtype=float), cloud))
        return out
    doc = scenarios.load_scenario(ref)
    scene = scenarios.build_scene(doc)
    rendered = worldsim.render(scene)
    out = []
    for cable, mask in zip(scene.cables, rendered.cable_masks):
        pixels = np.argwhere(mask.data)
        cloud = imgproc.pixels_to_cloud(pixels, rendered.depth, scene.camera)
        out.append((cable.color, cloud))
    return out


def evaluate_run(run_dir, reference, out_file=None) -> dict:
    """ICP against a dense unoccluded reference plus the simulation oracle.

    The source cloud is the run's interpolated model, the target the dense
    back-projected cable cloud of the reference (another run directory or a
    scenario file). Curve error compares each fitted spline against the
    generating centerline of the run's own scenario.
    """
    run = Path(run_dir)
    manifest = json.loads((run / "manifest.json").read_text())
    scene = scenarios.build_scene(scenarios.load_scenario(run / "scenario.yaml"))
    references = _reference_dense_clouds(reference)
    runtime = None
    timing = run / "timing.txt"
    if timing.exists():
        runtime = float(timing.read_text().strip())

    rows = []
    for cable in manifest["cables"]:
        cable_dir = run / cable["directory"]
        recon = cloudproc.load_ply(cable_dir / "P_interpolated.ply")
        if len(recon) == 0:
            raise EmptyInputError(f"{cable_dir}: empty interpolated cloud")
        color = np.asarray(cable["color"], dtype=float)
        ref_colors = np.array([c for c, _ in references])
        ref_idx = int(np.argmin(np.linalg.norm(ref_colors - color, axis=1)))
        target = references[ref_idx][1]
        reg = icp(recon, target)

        truth = scene.cables[_match_cable(scene, color)]
        means, maxes = [], []
        for spline_path in sorted(cable_dir.glob("spline_seg*.yaml")):
            curve = fitting.load_spline(spline_path)
            mean_d, max_d = curve_error(curve, truth)
            means.append(mean_d)
            maxes.append(max_d)
        rows.append(
            {
                "cable": cable["directory"],
                "color": [float(c) for c in color],
                "icp_rmse": float(reg.rmse),
                "icp_iterations": int(reg.iterations),
                "curve_mean_error": float(np.mean(means)) if means else None,
                "curve_max_error": float(np.max(maxes)) if maxes else None,
                "segment_count": int(cable["final_segments"]),
                "endpoint_count": int(cable["final_endpoints"]),
                "probe_count": int(cable["probes_used"]),
            }
        )

    report = {
        "run": str(run),
        "reference": str(reference),
        "runtime_s": runtime,
        "cables": rows,
    }
    if out_file is None:
        out_file = run / "eval_report.yaml"
    Path(out_file).write_text(yaml.safe_dump(report, sort_keys=False))
    return report


def _svg_scatter(
    path: Path,
    points_uv: np.ndarray,
    endpoints_uv: np.ndarray | None = None,
    polyline_uv: np.ndarray | None = None,
    title: str = "",
) -> None:
    """Minimal deterministic SVG scatter in plane coordinates."""
    size = 640
    margin = 40
    all_pts = [p for p in (points_uv, endpoints_uv, polyline_uv) if p is not None and len(p)]
    if all_pts:
        stack = np.vstack(all_pts)
        lo = stack.min(axis=0)
        hi = stack.max(axis=0)
    else:
        lo = np.array([-1.0, -1.0])
        hi = np.array([1.0, 1.0])
    span = np.maximum(hi - lo, 1e-6).max()
    scale = (size - 2 * margin) / span

    def to_px(p):
        x = margin + (p[0] - lo[0]) * scale
        y = size - margin - (p[1] - lo[1]) * scale
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{margin}" y="24" font-size="16" font-family="sans-serif">{title}</text>',
        f'<line x1="{margin}" y1="{size - margin}" x2="{size - margin}" '
        f'y2="{size - margin}" stroke="#888"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{size - margin}" stroke="#888"/>',
    ]
    if polyline_uv is not None and len(polyline_uv) >= 2:
        coords = " ".join(
            f"{to_px(p)[0]:.2f},{to_px(p)[1]:.2f}" for p in polyline_uv
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="#2060c0" stroke-width="1.5"/>'
        )
    for p in points_uv:
        x, y = to_px(p)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="#303030"/>')
    if endpoints_uv is not None:
        for p in endpoints_uv:
            x, y = to_px(p)
            parts.append(
                f'<circle cx="{x:.2f}" cy="{y:.2f}" r="5" fill="none" '
                f'stroke="red" stroke-width="2"/>'
            )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def plot_run(run_dir) -> list[Path]:
    """One SVG per canonical intermediate cloud for every cable."""
    run = Path(run_dir)
    manifest = json.loads((run / "manifest.json").read_text())
    plane = cloudproc.PlaneModel(np.asarray(manifest["plane"], dtype=float))
    written = []
    for cable in manifest["cables"]:
        cable_dir = run / cable["directory"]
        for name in CANONICAL_CLOUDS:
            endpoints_uv = None
            polyline_uv = None
            if name == "P_sorted":
                poly = topology.load_sorted_csv(cable_dir / "P_sorted.csv")
                cloud = poly.ordered_points()
                endpoints_uv = plane.to_plane_coords(
                    np.array([ep.position for ep in poly.endpoints])
                )
            else:
                cloud = cloudproc.load_ply(cable_dir / f"{name}.ply")
            if name == "P_interpolated" and len(cloud) >= 2:
                polyline_uv = plane.to_plane_coords(cloud)
            uv = plane.to_plane_coords(cloud) if len(cloud) else np.zeros((0, 2))
            out_path = cable_dir / f"{name}.svg"
            _svg_scatter(
                out_path,
                uv,
                endpoints_uv=endpoints_uv,
                polyline_uv=polyline_uv,
                title=f"{cable['directory']} {name}",
            )
            written.append(out_path)
    return written
