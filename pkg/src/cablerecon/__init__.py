"""Reconstruction of deformable cables from fused visual and tactile point data.

The pipeline turns segmentation masks and depth into per-cable skeleton
clouds, conditions them (plane fit, downsample, merge, projection), sorts
them by following the cable direction, closes occlusion gaps with simulated
tactile probing, and fits one B-spline per cable. Accuracy is scored with
point-to-point ICP and, in simulation, against the generating centerline.
"""

__version__ = "0.1.0"
