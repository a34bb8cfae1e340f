"""Volumetric object detection: voxel-wise classification, averaging + NMS, point-matched evaluation."""

__version__ = "0.1.0"
