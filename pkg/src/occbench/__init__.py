"""Synthetic occlusion benchmarks and localization-robustness metrics for video action detection."""

__version__ = "0.1.0"
