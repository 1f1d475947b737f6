"""SRR video camouflaged object detection (desk-scale C++ core)."""

from ._core import (
    ConfigError,
    DimensionError,
    IoError,
    Model,
    ParseError,
    dice,
    iou,
    mae,
    s_measure,
    spearman,
    synth,
    weighted_fbeta,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "IoError",
    "Model",
    "ParseError",
    "dice",
    "iou",
    "mae",
    "s_measure",
    "spearman",
    "synth",
    "weighted_fbeta",
]
