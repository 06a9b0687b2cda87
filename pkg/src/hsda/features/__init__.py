"""Kinematic channels, dynamics-colored rendering, augmentation, synthesis."""

from .augment import OPS as AUGMENT_OPS
from .augment import augment
from .kinematics import (
    CHANNEL_NAMES,
    N_CHANNELS,
    SignalMatrix,
    compute_channels,
    kinematic_features,
    write_signal_csv,
)
from .render import RgbCanvas, read_ppm, render_image, write_ppm
from .synth import synth_generate, write_raw_csv

__all__ = [
    "CHANNEL_NAMES",
    "N_CHANNELS",
    "SignalMatrix",
    "compute_channels",
    "kinematic_features",
    "write_signal_csv",
    "RgbCanvas",
    "render_image",
    "write_ppm",
    "read_ppm",
    "augment",
    "AUGMENT_OPS",
    "synth_generate",
    "write_raw_csv",
]
