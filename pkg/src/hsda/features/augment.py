"""Seeded data augmentation.

Geometric ops (rotate, scale) act on stroke coordinates before rendering and
feature extraction; signal ops (noise, window_warp, window_slice) act on the
extracted channel matrix along the time axis. Rendered canvases cannot be
augmented: re-render from the transformed stroke instead.
"""

from __future__ import annotations

import numpy as np

from ..diffcore.rng import STREAM_AUGMENT, make_rng
from ..errors import ConfigError
from ..ingest import StrokeSequence
from .kinematics import SignalMatrix
from .render import RgbCanvas

OPS = ("rotate", "noise", "scale", "window_warp", "window_slice")

ROTATE_MAX_DEG = 15.0
NOISE_SIGMA = 0.01
SCALE_LO, SCALE_HI = 0.9, 1.1
WARP_FRACTION = 0.1
WARP_FACTORS = (0.5, 2.0)
SLICE_FRACTION = 0.9


def _stroke_copy(s: StrokeSequence, x: np.ndarray, y: np.ndarray) -> StrokeSequence:
    return StrokeSequence(
        subject_id=s.subject_id,
        task_id=s.task_id,
        label=s.label,
        t=s.t.copy(),
        x=x,
        y=y,
        p=s.p.copy(),
        stats=dict(s.stats),
    )


def _rotate(s: StrokeSequence, rng: np.random.Generator) -> StrokeSequence:
    angle = np.deg2rad(rng.uniform(-ROTATE_MAX_DEG, ROTATE_MAX_DEG))
    cx, cy = s.x.mean(), s.y.mean()
    dx, dy = s.x - cx, s.y - cy
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    return _stroke_copy(s, cx + cos_a * dx - sin_a * dy, cy + sin_a * dx + cos_a * dy)


def _scale(s: StrokeSequence, rng: np.random.Generator) -> StrokeSequence:
    f = rng.uniform(SCALE_LO, SCALE_HI)
    cx, cy = s.x.mean(), s.y.mean()
    return _stroke_copy(s, cx + f * (s.x - cx), cy + f * (s.y - cy))


def _noise(m: SignalMatrix, rng: np.random.Generator) -> SignalMatrix:
    jitter = rng.normal(0.0, NOISE_SIGMA, size=m.channels.shape)
    return SignalMatrix(m.channels + jitter, m.channel_names, m.sampling_rate)


def _resample_to(rows: np.ndarray, length: int) -> np.ndarray:
    src = np.linspace(0.0, 1.0, rows.shape[1])
    dst = np.linspace(0.0, 1.0, length)
    return np.vstack([np.interp(dst, src, r) for r in rows])


def _window_warp(m: SignalMatrix, rng: np.random.Generator) -> SignalMatrix:
    T = m.T
    w = max(2, int(round(WARP_FRACTION * T)))
    start = int(rng.integers(0, T - w + 1))
    factor = WARP_FACTORS[int(rng.integers(0, len(WARP_FACTORS)))]
    w_new = max(2, int(round(w * factor)))
    window = _resample_to(m.channels[:, start : start + w], w_new)
    stitched = np.concatenate(
        [m.channels[:, :start], window, m.channels[:, start + w :]], axis=1
    )
    return SignalMatrix(_resample_to(stitched, T), m.channel_names, m.sampling_rate)


def _window_slice(m: SignalMatrix, rng: np.random.Generator) -> SignalMatrix:
    T = m.T
    w = max(2, int(round(SLICE_FRACTION * T)))
    start = int(rng.integers(0, T - w + 1))
    crop = m.channels[:, start : start + w]
    return SignalMatrix(_resample_to(crop, T), m.channel_names, m.sampling_rate)


def augment(item, op: str, seed: int, substream: int = 0):
    """Apply one named augmentation with its own rng substream.

    rotate/scale take a StrokeSequence; noise/window_warp/window_slice take a
    SignalMatrix. substream should be the record index when augmenting a
    dataset, so records can be processed in any order or in parallel.
    """
    if op not in OPS:
        raise ConfigError("unknown augmentation %r (choose from %s)" % (op, ", ".join(OPS)))
    if isinstance(item, RgbCanvas):
        raise ConfigError("canvases are not augmented; transform the stroke and re-render")
    rng = make_rng(seed, STREAM_AUGMENT, substream=substream)
    if op in ("rotate", "scale"):
        if not isinstance(item, StrokeSequence):
            raise ConfigError("%s needs stroke coordinates, got %s" % (op, type(item).__name__))
        return _rotate(item, rng) if op == "rotate" else _scale(item, rng)
    if not isinstance(item, SignalMatrix):
        raise ConfigError("%s needs a signal matrix, got %s" % (op, type(item).__name__))
    if op == "noise":
        return _noise(item, rng)
    if op == "window_warp":
        return _window_warp(item, rng)
    return _window_slice(item, rng)
