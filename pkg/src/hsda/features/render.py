"""Dynamics-colored rasterization of a pen trace.

The trajectory is mapped onto a square canvas (aspect ratio preserved, fixed
pixel margin) and drawn as Bresenham segments between consecutive on-paper
samples. Color carries the dynamics: R, G, B are the min-max normalized
pressure rate, acceleration, and angular speed of the nearer sample, mapped
to [0.1, 1.0] so stroke pixels never fade to background. The trajectory is
resampled by arc length first, keeping gaps between drawn points at or below
one pixel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DataQualityWarning
from ..ingest import StrokeSequence
from .kinematics import compute_channels

COLOR_FLOOR = 0.1
MARGIN_PX = 4


@dataclass
class RgbCanvas:
    """Square RGB image, channels-first, values in [0, 1], background 0."""

    pixels: np.ndarray  # (3, H, W)

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[0] != 3:
            raise ValueError("expected (3, H, W) pixels, got %s" % (self.pixels.shape,))
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise ValueError("pixel values outside [0, 1]")

    @property
    def size(self) -> int:
        return self.pixels.shape[1]


def _minmax_unit(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def _bresenham(r0: int, c0: int, r1: int, c1: int):
    """Integer line from (r0,c0) to (r1,c1), both endpoints included."""
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr - dc
    r, c = r0, c0
    while True:
        yield r, c
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc


def render_image(s: StrokeSequence, size: int = 128) -> RgbCanvas:
    """Rasterize one stroke sequence onto a size x size canvas."""
    raw = compute_channels(s.t, s.x, s.y, s.p)
    colors = np.stack(
        [
            _minmax_unit(raw["pressure_rate"]),
            _minmax_unit(raw["acceleration"]),
            _minmax_unit(raw["angular_speed"]),
        ]
    )
    colors = COLOR_FLOOR + (1.0 - COLOR_FLOOR) * colors  # (3, T)

    x = np.asarray(s.x, dtype=np.float64)
    y = np.asarray(s.y, dtype=np.float64)
    xmin, xmax = x.min(), x.max()
    ymin, ymax = y.min(), y.max()
    extent = max(xmax - xmin, ymax - ymin)
    canvas = np.zeros((3, size, size), dtype=np.float64)
    center = (size - 1) / 2.0

    if extent == 0.0:
        warnings.warn(
            "subject %s task %d: degenerate bounding box, rendering a single pixel"
            % (s.subject_id, s.task_id),
            DataQualityWarning,
            stacklevel=2,
        )
        ci = int(round(center))
        canvas[:, ci, ci] = colors[:, 0]
        return RgbCanvas(canvas)

    scale = (size - 1 - 2 * MARGIN_PX) / extent
    col = (x - (xmin + xmax) / 2.0) * scale + center
    row = center - (y - (ymin + ymax) / 2.0) * scale  # image rows grow downward

    # on-paper test uses raw pressure when standardization stats are known
    if "p" in s.stats:
        mu, sd = s.stats["p"]
        p_raw = s.p * sd + mu
    else:
        p_raw = s.p
    on_paper = p_raw > 0

    for i in range(len(x) - 1):
        if not (on_paper[i] and on_paper[i + 1]):
            continue
        seg = np.hypot(row[i + 1] - row[i], col[i + 1] - col[i])
        n_pts = max(2, int(np.ceil(seg)) + 1)  # sub-pixel spacing along the segment
        ts = np.linspace(0.0, 1.0, n_pts)
        rr = row[i] + ts * (row[i + 1] - row[i])
        cc = col[i] + ts * (col[i + 1] - col[i])
        for j in range(n_pts - 1):
            color = colors[:, i] if ts[j] < 0.5 else colors[:, i + 1]
            for pr, pc in _bresenham(
                int(round(rr[j])), int(round(cc[j])), int(round(rr[j + 1])), int(round(cc[j + 1]))
            ):
                if 0 <= pr < size and 0 <= pc < size:
                    canvas[:, pr, pc] = color

    return RgbCanvas(canvas)


def write_ppm(canvas: RgbCanvas, path) -> None:
    """Binary portable pixmap, maxval 255."""
    h, w = canvas.pixels.shape[1:]
    data = np.clip(np.rint(canvas.pixels * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(data.transpose(1, 2, 0).tobytes())


def read_ppm(path) -> RgbCanvas:
    """Inverse of write_ppm, for round-trip checks."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError("not a binary pixmap: %r" % magic)
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        data = np.frombuffer(fh.read(w * h * 3), dtype=np.uint8)
    pixels = data.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float64) / maxval
    return RgbCanvas(pixels)
