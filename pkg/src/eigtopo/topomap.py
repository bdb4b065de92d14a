"""Scalp topomap rendering: projection, thin-plate-spline interpolation, colour.

Image convention: a G x G grid over the square [-1, 1]^2 seen from above,
nose up. Row ``i`` sits at y = 1 - (2i + 1)/G, column ``j`` at
x = -1 + (2j + 1)/G. Pixels with x^2 + y^2 <= 1 form the head mask; flattened
vectors always list in-mask pixels in row-major order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataError

RIM_RADIUS = 0.95
BACKGROUND = (1.0, 1.0, 1.0)

# blue -> cyan -> yellow -> red on the normalised [0, 1] scale. Blue drains
# out before red saturates (knot at 0.375); a straight cyan -> yellow leg
# would make the R plane exactly 1 - B and the two spectra identical.
COLORMAP_KNOTS = np.array([0.0, 0.25, 0.375, 0.5, 1.0])
COLORMAP_RGB = np.array([
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [0.5, 1.0, 0.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
])
CHANNELS = ("R", "G", "B")


@dataclass(frozen=True)
class ProjectedMontage:
    labels: tuple
    xy: np.ndarray


def project_montage(montage):
    """Azimuthal-equidistant projection about the vertex, outermost electrode at the rim."""
    pos = montage.positions
    polar = np.arccos(np.clip(pos[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(pos[:, 1], pos[:, 0])
    outer = polar.max()
    scale = RIM_RADIUS / outer if outer > 0 else 0.0
    r = polar * scale
    xy = np.column_stack([r * np.cos(azimuth), r * np.sin(azimuth)])
    xy[polar == 0] = 0.0
    xy.setflags(write=False)
    return ProjectedMontage(tuple(montage.labels), xy)


def pixel_grid(G):
    c = -1.0 + (2 * np.arange(G) + 1) / G
    x, y = np.meshgrid(c, c[::-1])
    return x, y


@lru_cache(maxsize=None)
def head_mask(G):
    x, y = pixel_grid(G)
    m = x ** 2 + y ** 2 <= 1.0
    m.setflags(write=False)
    return m


def _tps_kernel(r):
    with np.errstate(divide="ignore", invalid="ignore"):
        k = r * r * np.log(r)
    k[r == 0] = 0.0
    return k


class ScalpInterpolator:
    """Linear map from electrode values to in-mask pixel values (thin-plate spline).

    The spline ``f(p) = sum_i w_i U(|p - p_i|) + a0 + a1 x + a2 y`` with
    ``U(r) = r^2 log r`` interpolates the electrode values exactly, so it is
    precomputed once as an (n_pixels x n_electrodes) matrix.
    """

    def __init__(self, pm, G):
        if G < 16:
            raise DataError("grid size G must be >= 16")
        pts = np.asarray(pm.xy, dtype=np.float64)
        n = len(pts)
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        if n < 3 or np.min(dist[np.triu_indices(n, 1)]) < 1e-9:
            raise DataError("degenerate electrode layout: duplicate electrodes")
        P = np.column_stack([np.ones(n), pts])
        if np.linalg.matrix_rank(P) < 3:
            raise DataError("degenerate electrode layout: electrodes are collinear")
        L = np.zeros((n + 3, n + 3))
        L[:n, :n] = _tps_kernel(dist)
        L[:n, n:] = P
        L[n:, :n] = P.T
        rhs = np.zeros((n + 3, n))
        rhs[:n] = np.eye(n)
        coef = np.linalg.solve(L, rhs)  # maps values -> (w, a)

        self.G = G
        self.mask = head_mask(G)
        x, y = pixel_grid(G)
        q = np.column_stack([x[self.mask], y[self.mask]])
        dq = np.sqrt(((q[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        basis = np.hstack([_tps_kernel(dq), np.column_stack([np.ones(len(q)), q])])
        self.operator = basis @ coef
        self.n_pixels = len(q)

    def pixels(self, values):
        """In-mask pixel values; ``values`` is (n_electrodes,) or (n_electrodes, T)."""
        return self.operator @ np.asarray(values, dtype=np.float64)

    def field(self, values):
        out = np.full((self.G, self.G), np.nan)
        out[self.mask] = self.pixels(values)
        return out


def interpolate_scalp(values, pm, G):
    """G x G interpolated field, NaN outside the head."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError("electrode values must be finite")
    return ScalpInterpolator(pm, G).field(values)


def colormap(u):
    """Piecewise-linear colour of normalised values (clipped to [0, 1]); shape (..., 3)."""
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    return np.stack([np.interp(u, COLORMAP_KNOTS, COLORMAP_RGB[:, c]) for c in range(3)], axis=-1)


def colormap_channel(u, channel):
    c = CHANNELS.index(channel) if isinstance(channel, str) else int(channel)
    return np.interp(np.clip(u, 0.0, 1.0), COLORMAP_KNOTS, COLORMAP_RGB[:, c])


@dataclass(frozen=True)
class TopomapFrame:
    grid: np.ndarray
    head_mask: np.ndarray


def colorize(field, v_min, v_max):
    if not v_min < v_max:
        raise ValueError("need v_min < v_max")
    field = np.asarray(field, dtype=np.float64)
    G = field.shape[0]
    mask = head_mask(G) if field.shape == (G, G) else np.isfinite(field)
    u = (np.nan_to_num(field) - v_min) / (v_max - v_min)
    grid = colormap(u)
    grid[~mask] = BACKGROUND
    return TopomapFrame(grid, mask)


@dataclass(frozen=True)
class TopomapStack:
    """Frames of one question, stored losslessly as normalised in-mask values.

    ``values[i]`` holds frame i's in-mask pixels mapped to [0, 1] by the
    question's symmetric colour scale; colours are a fixed function of them.
    """

    question_id: str
    G: int
    values: np.ndarray  # n x n_pixels
    scale_uv: float

    def __post_init__(self):
        n = self.values.shape[0]
        if not 1 <= n <= 7500:
            raise DataError(f"stack must hold 1..7500 frames, got {n}")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def head_mask(self):
        return head_mask(self.G)

    def channel(self, color):
        """One colour plane as a (n_pixels x n) matrix, one column per frame."""
        return colormap_channel(self.values, color).T

    def frame(self, i):
        grid = np.empty((self.G, self.G, 3))
        grid[:] = BACKGROUND
        grid[self.head_mask] = colormap(self.values[i])
        return TopomapFrame(grid, self.head_mask)

    @property
    def frames(self):
        return [self.frame(i) for i in range(self.n)]

    def to_rgb(self):
        """All frames as an (n, G, G, 3) float array."""
        out = np.empty((self.n, self.G, self.G, 3))
        out[:] = BACKGROUND
        out[:, self.head_mask] = colormap(self.values)
        return out


def render_stack(segment, pm, G=40, stride=1, question_id="", interpolator=None):
    """One frame per ``stride``-th sample, coloured on +-max|uV| of the whole segment."""
    segment = np.asarray(segment, dtype=np.float64)
    if segment.ndim != 2 or segment.shape[1] == 0:
        raise DataError("empty segment")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    interp = interpolator or ScalpInterpolator(pm, G)
    if segment.shape[0] != interp.operator.shape[1]:
        raise DataError("segment rows do not match the projected montage")
    vmax = float(np.max(np.abs(segment)))
    if vmax == 0.0:
        vmax = 1.0
    picked = segment[:, ::stride]
    assert picked.shape[1] == math.ceil(segment.shape[1] / stride)
    u = (interp.pixels(picked).T + vmax) / (2 * vmax)
    return TopomapStack(question_id, interp.G, np.clip(u, 0.0, 1.0), vmax)


def save_frame_png(frame, path):
    """Write one frame for visual inspection (8-bit, lossy)."""
    from PIL import Image

    img = np.round(np.clip(frame.grid, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(img, mode="RGB").save(path)
