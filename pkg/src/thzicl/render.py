"""Dual-plot frame rendering (intensity | phase) and demonstration crops.

Intensity panels use the viridis palette over [0, 1]; phase panels use the
cyclic twilight palette with the affine map v = (phi + pi) / (2 pi), so the
+pi / -pi seam is invisible. PNG output is byte-deterministic.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .spectra import FrameSpectra


class RenderError(Exception):
    pass


class OutOfRange(RenderError):
    pass


class CropOutOfBounds(RenderError):
    pass


class Palette(enum.Enum):
    VIRIDIS = "viridis"
    TWILIGHT = "twilight"


DEFAULT_CROP_SIZE = 26
LABEL_STRIP_HEIGHT = 12


def _load_table(name: str) -> np.ndarray:
    with resources.files("thzicl.assets").joinpath(f"{name}_256.csv").open("rb") as fh:
        tbl = np.loadtxt(fh, delimiter=",")
    assert tbl.shape == (256, 3)
    return tbl


_TABLES = {Palette.VIRIDIS: _load_table("viridis"), Palette.TWILIGHT: _load_table("twilight")}


def palette_table(palette: Palette) -> np.ndarray:
    """The embedded 256-entry float RGB reference table, rows in [0, 1]."""
    return _TABLES[palette].copy()


def colormap_lookup(palette: Palette, v: float) -> tuple[int, int, int]:
    """Linear interpolation into the 256-entry table; 8-bit RGB, round half up."""
    if not 0.0 <= v <= 1.0:
        raise OutOfRange(f"value {v} outside [0, 1]")
    rgb = _interp_table(_TABLES[palette], np.asarray([v]))[0]
    return tuple(int(c) for c in rgb)


def _interp_table(table: np.ndarray, v: np.ndarray) -> np.ndarray:
    pos = np.clip(v, 0.0, 1.0) * (len(table) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(table) - 1)
    frac = (pos - lo)[..., None]
    rgb = table[lo] * (1.0 - frac) + table[hi] * frac
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


def _colorize(values: np.ndarray, palette: Palette, scale: int) -> np.ndarray:
    rgb = _interp_table(_TABLES[palette], np.clip(values, 0.0, 1.0))
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    return rgb


def phase_to_unit(phase: np.ndarray) -> np.ndarray:
    """Affine map of [-pi, pi] phase onto the [0, 1] palette axis."""
    return (np.asarray(phase) + np.pi) / (2.0 * np.pi)


@dataclass(frozen=True)
class RenderOptions:
    panel_scale: int = 1
    show_frame_label: bool = False
    label_text_template: str = "Frame Number {frame:04d}"

    def __post_init__(self):
        if self.panel_scale < 1:
            raise ValueError("panel_scale must be >= 1")


@dataclass(frozen=True)
class CropSpec:
    center_x: int
    center_y: int
    size: int = DEFAULT_CROP_SIZE

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("crop size must be >= 1")


@dataclass(frozen=True)
class RenderedImage:
    width: int
    height: int
    rgb: np.ndarray
    png: bytes

    @classmethod
    def from_rgb(cls, rgb: np.ndarray) -> "RenderedImage":
        h, w, _ = rgb.shape
        buf = io.BytesIO()
        Image.fromarray(rgb, mode="RGB").save(buf, format="PNG", optimize=False)
        return cls(width=w, height=h, rgb=rgb, png=buf.getvalue())


def render_frame(fs: FrameSpectra, opts: RenderOptions = RenderOptions()) -> RenderedImage:
    """Side-by-side panels: intensity (viridis) left, phase (twilight) right."""
    left = _colorize(fs.intensity, Palette.VIRIDIS, opts.panel_scale)
    right = _colorize(phase_to_unit(fs.phase), Palette.TWILIGHT, opts.panel_scale)
    rgb = np.concatenate([left, right], axis=1)
    if opts.show_frame_label:
        rgb = _add_label_strip(rgb, opts.label_text_template.format(frame=fs.frame_index))
    return RenderedImage.from_rgb(np.ascontiguousarray(rgb))


def _add_label_strip(rgb: np.ndarray, text: str) -> np.ndarray:
    strip = Image.new("RGB", (rgb.shape[1], LABEL_STRIP_HEIGHT), (0, 0, 0))
    draw = ImageDraw.Draw(strip)
    draw.text((2, 1), text, fill=(255, 255, 255), font=ImageFont.load_default())
    return np.concatenate([np.asarray(strip), rgb], axis=0)


def extract_crop(fs: FrameSpectra, spec: CropSpec) -> RenderedImage:
    """size x size windows at identical coordinates from both maps, composed
    side by side (2*size x size), unscaled and unlabeled."""
    h, w = fs.intensity.shape
    r0 = spec.center_y - spec.size // 2
    c0 = spec.center_x - spec.size // 2
    if r0 < 0 or c0 < 0 or r0 + spec.size > h or c0 + spec.size > w:
        raise CropOutOfBounds(
            f"{spec.size}x{spec.size} window at ({spec.center_x}, {spec.center_y}) "
            f"exceeds {w}x{h} map"
        )
    rows, cols = slice(r0, r0 + spec.size), slice(c0, c0 + spec.size)
    left = _colorize(fs.intensity[rows, cols], Palette.VIRIDIS, 1)
    right = _colorize(phase_to_unit(fs.phase[rows, cols]), Palette.TWILIGHT, 1)
    return RenderedImage.from_rgb(np.ascontiguousarray(np.concatenate([left, right], axis=1)))


def frame_filename(frame_index: int) -> str:
    return f"frame_{frame_index:04d}.png"


def crop_filename(frame_index: int, cx: int, cy: int) -> str:
    return f"crop_{frame_index:04d}_{cx}_{cy}.png"
