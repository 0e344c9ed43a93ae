"""Synthetic test scene: a metal plate plus a C4-like disc, designed in the
spectra domain and mapped back through the exact inverse processing chain so
the forward pipeline reproduces the designed slices.

Amplitude/contrast constants are artifact choices tuned so the deterministic
mock classifier separates the two classes cleanly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .spectra import ComplexSlice, hamming_window
from .volume_io import Domain, ThzVolume, VolumeHeader


@dataclass(frozen=True)
class Rect:
    """Half-open cell rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def mask(self, nx: int, ny: int) -> np.ndarray:
        m = np.zeros((nx, ny), dtype=bool)
        m[self.x0 : self.x1, self.y0 : self.y1] = True
        return m


@dataclass(frozen=True)
class Disc:
    cx: int
    cy: int
    radius: int

    def mask(self, nx: int, ny: int) -> np.ndarray:
        x, y = np.ogrid[:nx, :ny]
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.radius**2


@dataclass(frozen=True)
class PhantomSpec:
    nf: int = 64
    nx: int = 64
    ny: int = 64
    plate_rect: Rect = Rect(6, 6, 26, 58)
    c4_disc: Disc = Disc(44, 32, 9)
    # band proportions mirror the visible mid-range of a 1400-frame capture
    band_lo: int = 14
    band_hi: int = 55
    peak_frame: int = 32
    plate_amplitude: float = 1.0
    c4_amplitude: float = 1.5
    noise_sigma: float = 0.02
    seed: int = 1337

    def __post_init__(self):
        if not (0 <= self.band_lo < self.band_hi <= self.nf):
            raise ValueError(f"band [{self.band_lo}, {self.band_hi}) invalid for nf={self.nf}")
        if not (self.band_lo <= self.peak_frame < self.band_hi):
            raise ValueError("peak_frame must lie inside the band")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        plate = self.plate_rect.mask(self.nx, self.ny)
        disc = self.c4_disc.mask(self.nx, self.ny)
        if (plate & disc).any():
            raise ValueError("plate and disc regions must be disjoint")


YES_C4 = "YES_C4"
NO_C4 = "NO_C4"


@dataclass(frozen=True)
class AnnotationSet:
    labels: dict[int, str] = field(repr=False)
    provenance: str = ""

    def __post_init__(self):
        bad = {v for v in self.labels.values()} - {YES_C4, NO_C4}
        if bad:
            raise ValueError(f"unknown labels: {bad}")


ENVELOPE_RAMP_FRAMES = 3
ENVELOPE_PLATEAU = 0.8


def _band_envelope(spec: PhantomSpec) -> np.ndarray:
    """Raised-cosine bump supported on [band_lo, band_hi), peaking at peak_frame.

    Short cosine ramps at the band edges rise to a high plateau, on top of
    which a gentle raised-cosine crest puts the unique maximum (1.0) at
    peak_frame. The plateau keeps in-band disc frames bright enough for the
    mock classifier; pure edge-to-edge cosine shaping would leave band-edge
    frames with an invisible disc yet a YES label.
    """
    env = np.zeros(spec.nf)
    lo, hi, peak = spec.band_lo, spec.band_hi, spec.peak_frame
    f = np.arange(lo, hi, dtype=np.float64)
    width = hi - lo
    ramp = min(ENVELOPE_RAMP_FRAMES, max(1, width // 2))
    up = np.clip((f - lo + 1.0) / ramp, 0.0, 1.0)
    down = np.clip((hi - f) / ramp, 0.0, 1.0)
    edge = 0.5 * (1.0 - np.cos(np.pi * up)) * 0.5 * (1.0 - np.cos(np.pi * down))
    tri = np.where(
        f <= peak,
        (f - lo + 1.0) / (peak - lo + 1.0),
        (hi - f) / (hi - peak),
    )
    crest = 0.5 * (1.0 - np.cos(np.pi * tri))
    env[lo:hi] = edge * (ENVELOPE_PLATEAU + (1.0 - ENVELOPE_PLATEAU) * crest)
    return env


def design_slices(spec: PhantomSpec) -> list[ComplexSlice]:
    """Target spectra-domain slices, one per frame.

    Plate: constant amplitude at every frame. Disc: amplitude follows the band
    envelope with a per-frame phase drift. Background: seeded complex Gaussian
    noise of scale noise_sigma.
    """
    rng = np.random.default_rng(spec.seed)
    plate = spec.plate_rect.mask(spec.nx, spec.ny)
    disc = spec.c4_disc.mask(spec.nx, spec.ny)
    env = _band_envelope(spec)
    noise = spec.noise_sigma * (
        rng.standard_normal((spec.nf, spec.nx, spec.ny))
        + 1j * rng.standard_normal((spec.nf, spec.nx, spec.ny))
    )
    slices = []
    for f in range(spec.nf):
        vals = noise[f].astype(np.complex128)
        vals[plate] = spec.plate_amplitude
        drift = np.exp(1j * 2.0 * np.pi * f / spec.nf)
        vals[disc] = spec.c4_amplitude * env[f] * drift
        slices.append(ComplexSlice(values=vals, depth_index=f))
    return slices


def annotations_for(spec: PhantomSpec) -> AnnotationSet:
    labels = {f: YES_C4 if spec.band_lo <= f < spec.band_hi else NO_C4 for f in range(spec.nf)}
    return AnnotationSet(labels=labels, provenance=f"phantom seed={spec.seed}")


def generate_phantom(spec: PhantomSpec) -> tuple[ThzVolume, AnnotationSet]:
    """Invert fftshift -> DFT -> Hamming window so the forward pipeline lands
    on the designed slices, and emit the matching ground-truth labels."""
    designed = np.stack([s.values for s in design_slices(spec)])
    w = hamming_window(spec.nf)
    unshifted = np.fft.ifftshift(designed, axes=0)
    raw = np.fft.ifft(unshifted, axis=0) / w[:, None, None]
    header = VolumeHeader(
        nf=spec.nf,
        nx=spec.nx,
        ny=spec.ny,
        domain=Domain.RAW,
    )
    vol = ThzVolume(header, raw.astype(np.complex64))
    return vol, annotations_for(spec)


def write_annotations(ann: AnnotationSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "label"])
        for frame in sorted(ann.labels):
            writer.writerow([frame, ann.labels[frame]])
