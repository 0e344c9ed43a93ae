"""Frequency-axis processing chain: Hamming window, FFT + shift, per-depth
intensity/phase extraction with orientation fix, and exponential rescaling
of the intensity map into (0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .volume_io import Domain, ThzVolume


class SpectraError(Exception):
    pass


class ZeroLength(SpectraError):
    pass


class LengthMismatch(SpectraError):
    pass


class WrongDomain(SpectraError):
    pass


class DepthOutOfRange(SpectraError):
    pass


@dataclass(frozen=True)
class ComplexSlice:
    """One (nx, ny) complex matrix taken from a SPECTRA volume."""

    values: np.ndarray
    depth_index: int


@dataclass(frozen=True)
class FrameSpectra:
    """Display-ready maps for one frame: intensity in [0,1], phase in [-pi, pi].

    Both maps are (ny, nx), i.e. transposed relative to the source slice.
    """

    frame_index: int
    intensity: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)


def hamming_window(n: int) -> np.ndarray:
    """Classical Hamming weights 0.54 - 0.46*cos(2*pi*k/(n-1)); [1.0] for n=1."""
    if n < 1:
        raise ZeroLength("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    # evaluate one half and mirror so w[k] == w[n-1-k] holds bit-exactly
    k = np.arange((n + 1) // 2)
    half = 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))
    return np.concatenate([half, half[: n // 2][::-1]])


def apply_window(vol: ThzVolume, weights: np.ndarray) -> ThzVolume:
    """Multiply each frame by its window weight. Domain is unchanged."""
    if len(weights) != vol.nf:
        raise LengthMismatch(f"window length {len(weights)} != nf {vol.nf}")
    out = vol.data.astype(np.complex128) * np.asarray(weights, dtype=np.float64)[:, None, None]
    return vol.with_data(out)


def fftshift_indices(n: int) -> np.ndarray:
    """Permutation moving DFT bin k to index (k + n//2) mod n."""
    if n < 1:
        raise ZeroLength("length must be >= 1")
    return (np.arange(n) + n // 2) % n


def forward_transform(vol: ThzVolume) -> ThzVolume:
    """Unnormalized DFT along the frame axis followed by fftshift.

    The zero-frequency bin lands at index nf // 2. Output domain is SPECTRA.
    """
    if vol.domain != Domain.RAW:
        raise WrongDomain("forward_transform expects a RAW volume")
    spec = np.fft.fftshift(np.fft.fft(vol.data.astype(np.complex128), axis=0), axes=0)
    return vol.with_data(spec, domain=Domain.SPECTRA)


def extract_slice(vol: ThzVolume, d: int) -> ComplexSlice:
    if vol.domain != Domain.SPECTRA:
        raise WrongDomain("extract_slice expects a SPECTRA volume")
    if not 0 <= d < vol.nf:
        raise DepthOutOfRange(f"depth {d} outside [0, {vol.nf})")
    return ComplexSlice(values=np.asarray(vol.data[d], dtype=np.complex128), depth_index=d)


def _orient(m: np.ndarray) -> np.ndarray:
    # flip row order (vertical flip of the (nx, ny) matrix), then transpose
    return np.flipud(m).T.copy()


def intensity_map(sl: ComplexSlice) -> np.ndarray:
    """Squared magnitude, reoriented; not yet normalized."""
    return _orient(np.abs(sl.values) ** 2)


def phase_map(sl: ComplexSlice) -> np.ndarray:
    """Complex angle in (-pi, pi], reoriented; angle of 0 is 0."""
    return _orient(np.angle(sl.values))


def softmax_normalize(m: np.ndarray) -> np.ndarray:
    """Exponential rescaling exp((x - max) / std(x)) into (0, 1].

    Constant input maps to all ones. Monotone, so the argmax is preserved.
    """
    m = np.asarray(m, dtype=np.float64)
    mx = np.max(m)
    spread = mx - np.min(m)
    if spread == 0.0:
        return np.ones_like(m)
    # work on the peak-to-peak-rescaled values; algebraically identical to
    # exp((m - max) / std(m)) but immune to variance underflow
    z = (m - mx) / spread
    return np.exp(z / np.std(z))


def transform_volume(vol: ThzVolume) -> ThzVolume:
    """Window + FFT + shift once; reuse across per-frame extraction."""
    return forward_transform(apply_window(vol, hamming_window(vol.nf)))


def frame_spectra_from_transformed(transformed: ThzVolume, d: int) -> FrameSpectra:
    sl = extract_slice(transformed, d)
    return FrameSpectra(
        frame_index=d,
        intensity=softmax_normalize(intensity_map(sl)),
        phase=phase_map(sl),
    )


def frame_spectra(vol: ThzVolume, d: int) -> FrameSpectra:
    """Full per-frame chain: window, FFT, shift, slice, normalize."""
    if vol.domain != Domain.RAW:
        raise WrongDomain("frame_spectra expects a RAW volume")
    if not 0 <= d < vol.nf:
        raise DepthOutOfRange(f"depth {d} outside [0, {vol.nf})")
    return frame_spectra_from_transformed(transform_volume(vol), d)
