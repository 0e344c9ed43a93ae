"""Portable binary container for complex THz volumes (THZV format).

Layout (little-endian): 4-byte magic ``THZV``, u32 version, u32 nf, u32 nx,
u32 ny, u8 domain tag (0=RAW, 1=SPECTRA), 3 zero pad bytes, f64 lateral step
in mm (0.0 = absent), then nf*nx*ny interleaved (f32 re, f32 im) records in
frame-major order.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace

import numpy as np

MAGIC = b"THZV"
VERSION = 1
HEADER_SIZE = 32
_HEADER_FMT = "<4sIIIIB3xd"

DEFAULT_LATERAL_STEP_MM = 0.2625


class VolumeIoError(Exception):
    """Base for THZV container failures."""


class BadMagic(VolumeIoError):
    pass


class UnsupportedVersion(VolumeIoError):
    pass


class TruncatedPayload(VolumeIoError):
    pass


class NonFiniteData(VolumeIoError):
    pass


class IoFailure(VolumeIoError):
    pass


class Domain(enum.IntEnum):
    RAW = 0
    SPECTRA = 1


@dataclass(frozen=True)
class VolumeHeader:
    nf: int
    nx: int
    ny: int
    domain: Domain = Domain.RAW
    lateral_step_mm: float | None = DEFAULT_LATERAL_STEP_MM
    label: str = ""

    def __post_init__(self):
        if self.nf < 1 or self.nx < 1 or self.ny < 1:
            raise ValueError(f"dimensions must be >= 1, got {self.nf}x{self.nx}x{self.ny}")
        if self.lateral_step_mm is not None and self.lateral_step_mm <= 0:
            raise ValueError("lateral_step_mm must be > 0 when present")


@dataclass(frozen=True)
class ThzVolume:
    """Dense complex volume of shape (nf, nx, ny), frame-major."""

    header: VolumeHeader
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = self.header
        if self.data.shape != (h.nf, h.nx, h.ny):
            raise ValueError(f"data shape {self.data.shape} != header dims ({h.nf}, {h.nx}, {h.ny})")
        if self.data.dtype not in (np.complex64, np.complex128):
            object.__setattr__(self, "data", self.data.astype(np.complex128))
        self.data.setflags(write=False)

    @property
    def nf(self) -> int:
        return self.header.nf

    @property
    def nx(self) -> int:
        return self.header.nx

    @property
    def ny(self) -> int:
        return self.header.ny

    @property
    def domain(self) -> Domain:
        return self.header.domain

    def with_data(self, data: np.ndarray, domain: Domain | None = None) -> "ThzVolume":
        header = self.header if domain is None else replace(self.header, domain=domain)
        return ThzVolume(header, data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ThzVolume):
            return NotImplemented
        return self.header == other.header and np.array_equal(self.data, other.data)


def write_volume(vol: ThzVolume, path) -> None:
    """Serialize a volume; byte-deterministic for equal values.

    Refuses non-finite data before touching the file.
    """
    if not np.all(np.isfinite(vol.data)):
        raise NonFiniteData("volume contains NaN or Inf elements")
    h = vol.header
    step = 0.0 if h.lateral_step_mm is None else h.lateral_step_mm
    header = struct.pack(_HEADER_FMT, MAGIC, VERSION, h.nf, h.nx, h.ny, int(h.domain), step)
    payload = np.ascontiguousarray(vol.data, dtype=np.complex64)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_volume(path) -> ThzVolume:
    """Read and validate a THZV file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a THZV file")
    magic, version, nf, nx, ny, tag, step = struct.unpack_from(_HEADER_FMT, raw)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported")
    if nf < 1 or nx < 1 or ny < 1:
        raise TruncatedPayload(f"invalid dims {nf}x{nx}x{ny}")
    expected = HEADER_SIZE + 8 * nf * nx * ny
    if len(raw) != expected:
        raise TruncatedPayload(f"expected {expected} bytes, file has {len(raw)}")
    flat = np.frombuffer(raw, dtype=np.float32, offset=HEADER_SIZE)
    if not np.all(np.isfinite(flat)):
        raise NonFiniteData(f"{path}: payload contains NaN or Inf")
    data = flat.view(np.complex64).reshape(nf, nx, ny)
    header = VolumeHeader(
        nf=nf,
        nx=nx,
        ny=ny,
        domain=Domain(tag),
        lateral_step_mm=None if step == 0.0 else step,
    )
    return ThzVolume(header, data.copy())
