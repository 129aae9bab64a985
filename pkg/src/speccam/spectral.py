"""Core value types: wavelength grids, spectra, RGB images and spectral cubes.

All containers are immutable. Array payloads are copied on construction and
marked read-only, so instances can be shared freely between threads.
Reflectance is kept as float64; values above 1 are legal (hyper-reflection).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BandNotFound, DegenerateNormalizer, EmptyInput, GridMismatch

DEFAULT_FIRST_NM = 420.0
DEFAULT_LAST_NM = 680.0
DEFAULT_STEP_NM = 10.0


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class WavelengthGrid:
    """Ordered band centres in nm."""

    bands: tuple[float, ...]

    def __post_init__(self):
        bands = tuple(float(b) for b in self.bands)
        if len(bands) == 0:
            raise EmptyInput("wavelength grid needs at least one band")
        if any(b2 <= b1 for b1, b2 in zip(bands, bands[1:])):
            raise ValueError("wavelength bands must be strictly increasing")
        object.__setattr__(self, "bands", bands)

    def __len__(self) -> int:
        return len(self.bands)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bands, dtype=np.float64)

    def index_of(self, wavelength: float) -> int:
        """Index of an exact band; raises BandNotFound when off-grid."""
        try:
            return self.bands.index(float(wavelength))
        except ValueError:
            raise BandNotFound(f"{wavelength} nm is not a band of this grid") from None

    def nearest_index(self, wavelength: float, tolerance: float = 5.0) -> int:
        """Nearest band to ``wavelength``; a tie at half-step goes to the lower band."""
        lo, hi = self.bands[0] - tolerance, self.bands[-1] + tolerance
        if not lo <= wavelength <= hi:
            raise BandNotFound(f"{wavelength} nm outside [{lo}, {hi}]")
        dist = np.abs(self.as_array() - wavelength)
        # argmin returns the first minimum, i.e. the lower wavelength on a tie
        return int(np.argmin(dist))


_DEFAULT_GRID = WavelengthGrid(
    tuple(DEFAULT_FIRST_NM + DEFAULT_STEP_NM * i for i in range(27))
)


def default_grid() -> WavelengthGrid:
    """The 27-band grid 420, 430, ..., 680 nm."""
    return _DEFAULT_GRID


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: WavelengthGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (len(self.grid),):
            raise GridMismatch(
                f"spectrum has {values.size} values for a {len(self.grid)}-band grid"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum values must be finite")
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, wavelength: float) -> float:
        return float(self.values[self.grid.index_of(wavelength)])

    @classmethod
    def constant(cls, value: float, grid: WavelengthGrid | None = None) -> "Spectrum":
        grid = grid or default_grid()
        return cls(grid, np.full(len(grid), float(value)))

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.grid, self.values * factor)


@dataclass(frozen=True)
class RgbTriple:
    r: float
    g: float
    b: float

    def __post_init__(self):
        for name in ("r", "g", "b"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"channel {name}={v} must be finite and >= 0")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "RgbTriple":
        r, g, b = (float(x) for x in a)
        return cls(r, g, b)


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Row-major RGB image; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = _frozen(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected (height, width, 3) pixels, got {px.shape}")
        if not np.all(np.isfinite(px)) or np.any(px < 0):
            raise ValueError("pixel values must be finite and >= 0")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def pixel(self, x: int, y: int) -> RgbTriple:
        return RgbTriple.from_array(self.pixels[y, x])

    @classmethod
    def filled(cls, width: int, height: int, rgb: RgbTriple) -> "RgbImage":
        return cls(np.broadcast_to(rgb.as_array(), (height, width, 3)))


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Band-sequential cube; ``data`` has shape (bands, height, width)."""

    grid: WavelengthGrid
    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3 or data.shape[0] != len(self.grid):
            raise GridMismatch(
                f"cube data shape {data.shape} does not match {len(self.grid)} bands"
            )
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("cube must be at least 1x1 pixels")
        if not np.all(np.isfinite(data)):
            raise ValueError("cube values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, SpectralCube):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.data, other.data)

    def pixel(self, x: int, y: int) -> Spectrum:
        return Spectrum(self.grid, self.data[:, y, x])


@dataclass(frozen=True)
class Roi:
    """Square window with top-left corner (x, y)."""

    x: int
    y: int
    side: int = 100

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("ROI side must be >= 1")
        if self.x < 0 or self.y < 0:
            raise ValueError("ROI origin must be non-negative")

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.side <= width and self.y + self.side <= height

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.side), slice(self.x, self.x + self.side)


def mean_spectra(spectra: Sequence[Spectrum]) -> Spectrum:
    """Per-band arithmetic mean of spectra sharing one grid."""
    if len(spectra) == 0:
        raise EmptyInput("cannot average an empty list of spectra")
    grid = spectra[0].grid
    for s in spectra[1:]:
        if s.grid != grid:
            raise GridMismatch("spectra are on different wavelength grids")
    stacked = np.stack([s.values for s in spectra])
    return Spectrum(grid, stacked.mean(axis=0))


def normalize_at(s: Spectrum, wavelength: float) -> Spectrum:
    """Divide every band by the value at ``wavelength`` (must be an exact band)."""
    idx = s.grid.index_of(wavelength)
    ref = s.values[idx]
    if not ref > 0:
        raise DegenerateNormalizer(f"reflectance at {wavelength} nm is {ref}")
    out = s.values / ref
    out[idx] = 1.0
    return Spectrum(s.grid, out)


def band_value(s: Spectrum, wavelength: float) -> float:
    """Value at the grid band nearest to ``wavelength`` (ties to the lower band)."""
    return float(s.values[s.grid.nearest_index(wavelength)])

