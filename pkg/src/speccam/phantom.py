"""Synthetic ground truth: chromophores, phantom reflectance, a camera model
and seeded dataset fabrication.

Absorption curves are smooth stand-ins with the right topology (bilirubin
peaks at 460 nm and vanishes above 650 nm; hemoglobin has the 540/576 nm
double peak). Reflectance follows Beer-Lambert attenuation of a scattering
background.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calibration import (
    ChartSamples,
    ColorChart,
    TransformationMatrix,
    chart_from_arrays,
    wiener_matrix,
)
from .errors import BadRange, BandNotFound
from .seeding import rng_for
from .spectral import RgbImage, RgbTriple, Spectrum, WavelengthGrid, default_grid

UMOL_PER_MG_DL = 17.1

# Chosen so 30 mg/dL leaves R(460)/background(460) = 0.6; stronger absorption
# bends the 460 nm reduction-vs-concentration series away from a line.
BILIRUBIN_K = float(np.log(1 / 0.6) / 30.0)
HEMOGLOBIN_K = 0.5

PHANTOM_SERIES_MG_DL = (0.00, 0.23, 0.47, 0.94, 1.88, 3.75, 7.50, 15.00, 30.00)


def _gauss(wl, centre, sigma):
    return np.exp(-0.5 * ((np.asarray(wl, dtype=np.float64) - centre) / sigma) ** 2)


def _check_range(wl):
    a = np.asarray(wl, dtype=np.float64)
    if np.any(a < 400) or np.any(a > 700):
        raise BandNotFound(f"extinction defined on [400, 700] nm only, got {wl}")
    return a


def bilirubin_extinction(wl):
    """Unit-height Gaussian at 460 nm, sigma 35 nm."""
    out = _gauss(_check_range(wl), 460.0, 35.0)
    return float(out) if np.ndim(out) == 0 else out


def hemoglobin_extinction(wl):
    """Two Gaussians at 540 nm (height 1.0) and 576 nm (height 0.8), sigma 15 nm."""
    a = _check_range(wl)
    out = _gauss(a, 540.0, 15.0) + 0.8 * _gauss(a, 576.0, 15.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ChromophoreModel:
    name: str
    extinction: Callable
    scale: float

    def absorbance(self, grid: WavelengthGrid) -> np.ndarray:
        return self.scale * np.asarray(self.extinction(grid.as_array()))


BILIRUBIN = ChromophoreModel("bilirubin", bilirubin_extinction, BILIRUBIN_K)
HEMOGLOBIN = ChromophoreModel("hemoglobin", hemoglobin_extinction, HEMOGLOBIN_K)


def flat_background(level: float = 0.9, grid: WavelengthGrid | None = None) -> Spectrum:
    return Spectrum.constant(level, grid)


@dataclass(frozen=True)
class PhantomSpec:
    """Bilirubin in mg/dL, hemoglobin in arbitrary units."""

    bilirubin_mg_dl: float = 0.0
    hemoglobin: float = 0.0
    pathlength: float = 1.0
    background: Spectrum = field(default_factory=flat_background)

    def __post_init__(self):
        if self.bilirubin_mg_dl < 0 or self.hemoglobin < 0:
            raise ValueError("concentrations must be >= 0")
        if self.pathlength <= 0:
            raise ValueError("pathlength must be > 0")
        bg = self.background.values
        if np.any(bg <= 0) or np.any(bg > 1.5):
            raise ValueError("background reflectance must lie in (0, 1.5]")

    @property
    def bbl_umol_l(self) -> float:
        return self.bilirubin_mg_dl * UMOL_PER_MG_DL

    @classmethod
    def from_bbl(cls, bbl_umol_l: float, **kw) -> "PhantomSpec":
        return cls(bilirubin_mg_dl=bbl_umol_l / UMOL_PER_MG_DL, **kw)


def phantom_reflectance(spec: PhantomSpec) -> Spectrum:
    grid = spec.background.grid
    optical_depth = (
        BILIRUBIN.absorbance(grid) * spec.bilirubin_mg_dl
        + HEMOGLOBIN.absorbance(grid) * spec.hemoglobin
    ) * spec.pathlength
    return Spectrum(grid, spec.background.values * np.exp(-optical_depth))


# -- camera -----------------------------------------------------------------

DEFAULT_SENSITIVITY_CENTRES = (600.0, 540.0, 465.0)
DEFAULT_SENSITIVITY_SIGMAS = (45.0, 45.0, 40.0)
FLAT_WHITE_LEVEL = 200.0


def _sensitivity_matrix(centres, sigmas, grid: WavelengthGrid) -> np.ndarray:
    wl = grid.as_array()
    return np.stack([_gauss(wl, c, s) for c, s in zip(centres, sigmas)])


def _response_scale() -> float:
    # fixed from the default curves: a flat unit spectrum at gain 1 reads 200
    grid = default_grid()
    sens = _sensitivity_matrix(DEFAULT_SENSITIVITY_CENTRES, DEFAULT_SENSITIVITY_SIGMAS, grid)
    step = grid.bands[1] - grid.bands[0]
    return FLAT_WHITE_LEVEL / float((sens.sum(axis=1) * step).max())


RESPONSE_SCALE = _response_scale()


@dataclass(frozen=True)
class CameraModel:
    """Three overlapping Gaussian channels under a relative illuminant.

    ``illuminant`` is either None (flat, power 1) or a callable returning
    relative power at given wavelengths.
    """

    sensitivity_centres: tuple[float, float, float] = DEFAULT_SENSITIVITY_CENTRES
    sensitivity_sigmas: tuple[float, float, float] = DEFAULT_SENSITIVITY_SIGMAS
    illuminant: Callable | None = None
    gain: float = 1.0
    noise_sigma: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("gain must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def with_(self, **changes) -> "CameraModel":
        from dataclasses import replace

        return replace(self, **changes)

    def response_matrix(self, grid: WavelengthGrid | None = None) -> np.ndarray:
        """(3, bands) linear map from reflectance to noiseless RGB at this gain."""
        grid = grid or default_grid()
        sens = _sensitivity_matrix(self.sensitivity_centres, self.sensitivity_sigmas, grid)
        if self.illuminant is not None:
            power = np.asarray(self.illuminant(grid.as_array()), dtype=np.float64)
            if np.any(power < 0) or not np.all(np.isfinite(power)):
                raise ValueError("illuminant power must be finite and >= 0")
            sens = sens * power
        step = grid.bands[1] - grid.bands[0] if len(grid) > 1 else 1.0
        return self.gain * RESPONSE_SCALE * step * sens


def render_linear(camera: CameraModel, spectra: np.ndarray, grid=None) -> np.ndarray:
    """Noiseless, unclamped RGB for (..., bands) reflectance."""
    return np.asarray(spectra, dtype=np.float64) @ camera.response_matrix(grid).T


def _add_noise_and_clamp(rgb, sigma, rng):
    if sigma > 0:
        rgb = rgb + rng.normal(0.0, sigma, size=np.shape(rgb))
    return np.clip(rgb, 0.0, 255.0)


def render_rgb(
    camera: CameraModel, s: Spectrum, rng: np.random.Generator | None = None
) -> RgbTriple:
    """Integrate a spectrum through the camera; add noise, clamp to [0, 255]."""
    if rng is None:
        rng = rng_for(camera.seed, "render")
    rgb = render_linear(camera, s.values, s.grid)
    return RgbTriple.from_array(_add_noise_and_clamp(rgb, camera.noise_sigma, rng))


# -- datasets ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """Columnar records: ``rgb`` (n, 3), ``spectra`` (n, bands), ``bbl`` (n,)."""

    ids: np.ndarray
    rgb: np.ndarray
    spectra: np.ndarray
    bbl: np.ndarray
    grid: WavelengthGrid = field(default_factory=default_grid)
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        rgb = np.asarray(self.rgb, dtype=np.float64).reshape(-1, 3)
        spectra = np.asarray(self.spectra, dtype=np.float64).reshape(-1, len(self.grid))
        bbl = np.asarray(self.bbl, dtype=np.float64).reshape(-1)
        n = len(ids)
        if not (len(rgb) == len(spectra) == len(bbl) == n):
            raise ValueError("dataset columns differ in length")
        if np.any(bbl < 0):
            raise ValueError("bbl must be >= 0")
        for a in (ids, rgb, spectra, bbl):
            a.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "bbl", bbl)

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, rows) -> "SyntheticDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return SyntheticDataset(
            self.ids[rows], self.rgb[rows], self.spectra[rows], self.bbl[rows],
            self.grid, self.seed, dict(self.provenance),
        )

    def records(self):
        for i in range(len(self)):
            yield (
                int(self.ids[i]),
                RgbTriple.from_array(self.rgb[i]),
                Spectrum(self.grid, self.spectra[i]),
                float(self.bbl[i]),
            )

    def same_as(self, other: "SyntheticDataset") -> bool:
        return (
            self.grid == other.grid
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.rgb, other.rgb)
            and np.array_equal(self.spectra, other.spectra)
            and np.array_equal(self.bbl, other.bbl)
        )


@dataclass(frozen=True)
class NuisanceOptions:
    """Per-record variation that is not bilirubin."""

    hemoglobin_range: tuple[float, float] = (0.2, 1.0)
    background_level: float = 0.9
    background_scale_range: tuple[float, float] = (0.95, 1.05)
    background_slope_range: tuple[float, float] = (-0.04, 0.04)


DEFAULT_BBL_RANGE = (2.0, 450.0)


def _background(level, scale, slope, grid):
    wl = grid.as_array()
    return Spectrum(grid, level * scale * (1.0 + slope * (wl - 550.0) / 130.0))


def generate_dataset(
    n: int,
    bbl_range: tuple[float, float] = DEFAULT_BBL_RANGE,
    camera: CameraModel | None = None,
    nuisance: NuisanceOptions = NuisanceOptions(),
    seed: int = 42,
    log_uniform: bool = True,
) -> SyntheticDataset:
    """Fabricate ``n`` (rgb, true spectrum, bbl) records.

    Each record draws from its own generator keyed by (seed, record index),
    so records do not depend on generation order.
    """
    if n < 1:
        raise BadRange("n must be >= 1")
    lo, hi = (float(x) for x in bbl_range)
    if not (0 <= lo <= hi) or not np.isfinite(hi):
        raise BadRange(f"invalid bbl range {bbl_range}")
    if log_uniform and lo == 0 and hi > 0:
        raise BadRange("log-uniform sampling needs a strictly positive lower bound")
    camera = camera or CameraModel()
    grid = default_grid()
    h_lo, h_hi = nuisance.hemoglobin_range
    s_lo, s_hi = nuisance.background_scale_range
    k_lo, k_hi = nuisance.background_slope_range

    ids = np.arange(n)
    rgb = np.empty((n, 3))
    spectra = np.empty((n, len(grid)))
    bbl = np.empty(n)
    response = camera.response_matrix(grid)
    for i in range(n):
        rng = rng_for(seed, f"record:{i}")
        u = rng.random()
        if lo == hi:
            value = lo
        elif log_uniform:
            value = float(np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo))))
        else:
            value = lo + u * (hi - lo)
        background = _background(
            nuisance.background_level,
            rng.uniform(s_lo, s_hi),
            rng.uniform(k_lo, k_hi),
            grid,
        )
        spec = PhantomSpec.from_bbl(
            value, hemoglobin=rng.uniform(h_lo, h_hi), background=background
        )
        s = phantom_reflectance(spec)
        spectra[i] = s.values
        rgb[i] = _add_noise_and_clamp(response @ s.values, camera.noise_sigma, rng)
        bbl[i] = value
    provenance = {
        "generator": "phantom",
        "n": n,
        "seed": seed,
        "bbl_range": [lo, hi],
        "log_uniform": log_uniform,
        "noise_sigma": camera.noise_sigma,
        "gain": camera.gain,
        "hemoglobin_range": list(nuisance.hemoglobin_range),
        "background_scale_range": list(nuisance.background_scale_range),
        "background_slope_range": list(nuisance.background_slope_range),
    }
    return SyntheticDataset(ids, rgb, spectra, bbl, grid, seed, provenance)


def phantom_calibration(
    camera: CameraModel | None = None, n: int = 100, seed: int = 0
) -> TransformationMatrix:
    """Wiener matrix fitted on noiseless renders of a phantom family.

    The training phantoms come from :func:`generate_dataset` with the camera's
    noise switched off, so the matrix encodes the phantom prior rather than a
    colour chart.
    """
    camera = (camera or CameraModel()).with_(noise_sigma=0.0)
    train = generate_dataset(n, camera=camera, seed=seed)
    return TransformationMatrix(train.grid, wiener_matrix(train.rgb.T, train.spectra.T))


# -- colour charts ----------------------------------------------------------

def synthetic_chart(n_blocks: int = 24, seed: int = 0, name: str | None = None) -> ColorChart:
    """Smooth reflectance spectra for a 24- or 96-block chart.

    Blocks mix a grey level with broad sigmoid edges and bumps, the shapes
    typical of pigment reflectances, clipped to [0.03, 0.95].
    """
    grid = default_grid()
    wl = grid.as_array()
    rng = rng_for(seed, f"chart:{n_blocks}")
    out = np.empty((n_blocks, len(grid)))
    for i in range(n_blocks):
        base = rng.uniform(0.05, 0.5)
        edge = rng.uniform(-0.45, 0.45) / (1 + np.exp(-(wl - rng.uniform(470, 640)) / rng.uniform(15, 35)))
        bump = rng.uniform(-0.25, 0.35) * _gauss(wl, rng.uniform(430, 670), rng.uniform(30, 70))
        out[i] = np.clip(base + edge + bump, 0.03, 0.95)
    ids = [f"B{i + 1:02d}" for i in range(n_blocks)]
    return chart_from_arrays(name or f"synthetic-{n_blocks}-s{seed}", ids, out, grid)


def generate_chart_scene(
    chart: ColorChart,
    camera: CameraModel,
    cell_px: int = 24,
    rng: np.random.Generator | None = None,
) -> tuple[RgbImage, ChartSamples]:
    """Render a chart as a rows x cols mosaic of flat cells.

    Returns the noisy image and the noiseless per-block RGB used to paint it.
    """
    layout = chart.layout
    if rng is None:
        rng = rng_for(camera.seed, "chart-scene")
    truth = np.clip(render_linear(camera, chart.reflectance_matrix().T, chart.grid), 0, 255)
    cells = truth.reshape(layout.rows, layout.cols, 3)
    img = np.repeat(np.repeat(cells, cell_px, axis=0), cell_px, axis=1)
    img = _add_noise_and_clamp(img, camera.noise_sigma, rng)
    samples = ChartSamples(chart.name, chart.block_ids, tuple(RgbTriple.from_array(t) for t in truth))
    return RgbImage(img), samples
