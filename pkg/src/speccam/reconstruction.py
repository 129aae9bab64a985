"""Apply a transformation matrix to pixels, images and ROI lists.

The per-pixel arithmetic is written out channel by channel,
``(w_r * r + w_g * g) + w_b * b``, in both the scalar and the image path so
the two agree bit for bit regardless of BLAS.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .calibration import TransformationMatrix
from .errors import DegenerateNormalizer, EmptyInput, GridMismatch, RoiOutOfBounds
from .spectral import (
    RgbImage,
    RgbTriple,
    Roi,
    SpectralCube,
    Spectrum,
    band_value,
    mean_spectra,
)


def reconstruct_pixel(tm: TransformationMatrix, rgb: RgbTriple) -> Spectrum:
    w = tm.w
    values = w[:, 0] * rgb.r + w[:, 1] * rgb.g
    values = values + w[:, 2] * rgb.b
    return Spectrum(tm.grid, values)


def _reconstruct_planes(w: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """(H, W, 3) pixels -> (bands, H, W) reflectance."""
    r = np.ascontiguousarray(pixels[..., 0])
    g = np.ascontiguousarray(pixels[..., 1])
    b = np.ascontiguousarray(pixels[..., 2])
    out = np.empty((w.shape[0],) + r.shape, dtype=np.float64)
    tmp = np.empty_like(r)
    for k in range(w.shape[0]):
        plane = out[k]
        np.multiply(r, w[k, 0], out=plane)
        np.multiply(g, w[k, 1], out=tmp)
        plane += tmp
        np.multiply(b, w[k, 2], out=tmp)
        plane += tmp
    return out


def reconstruct_image(tm: TransformationMatrix, image: RgbImage) -> SpectralCube:
    return SpectralCube(tm.grid, _reconstruct_planes(tm.w, image.pixels))


def reconstruct_roi(tm: TransformationMatrix, image: RgbImage, roi: Roi) -> SpectralCube:
    """Reconstruct only the pixels under ``roi``; identical to cropping the full cube."""
    _check_roi(roi, image.width, image.height)
    ys, xs = roi.slices()
    return SpectralCube(tm.grid, _reconstruct_planes(tm.w, image.pixels[ys, xs]))


def _check_roi(roi: Roi, width: int, height: int):
    if not roi.fits(width, height):
        raise RoiOutOfBounds(
            f"ROI x={roi.x} y={roi.y} side={roi.side} exceeds {width}x{height} image"
        )


def extract_roi_spectrum(cube: SpectralCube, roi: Roi) -> Spectrum:
    """Per-band mean over the ROI window."""
    _check_roi(roi, cube.width, cube.height)
    ys, xs = roi.slices()
    # contiguous copy: the reduction order must not depend on the cube's strides
    window = np.ascontiguousarray(cube.data[:, ys, xs])
    return Spectrum(cube.grid, window.mean(axis=(1, 2)))


Source = Union[RgbImage, SpectralCube]


@dataclass(frozen=True)
class Snapshot:
    source: Source
    rois: tuple[Roi, ...]

    def __post_init__(self):
        object.__setattr__(self, "rois", tuple(self.rois))


@dataclass(frozen=True)
class MeasurementSession:
    snapshots: tuple[Snapshot, ...]

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))


def _roi_spectrum(source: Source, roi: Roi, tm: TransformationMatrix | None) -> Spectrum:
    if isinstance(source, SpectralCube):
        if tm is not None and source.grid != tm.grid:
            raise GridMismatch("cube grid differs from the transformation matrix grid")
        return extract_roi_spectrum(source, roi)
    if tm is None:
        raise ValueError("an RGB snapshot needs a transformation matrix")
    return extract_roi_spectrum(reconstruct_roi(tm, source, roi), Roi(0, 0, roi.side))


def aggregate_session(
    session: MeasurementSession, tm: TransformationMatrix | None = None
) -> Spectrum:
    """Three-stage average: pixels -> ROI, ROIs -> snapshot, snapshots -> session.

    Each stage is a mean of means, so snapshots weigh equally whatever their
    ROI counts.
    """
    if not session.snapshots:
        raise EmptyInput("session has no snapshots")
    per_snapshot = []
    for i, snap in enumerate(session.snapshots):
        if not snap.rois:
            raise EmptyInput(f"snapshot {i} has no ROIs")
        per_snapshot.append(mean_spectra([_roi_spectrum(snap.source, r, tm) for r in snap.rois]))
    return mean_spectra(per_snapshot)


@dataclass(frozen=True)
class RoiQualityPolicy:
    max_mean_rgb: float = 240.0
    min_mean_rgb: float = 30.0
    max_saturated_fraction: float = 0.01

    def __post_init__(self):
        if not 0 <= self.min_mean_rgb < self.max_mean_rgb <= 255:
            raise ValueError("need 0 <= min_mean_rgb < max_mean_rgb <= 255")
        if not 0 <= self.max_saturated_fraction <= 1:
            raise ValueError("max_saturated_fraction must lie in [0, 1]")


class RoiVerdict(enum.Enum):
    ACCEPT = "accept"
    REJECT_HYPER_REFLECTION = "reject:hyper-reflection"
    REJECT_UNDER_ILLUMINATED = "reject:under-illuminated"
    REJECT_SATURATED = "reject:saturated"

    @property
    def accepted(self) -> bool:
        return self is RoiVerdict.ACCEPT


def check_roi_quality(
    image: RgbImage, roi: Roi, policy: RoiQualityPolicy = RoiQualityPolicy()
) -> RoiVerdict:
    """Assistive gate flagging glare, dark (pupil-like) or clipped ROIs."""
    _check_roi(roi, image.width, image.height)
    ys, xs = roi.slices()
    px = image.pixels[ys, xs].reshape(-1, 3)
    mean_peak = px.max(axis=1).mean()
    saturated = np.mean(np.any(px >= 255.0, axis=1))
    if mean_peak > policy.max_mean_rgb:
        return RoiVerdict.REJECT_HYPER_REFLECTION
    if mean_peak < policy.min_mean_rgb:
        return RoiVerdict.REJECT_UNDER_ILLUMINATED
    if saturated > policy.max_saturated_fraction:
        return RoiVerdict.REJECT_SATURATED
    return RoiVerdict.ACCEPT


def reflectance_reduction(s: Spectrum, reference: Spectrum, wavelength: float = 460.0) -> float:
    """Fractional drop of ``s`` below ``reference`` at one band.

    Both spectra are expected to be normalised at a non-absorbing band first.
    """
    ref = band_value(reference, wavelength)
    if not ref > 0:
        raise DegenerateNormalizer(f"reference reflectance at {wavelength} nm is {ref}")
    return (ref - band_value(s, wavelength)) / ref


def two_band_index(s: Spectrum, numerator_nm: float = 460.0, denominator_nm: float = 500.0) -> float:
    """Ratio of reflectance at 460 nm to 500 nm; drops as bilirubin absorbs."""
    den = band_value(s, denominator_nm)
    if not den > 0:
        raise DegenerateNormalizer(f"reflectance at {denominator_nm} nm is {den}")
    return band_value(s, numerator_nm) / den


def session_from_rois(source: Source, rois: Sequence[Roi]) -> MeasurementSession:
    return MeasurementSession((Snapshot(source, tuple(rois)),))
