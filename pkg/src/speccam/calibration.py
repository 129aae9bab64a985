"""Colour-chart camera characterisation.

The transformation matrix maps a raw RGB response (0-255 scale) to a
reflectance spectrum. It is the linear minimum-mean-square estimator built
from chart blocks whose reference spectra are known::

    W = <s v^T> (<v v^T> + eps I)^-1

where ``<.>`` is the plain average over blocks (a raw second moment, no mean
subtraction) and ``eps`` is a tiny ridge relative to ``trace(<v v^T>) / 3``.
"""
from __future__ import annotations

import datetime as _dt
import enum
import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ChartMismatch,
    LayoutTooFine,
    ProfileCorrupt,
    ProfileNotFound,
    SingularCalibration,
)
from .spectral import RgbImage, RgbTriple, Spectrum, WavelengthGrid, default_grid

DEFAULT_RIDGE = 1e-8
MAX_CONDITION = 1e12
SATURATION_LEVEL = 255.0
UNDEREXPOSURE_LEVEL = 100.0


@dataclass(frozen=True)
class ChartLayout:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("layout needs at least one row and column")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @classmethod
    def parse(cls, text: str) -> "ChartLayout":
        """Parse ``"6x4"`` as rows x cols."""
        m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"layout must look like ROWSxCOLS, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def for_blocks(cls, n_blocks: int) -> "ChartLayout":
        if n_blocks == 24:
            return cls(6, 4)
        if n_blocks == 96:
            return cls(12, 8)
        raise ChartMismatch(f"no standard layout for {n_blocks} blocks")

    def __str__(self):
        return f"{self.rows}x{self.cols}"


@dataclass(frozen=True)
class ColorChart:
    name: str
    block_ids: tuple[str, ...]
    references: tuple[Spectrum, ...]

    def __post_init__(self):
        ids = tuple(str(b) for b in self.block_ids)
        refs = tuple(self.references)
        if len(ids) != len(refs):
            raise ChartMismatch("block ids and reference spectra differ in length")
        if len(ids) not in (24, 96):
            raise ChartMismatch(f"a chart has 24 or 96 blocks, not {len(ids)}")
        if len(set(ids)) != len(ids):
            raise ChartMismatch("duplicate block ids")
        grid = refs[0].grid
        if any(r.grid != grid for r in refs):
            raise ChartMismatch("reference spectra are on different grids")
        object.__setattr__(self, "block_ids", ids)
        object.__setattr__(self, "references", refs)

    def __len__(self) -> int:
        return len(self.block_ids)

    @property
    def grid(self) -> WavelengthGrid:
        return self.references[0].grid

    @property
    def layout(self) -> ChartLayout:
        return ChartLayout.for_blocks(len(self))

    def reflectance_matrix(self) -> np.ndarray:
        """Reference spectra stacked as (bands, blocks)."""
        return np.stack([r.values for r in self.references], axis=1)


@dataclass(frozen=True)
class ChartSamples:
    chart_name: str
    block_ids: tuple[str, ...]
    rgb: tuple[RgbTriple, ...]

    def __post_init__(self):
        ids = tuple(str(b) for b in self.block_ids)
        rgb = tuple(self.rgb)
        if len(ids) != len(rgb):
            raise ChartMismatch("block ids and RGB samples differ in length")
        object.__setattr__(self, "block_ids", ids)
        object.__setattr__(self, "rgb", rgb)

    def __len__(self) -> int:
        return len(self.block_ids)

    def response_matrix(self) -> np.ndarray:
        """RGB responses stacked as (3, blocks)."""
        return np.stack([t.as_array() for t in self.rgb], axis=1)

    def scaled(self, gain: float) -> "ChartSamples":
        return ChartSamples(
            self.chart_name,
            self.block_ids,
            tuple(RgbTriple.from_array(t.as_array() * gain) for t in self.rgb),
        )


@dataclass(frozen=True, eq=False)
class TransformationMatrix:
    grid: WavelengthGrid
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.shape != (len(self.grid), 3):
            raise ValueError(f"matrix shape {w.shape} != ({len(self.grid)}, 3)")
        if not np.all(np.isfinite(w)):
            raise ValueError("transformation matrix has non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    def __eq__(self, other):
        if not isinstance(other, TransformationMatrix):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.w, other.w)


@dataclass(frozen=True)
class DeviceProfile:
    device_model: str
    illuminant: str
    chart_name: str
    tm: TransformationMatrix
    created_at: _dt.datetime


class Exposure(enum.Enum):
    OK = "ok"
    OVEREXPOSED = "overexposed"
    UNDEREXPOSED = "underexposed"


def validate_exposure(samples: ChartSamples) -> list[tuple[str, Exposure]]:
    """Per-block exposure verdict from the brightest channel.

    A channel at 255 is treated as saturated (clipped), so overexposure
    triggers at ``max >= 255``; underexposure at ``max < 100``.
    """
    out = []
    for block_id, rgb in zip(samples.block_ids, samples.rgb):
        peak = max(rgb.r, rgb.g, rgb.b)
        if peak >= SATURATION_LEVEL:
            verdict = Exposure.OVEREXPOSED
        elif peak < UNDEREXPOSURE_LEVEL:
            verdict = Exposure.UNDEREXPOSED
        else:
            verdict = Exposure.OK
        out.append((block_id, verdict))
    return out


def _inverse_3x3(m: np.ndarray) -> np.ndarray:
    """Adjugate inverse of a 3x3 matrix."""
    a, b, c = m[0]
    d, e, f = m[1]
    g, h, i = m[2]
    cof = np.array(
        [
            [e * i - f * h, -(d * i - f * g), d * h - e * g],
            [-(b * i - c * h), a * i - c * g, -(a * h - b * g)],
            [b * f - c * e, -(a * f - c * d), a * e - b * d],
        ]
    )
    det = a * cof[0, 0] + b * cof[0, 1] + c * cof[0, 2]
    if not np.isfinite(det) or det == 0.0:
        raise SingularCalibration("response moment matrix is singular")
    return cof.T / det


def wiener_tm(
    samples: ChartSamples, chart: ColorChart, ridge: float = DEFAULT_RIDGE
) -> TransformationMatrix:
    """Wiener transformation matrix from chart samples and reference spectra.

    Parameters
    ----------
    samples : ChartSamples
        Averaged RGB per block, same block ids and order as ``chart``.
    chart : ColorChart
        Reference reflectance per block.
    ridge : float
        Relative ridge; ``eps = ridge * trace(<v v^T>) / 3``. Pass 0 for the
        unregularised estimator.
    """
    if samples.block_ids != chart.block_ids:
        if len(samples) != len(chart):
            raise ChartMismatch(
                f"{len(samples)} samples for a {len(chart)}-block chart"
            )
        raise ChartMismatch("sample block ids do not match the chart")
    w = wiener_matrix(samples.response_matrix(), chart.reflectance_matrix(), ridge)
    return TransformationMatrix(chart.grid, w)


def wiener_matrix(v: np.ndarray, s: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """``<s v^T> (<v v^T> + eps I)^-1`` for responses ``v`` (3, N) and spectra ``s`` (bands, N)."""
    v = np.asarray(v, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if v.shape[0] != 3 or s.shape[1] != v.shape[1]:
        raise ChartMismatch(f"responses {v.shape} and spectra {s.shape} disagree")
    n = v.shape[1]
    if n < 3:
        raise SingularCalibration("need at least 3 blocks")
    cross = s @ v.T / n
    moment = v @ v.T / n
    eps = ridge * np.trace(moment) / 3.0
    regularized = moment + eps * np.eye(3)
    eig = np.linalg.eigvalsh(regularized)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_CONDITION:
        raise SingularCalibration(
            f"response moment matrix condition number too large ({eig[-1]:.3g}/{eig[0]:.3g})"
        )
    return cross @ _inverse_3x3(regularized)


def sample_chart(
    image: RgbImage,
    layout: ChartLayout,
    margin_fraction: float = 0.25,
    chart: ColorChart | None = None,
    chart_name: str = "chart",
) -> ChartSamples:
    """Average the central part of each cell of a rows x cols chart photo.

    Cells are read row-major from the top-left. Only the central
    ``1 - 2 * margin_fraction`` of every cell (in each direction) is averaged.
    """
    if not 0 <= margin_fraction < 0.5:
        raise ValueError("margin_fraction must lie in [0, 0.5)")
    cell_h = image.height / layout.rows
    cell_w = image.width / layout.cols
    px = image.pixels
    triples = []
    for row in range(layout.rows):
        top = row * cell_h
        y0 = int(np.ceil(top + margin_fraction * cell_h - 1e-9))
        y1 = int(np.floor(top + (1 - margin_fraction) * cell_h + 1e-9))
        for col in range(layout.cols):
            left = col * cell_w
            x0 = int(np.ceil(left + margin_fraction * cell_w - 1e-9))
            x1 = int(np.floor(left + (1 - margin_fraction) * cell_w + 1e-9))
            if y1 - y0 < 4 or x1 - x0 < 4:
                raise LayoutTooFine(
                    f"sampling box {x1 - x0}x{y1 - y0} px is below 4x4 for layout {layout}"
                )
            triples.append(RgbTriple.from_array(px[y0:y1, x0:x1].mean(axis=(0, 1))))
    if chart is not None:
        if len(chart) != layout.size:
            raise ChartMismatch(f"layout {layout} does not fit a {len(chart)}-block chart")
        ids, name = chart.block_ids, chart.name
    else:
        ids, name = tuple(str(i + 1) for i in range(layout.size)), chart_name
    return ChartSamples(name, ids, tuple(triples))


# -- profile store ---------------------------------------------------------

PROFILE_SUFFIX = ".profile.json"


def profile_path(device_model: str, store_dir) -> Path:
    if not device_model or "/" in device_model or "\\" in device_model:
        raise ValueError(f"invalid device model name {device_model!r}")
    return Path(store_dir) / f"{device_model}{PROFILE_SUFFIX}"


def profile_to_dict(profile: DeviceProfile) -> dict:
    return {
        "device_model": profile.device_model,
        "illuminant": profile.illuminant,
        "chart_name": profile.chart_name,
        "wavelengths": list(profile.tm.grid.bands),
        "matrix": profile.tm.w.tolist(),
        "created_at": profile.created_at.isoformat(),
    }


def profile_from_dict(d: dict) -> DeviceProfile:
    try:
        grid = WavelengthGrid(tuple(float(x) for x in d["wavelengths"]))
        tm = TransformationMatrix(grid, np.array(d["matrix"], dtype=np.float64))
        return DeviceProfile(
            device_model=str(d["device_model"]),
            illuminant=str(d["illuminant"]),
            chart_name=str(d["chart_name"]),
            tm=tm,
            created_at=_dt.datetime.fromisoformat(d["created_at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProfileCorrupt(f"malformed device profile: {exc}") from exc


def write_profile_file(profile: DeviceProfile, path) -> Path:
    """Atomically write a profile as JSON (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(profile_to_dict(profile), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_profile_file(path) -> DeviceProfile:
    path = Path(path)
    if not path.exists():
        raise ProfileNotFound(f"no profile at {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProfileCorrupt(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ProfileCorrupt(f"{path}: top level is not an object")
    return profile_from_dict(d)


def save_profile(profile: DeviceProfile, store_dir) -> Path:
    return write_profile_file(profile, profile_path(profile.device_model, store_dir))


def load_profile(device_model: str, store_dir) -> DeviceProfile:
    path = profile_path(device_model, store_dir)
    if not path.exists():
        raise ProfileNotFound(f"no profile for device {device_model!r} in {store_dir}")
    return read_profile_file(path)


def make_profile(
    device_model: str,
    tm: TransformationMatrix,
    chart_name: str,
    illuminant: str = "flashlight",
    created_at: _dt.datetime | None = None,
) -> DeviceProfile:
    if created_at is None:
        created_at = _dt.datetime.now(_dt.timezone.utc)
    return DeviceProfile(device_model, illuminant, chart_name, tm, created_at)


def chart_from_arrays(
    name: str, block_ids: Sequence[str], reflectance: np.ndarray, grid=None
) -> ColorChart:
    """Build a chart from a (blocks, bands) reflectance array."""
    grid = grid or default_grid()
    return ColorChart(name, tuple(block_ids), tuple(Spectrum(grid, r) for r in reflectance))
