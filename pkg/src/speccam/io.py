"""File formats: PPM images, chart CSV, MSC1 cubes, ROI lists, dataset CSV.

Readers raise ``FormatError`` for content that parses but violates the
format, and let ``OSError`` through for filesystem problems.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .calibration import ColorChart, chart_from_arrays
from .errors import FormatError
from .phantom import SyntheticDataset
from .spectral import RgbImage, Roi, SpectralCube, WavelengthGrid

CUBE_MAGIC = b"MSC1"


def _fmt(x: float) -> str:
    # shortest repr round-trips float64 exactly
    return repr(float(x))


# -- PPM ----------------------------------------------------------------------

def _ppm_tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just past the last one."""
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_ppm(path) -> RgbImage:
    data = Path(path).read_bytes()
    if data[:2] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (P6)")
    try:
        (w, h, maxval), offset = _ppm_tokens(data, 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM is supported (maxval {maxval})")
    payload = data[offset : offset + w * h * 3]
    if len(payload) != w * h * 3:
        raise FormatError(f"{path}: expected {w * h * 3} pixel bytes, got {len(payload)}")
    px = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return RgbImage(px.astype(np.float64))


def write_ppm(image: RgbImage, path) -> None:
    px = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    Path(path).write_bytes(header + px.tobytes())


# -- colour chart CSV ---------------------------------------------------------

def _band_header(grid: WavelengthGrid) -> list[str]:
    return [f"{b:g}" for b in grid.bands]


def write_chart_csv(chart: ColorChart, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block_id"] + _band_header(chart.grid))
        for bid, ref in zip(chart.block_ids, chart.references):
            w.writerow([bid] + [_fmt(v) for v in ref.values])


def read_chart_csv(path, name: str | None = None) -> ColorChart:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "block_id":
        raise FormatError(f"{path}: header must start with block_id")
    try:
        grid = WavelengthGrid(tuple(float(x) for x in rows[0][1:]))
        ids = [r[0].strip() for r in rows[1:] if r]
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:] if r])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if values.ndim != 2 or values.shape[1] != len(grid):
        raise FormatError(f"{path}: rows must have {len(grid)} reflectance values")
    return chart_from_arrays(name or Path(path).stem, ids, values, grid)


# -- MSC1 cube ----------------------------------------------------------------

def cube_to_bytes(cube: SpectralCube) -> bytes:
    bands = len(cube.grid)
    head = CUBE_MAGIC + struct.pack("<III", cube.width, cube.height, bands)
    centres = np.asarray(cube.grid.bands, dtype="<f4").tobytes()
    data = np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    return head + centres + data


def cube_from_bytes(data: bytes) -> SpectralCube:
    if data[:4] != CUBE_MAGIC:
        raise FormatError("not an MSC1 cube")
    if len(data) < 16:
        raise FormatError("truncated MSC1 header")
    width, height, bands = struct.unpack("<III", data[4:16])
    expected = 16 + 4 * bands + 4 * bands * width * height
    if len(data) != expected:
        raise FormatError(f"MSC1 payload is {len(data)} bytes, header implies {expected}")
    centres = np.frombuffer(data, dtype="<f4", count=bands, offset=16)
    values = np.frombuffer(data, dtype="<f4", offset=16 + 4 * bands)
    grid = WavelengthGrid(tuple(float(c) for c in centres))
    return SpectralCube(grid, values.reshape(bands, height, width).astype(np.float64))


def write_cube(cube: SpectralCube, path) -> None:
    Path(path).write_bytes(cube_to_bytes(cube))


def read_cube(path) -> SpectralCube:
    return cube_from_bytes(Path(path).read_bytes())


# -- ROI CSV ------------------------------------------------------------------

def read_roi_csv(path) -> list[tuple[str, Roi]]:
    """Rows of ``x,y,side[,snapshot_id]``; returns (snapshot_id, Roi) pairs.

    A missing snapshot_id column puts every ROI in snapshot "0".
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if not {"x", "y", "side"} <= set(fields):
            raise FormatError(f"{path}: header must contain x,y,side")
        out = []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
            try:
                roi = Roi(int(row["x"]), int(row["y"]), int(row["side"]))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
            out.append((row.get("snapshot_id") or "0", roi))
    if not out:
        raise FormatError(f"{path}: no ROIs")
    return out


def write_roi_csv(rois, path) -> None:
    """``rois`` is a list of Roi or of (snapshot_id, Roi) pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "side", "snapshot_id"])
        for item in rois:
            sid, roi = item if isinstance(item, tuple) else ("0", item)
            w.writerow([roi.x, roi.y, roi.side, sid])


# -- dataset CSV --------------------------------------------------------------

def dataset_to_csv(ds: SyntheticDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "r", "g", "b"] + [f"s{b:g}" for b in ds.grid.bands] + ["bbl_umol_l"])
    for i in range(len(ds)):
        w.writerow(
            [int(ds.ids[i])]
            + [_fmt(v) for v in ds.rgb[i]]
            + [_fmt(v) for v in ds.spectra[i]]
            + [_fmt(ds.bbl[i])]
        )
    return buf.getvalue()


def write_dataset_csv(ds: SyntheticDataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds))


def read_dataset_csv(path) -> SyntheticDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:4] != ["id", "r", "g", "b"] or header[-1] != "bbl_umol_l":
        raise FormatError(f"{path}: header must be id,r,g,b,s<nm>...,bbl_umol_l")
    band_cols = header[4:-1]
    if not band_cols or not all(c.startswith("s") for c in band_cols):
        raise FormatError(f"{path}: spectral columns must be named s<nm>")
    try:
        grid = WavelengthGrid(tuple(float(c[1:]) for c in band_cols))
        body = [r for r in rows[1:] if r]
        if any(len(r) != len(header) for r in body):
            raise FormatError(f"{path}: ragged rows")
        ids = np.array([int(r[0]) for r in body], dtype=np.int64)
        arr = np.array([[float(x) for x in r[1:]] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    arr = arr.reshape(len(body), len(header) - 1)
    try:
        return SyntheticDataset(ids, arr[:, :3], arr[:, 3:-1], arr[:, -1], grid)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- reports ------------------------------------------------------------------

def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
