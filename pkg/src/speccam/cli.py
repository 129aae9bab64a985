"""``speccam`` command line.

Exit codes: 0 success, 2 domain or validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import os
import sys
from pathlib import Path

from . import __version__
from . import io as sio
from . import plots
from .calibration import (
    ChartLayout,
    Exposure,
    load_profile,
    make_profile,
    read_profile_file,
    sample_chart,
    save_profile,
    validate_exposure,
    wiener_tm,
    write_profile_file,
)
from .errors import SpecCamError
from .evaluation import (
    BBL_THRESHOLD_UMOL_L,
    agreement_report,
    bland_altman,
    fraction_grid,
    learning_curve,
    prediction_band_95,
    roc,
    stability_summary,
)
from .experiments import chart_transfer_test
from .phantom import CameraModel, generate_dataset
from .reconstruction import (
    RoiVerdict,
    check_roi_quality,
    extract_roi_spectrum,
    reconstruct_image,
)
from .regression.cv import MIN_SUBSET, cross_validated_predictions
from .regression.data import FeatureMode
from .regression.models import KINDS, KIND_ALIASES, ModelSpec
from .spectral import mean_spectra

DEFAULT_SEED = 42
PROFILE_DIR_ENV = "SPECCAM_PROFILE_DIR"


class UsageError(SpecCamError):
    pass


def default_profile_dir() -> Path:
    env = os.environ.get(PROFILE_DIR_ENV)
    return Path(env) if env else Path.home() / ".speccam" / "profiles"


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- subcommands --------------------------------------------------------------

def cmd_calibrate(args) -> int:
    chart = sio.read_chart_csv(_require_file(args.chart))
    image_path = _require_file(args.image)
    image = sio.read_ppm(image_path)
    layout = ChartLayout.parse(args.layout) if args.layout else chart.layout
    samples = sample_chart(image, layout, chart=chart)
    problems = [(b, v) for b, v in validate_exposure(samples) if v is not Exposure.OK]
    for block_id, verdict in problems:
        _log(f"warning: block {block_id} is {verdict.value}")
    if problems and args.strict:
        raise UsageError(f"{len(problems)} block(s) failed the exposure check (--strict)")
    tm = wiener_tm(samples, chart)
    if args.created_at:
        created = _dt.datetime.fromisoformat(args.created_at)
    else:
        # file time rather than wall-clock time keeps the output reproducible
        created = _dt.datetime.fromtimestamp(int(image_path.stat().st_mtime), _dt.timezone.utc)
    profile = make_profile(args.device, tm, chart.name, args.illuminant, created)
    path = write_profile_file(profile, args.out) if args.out else save_profile(profile, default_profile_dir())
    print(f"wrote profile {path} ({len(tm.grid)}x3 matrix from {len(samples)} blocks)")
    return 0


def _load_profile_arg(args):
    if args.profile:
        return read_profile_file(_require_file(args.profile))
    if args.device:
        return load_profile(args.device, default_profile_dir())
    raise UsageError("give --profile or --device")


def cmd_reconstruct(args) -> int:
    profile = _load_profile_arg(args)
    image = sio.read_ppm(_require_file(args.image))
    cube = reconstruct_image(profile.tm, image)
    sio.write_cube(cube, args.out)
    print(
        f"wrote {args.out}: {cube.width}x{cube.height}x{len(cube.grid)} "
        f"reflectance min {cube.data.min():.6g} max {cube.data.max():.6g}"
    )
    return 0


def cmd_extract(args) -> int:
    cube = sio.read_cube(_require_file(args.cube))
    rois = sio.read_roi_csv(_require_file(args.rois))
    image = sio.read_ppm(_require_file(args.image)) if args.image else None
    if image is not None and (image.width, image.height) != (cube.width, cube.height):
        raise UsageError("image and cube dimensions differ")
    rows, accepted = [], {}
    for i, (sid, roi) in enumerate(rois):
        if not roi.fits(cube.width, cube.height):
            raise UsageError(
                f"ROI row {i + 1} (x={roi.x}, y={roi.y}, side={roi.side}) lies outside the "
                f"{cube.width}x{cube.height} cube"
            )
        verdict = check_roi_quality(image, roi) if image is not None else RoiVerdict.ACCEPT
        spectrum = extract_roi_spectrum(cube, roi)
        rows.append((f"roi{i + 1}", sid, roi, verdict.value, spectrum))
        if verdict.accepted:
            accepted.setdefault(sid, []).append(spectrum)
        else:
            _log(f"warning: ROI row {i + 1} rejected ({verdict.value})")
    if not accepted:
        raise UsageError("all ROIs were rejected by the quality policy")
    aggregate = mean_spectra([mean_spectra(v) for v in accepted.values()])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "snapshot_id", "x", "y", "side", "status"] + [f"{b:g}" for b in cube.grid.bands])
        for label, sid, roi, status, s in rows:
            w.writerow([label, sid, roi.x, roi.y, roi.side, status] + [_fmt(v) for v in s.values])
        n_used = sum(len(v) for v in accepted.values())
        w.writerow(["aggregate", "", "", "", "", f"n={n_used}"] + [_fmt(v) for v in aggregate.values])
    print(f"wrote {args.out}: {len(rows)} ROI rows, {n_used} used in the aggregate")
    return 0


def cmd_simulate(args) -> int:
    if args.n < MIN_SUBSET:
        raise UsageError(f"--n must be >= {MIN_SUBSET} for cross-validation, got {args.n}")
    if args.noise < 0:
        raise UsageError("--noise must be >= 0")
    camera = CameraModel(noise_sigma=args.noise, seed=args.seed)
    ds = generate_dataset(args.n, camera=camera, seed=args.seed)
    sio.write_dataset_csv(ds, args.out)
    print(f"wrote {args.out}: {len(ds)} records")
    if args.chart_test:
        res = chart_transfer_test(seed=args.seed, noise_sigma=args.noise)
        verdict = "PASS" if res.passed else "FAIL"
        print(f"chart test: mean RMSE {res.mean_rmse:.6f} over {len(res.rmse)} blocks {verdict}")
    return 0


def _model_spec(kind: str, seed: int) -> ModelSpec:
    return ModelSpec(kind, seed=seed)


def cmd_evaluate(args) -> int:
    ds = sio.read_dataset_csv(_require_file(args.dataset))
    spec = _model_spec(args.model, args.seed)
    mode = FeatureMode.parse(args.mode)
    pairs = cross_validated_predictions(ds, spec, mode, args.folds, args.seed)
    agreement = agreement_report(pairs)
    roc_report = roc(pairs, BBL_THRESHOLD_UMOL_L)
    report = {
        "dataset": Path(args.dataset).name,
        "mode": mode.value,
        "model": spec.kind,
        "folds": args.folds,
        "seed": args.seed,
        "agreement": agreement.to_dict(),
        "roc": roc_report.to_dict(),
        "predictions": [
            {"id": int(i), "truth": float(t), "prediction": float(p)}
            for i, t, p in zip(pairs.ids, pairs.truth, pairs.prediction)
        ],
    }
    sio.write_json(report, args.out)
    if args.plots:
        out = Path(args.plots)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"{mode.value}_{spec.kind}"
        band = prediction_band_95(pairs)
        (out / f"scatter_{tag}.svg").write_text(plots.scatter_svg(pairs.truth, pairs.prediction, band))
        (out / f"bland_altman_{tag}.svg").write_text(
            plots.bland_altman_svg(pairs.truth, pairs.prediction, bland_altman(pairs))
        )
        (out / f"roc_{tag}.svg").write_text(plots.roc_svg({tag: roc_report}))
    print(
        f"{mode.value}/{spec.kind}: r={agreement.r:.4f} MD={agreement.md:.3f} "
        f"LOA=[{agreement.loa_lower:.3f}, {agreement.loa_upper:.3f}] AUROC={roc_report.auroc:.4f}"
    )
    return 0


def cmd_learning_curve(args) -> int:
    ds = sio.read_dataset_csv(_require_file(args.dataset))
    try:
        fractions = fraction_grid(args.start, args.stop, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    spec = _model_spec(args.model, args.seed)
    modes = [FeatureMode.parse(m) for m in args.modes.split(",")]
    curve = learning_curve(ds, spec, fractions=fractions, k=args.folds, seed=args.seed, modes=modes)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "fraction", "n", "r", "md", "std_md"])
        for mode, p in curve.rows():
            w.writerow([mode, _fmt(p.fraction), p.n, _fmt(p.r), _fmt(p.md), _fmt(p.std_md)])
    summary = stability_summary(curve) if len(fractions) > 1 else {}
    sidecar = Path(args.out).with_suffix(".stability.json")
    sio.write_json({"fractions": list(curve.fractions), "stability_std": summary}, sidecar)
    if args.plots:
        out = Path(args.plots)
        out.mkdir(parents=True, exist_ok=True)
        for index, label in (("r", "r"), ("md", "MD (umol/L)"), ("std_md", "std of differences (umol/L)")):
            series = {m: curve.series(m, index) for m in curve.points}
            (out / f"curve_{index}.svg").write_text(
                plots.curve_svg(curve.fractions, series, f"Learning curve: {index}", label)
            )
    print(f"wrote {args.out}: {len(fractions)} fractions x {len(modes)} modes")
    for mode, stds in summary.items():
        print(f"{mode} stability std: " + " ".join(f"{k}={v:.4g}" for k, v in stds.items()))
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speccam", description="RGB-to-spectrum reconstruction and BBL regression")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    model_kinds = sorted(set(KINDS) | set(KIND_ALIASES))

    c = sub.add_parser("calibrate", help="compute a device profile from a chart photo")
    c.add_argument("--chart", required=True, help="reference chart CSV")
    c.add_argument("--image", required=True, help="chart photo (binary PPM)")
    c.add_argument("--layout", help="rows x cols, e.g. 6x4 (default: from block count)")
    c.add_argument("--device", required=True)
    c.add_argument("--illuminant", default="flashlight")
    c.add_argument("--out", help="profile path (default: the profile store)")
    c.add_argument("--created-at", help="ISO timestamp (default: image modification time)")
    c.add_argument("--strict", action="store_true", help="fail on any exposure warning")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("reconstruct", help="RGB image to spectral cube")
    r.add_argument("--profile")
    r.add_argument("--device", help="load the profile for this device from the store")
    r.add_argument("--image", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("extract", help="ROI spectra and their aggregate from a cube")
    e.add_argument("--cube", required=True)
    e.add_argument("--rois", required=True)
    e.add_argument("--image", help="source RGB image; enables the ROI quality gate")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("simulate", help="write a synthetic dataset")
    s.add_argument("--n", type=int, default=320)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--noise", type=float, default=1.5)
    s.add_argument("--out", required=True)
    s.add_argument("--chart-test", action="store_true", help="also run the cross-chart RMSE test")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("evaluate", help="cross-validated agreement and ROC report")
    v.add_argument("--dataset", required=True)
    v.add_argument("--mode", choices=["sal", "rgbl"], default="sal")
    v.add_argument("--model", choices=model_kinds, default="hybrid")
    v.add_argument("--folds", type=int, default=10)
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--out", required=True)
    v.add_argument("--plots")
    v.set_defaults(func=cmd_evaluate)

    lc = sub.add_parser("learning-curve", help="agreement indices against dataset fraction")
    lc.add_argument("--dataset", required=True)
    lc.add_argument("--from", dest="start", type=float, default=0.125)
    lc.add_argument("--to", dest="stop", type=float, default=1.0)
    lc.add_argument("--step", type=float, default=0.0625)
    lc.add_argument("--model", choices=model_kinds, default="hybrid")
    lc.add_argument("--modes", default="sal,rgbl")
    lc.add_argument("--folds", type=int, default=10)
    lc.add_argument("--seed", type=int, default=DEFAULT_SEED)
    lc.add_argument("--out", required=True)
    lc.add_argument("--plots")
    lc.set_defaults(func=cmd_learning_curve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which already matches the contract
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:  # SpecCamError and plain validation failures
        _log(f"error: {exc}")
        return 2
    except OSError as exc:
        _log(f"error: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
