"""Command-line interface.

Subcommands: synth, prep, features, train, classify, eval, fitdemo.
Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import curvefit, features, imgprep, knn, storage
from .dataset import make_synthetic_dataset, load_manifest
from .errors import IoError, ValidationError
from .evaluate import EvalConfig, render_table, run_evaluation
from .hmm import HmmBank, fit_hmm_bank
from .knn import KnnModel
from .synth import SyntheticParams, synth_topography, LABELS


class _Parser(argparse.ArgumentParser):
    # usage problems are validation errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_center(text: str) -> tuple[int, int]:
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise ValidationError(f"--center expects X,Y integers, got {text!r}") from None


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(",")
        return float(lo), float(hi)
    except ValueError:
        raise ValidationError(f"expected LO,HI numbers, got {text!r}") from None


def _write_json(path, doc) -> None:
    try:
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    params = SyntheticParams(
        healthy_center_range=_parse_range(args.healthy_range),
        lasik_center_range=_parse_range(args.lasik_range),
        lasik_asymmetry_amp=args.asymmetry,
        noise_std=args.noise_std,
        grid_side=args.grid_side,
        seed=args.seed,
        grid_overlay_spacing=args.grid_overlay,
    )
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for label_idx, label in enumerate(LABELS):
        for i in range(args.n_per_class):
            sample_id = f"{label.lower()}_{i:04d}"
            _, reading, image = synth_topography(
                label, params, label_idx * args.n_per_class + i
            )
            image_name = f"{sample_id}.ppm"
            pachy_name = f"{sample_id}_pachy.csv"
            imgprep.write_ppm(outdir / image_name, image)
            features.write_pachymetry_csv(outdir / pachy_name, reading)
            rows.append((sample_id, image_name, pachy_name, label))
    try:
        with (outdir / "manifest.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("sample_id", "image_path", "pachy_path", "label"))
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    print(f"wrote {len(rows)} samples to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# prep
# ---------------------------------------------------------------------------


def _cmd_prep(args) -> int:
    image = imgprep.read_image(args.input)
    if args.center is not None:
        image = imgprep.crop_map(image, _parse_center(args.center), args.side)
    cleaned, report = imgprep.remove_dark_lines(
        image, darkness_threshold=args.dark_threshold, window_radius=args.radius
    )
    imgprep.write_image(args.output, cleaned)
    if args.repair_report:
        _write_json(args.repair_report, report.to_dict())
    print(
        f"{args.output}: {report.dark_pixels} dark pixels, "
        f"{report.repaired} repaired, {len(report.unrepaired)} left"
    )
    return 0


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------


def _scalar_map(path, channel: str):
    return imgprep.channel_contrast(imgprep.read_image(path), channel)


def _cmd_features(args) -> int:
    grid = _scalar_map(args.map, args.channel)
    reading = features.load_pachymetry_csv(args.pachy)
    vector = features.build_feature_vector(grid, reading, args.combo, args.bands)
    _write_json(args.output, vector.to_dict())
    print(f"wrote {len(vector.values)} features ({vector.combo}) to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# train / classify
# ---------------------------------------------------------------------------


def _load_dataset(args):
    if args.manifest:
        return load_manifest(args.manifest, channel=args.channel)
    if args.synthetic:
        params = SyntheticParams(seed=args.seed, noise_std=args.noise_std)
        return make_synthetic_dataset(args.synthetic, params)
    raise ValidationError("supply --manifest or --synthetic N")


def _cmd_train(args) -> int:
    dataset = _load_dataset(args)
    if args.model == "knn":
        samples = [
            knn.LabeledSample(
                features.build_feature_vector(e.grid, e.reading, args.combo, args.bands).values,
                e.label,
            )
            for e in dataset.entries
        ]
        model = knn.knn_fit(samples, k=args.k, reject_distance=args.reject_distance)
    else:
        by_label: dict[str, list] = {}
        for entry in dataset.entries:
            by_label.setdefault(entry.label, []).append(entry.grid)
        model = fit_hmm_bank(
            by_label,
            n_states=args.states,
            n_symbols=args.symbols,
            window_height=args.window,
            stride=args.stride,
            max_iter=args.max_iter,
            tol=args.tol,
            seed=args.seed,
        )
    storage.save_model(model, args.output)
    print(f"wrote {args.model} model trained on {len(dataset.entries)} samples to {args.output}")
    return 0


def _cmd_classify(args) -> int:
    model = storage.load_model(args.model_file)
    if isinstance(model, KnnModel):
        if not args.features:
            raise ValidationError("a KNN model needs a features.json argument")
        try:
            doc = json.loads(Path(args.features).read_text())
        except OSError as exc:
            raise IoError(f"cannot read {args.features}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise IoError(f"{args.features}: not valid JSON: {exc}") from exc
        vector = features.FeatureVector.from_dict(doc)
        decision = knn.knn_classify(model, vector.values)
        print(json.dumps(decision.to_dict(), indent=2, sort_keys=True))
    elif isinstance(model, HmmBank):
        if not args.map:
            raise ValidationError("an HMM bank needs --map pointing at an image")
        grid = _scalar_map(args.map, args.channel)
        label, loglikes = model.classify_map(grid)
        print(json.dumps({"label": label, "log_likelihoods": loglikes}, indent=2, sort_keys=True))
    else:  # pragma: no cover - storage only yields the two kinds above
        raise ValidationError(f"unsupported model type {type(model).__name__}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

# eval flag -> EvalConfig field
_EVAL_OVERRIDES = {
    "seed": "seed",
    "test_fraction": "test_fraction",
    "bands": "bands",
    "k": "knn_k",
    "reject_distance": "knn_reject_distance",
    "states": "hmm_states",
    "symbols": "hmm_symbols",
    "window": "hmm_window",
    "stride": "hmm_stride",
    "max_iter": "hmm_max_iter",
    "tol": "hmm_tol",
    "manifest": "manifest",
    "channel": "channel",
    "n_per_class": "n_per_class",
    "noise_std": "noise_std",
    "grid_side": "grid_side",
    "asymmetry": "lasik_asymmetry_amp",
}


def _eval_config(args) -> EvalConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise IoError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise IoError(f"{args.config}: not valid JSON: {exc}") from exc
    for flag, field_name in _EVAL_OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            doc[field_name] = value
    if args.healthy_range is not None:
        doc["healthy_center_range"] = _parse_range(args.healthy_range)
    if args.lasik_range is not None:
        doc["lasik_center_range"] = _parse_range(args.lasik_range)
    if args.combos is not None:
        doc["combos"] = [c.strip() for c in args.combos.split(",") if c.strip()]
    return EvalConfig.from_dict(doc)


def _cmd_eval(args) -> int:
    config = _eval_config(args)
    if config.manifest:
        dataset = load_manifest(config.manifest, channel=config.channel)
    else:
        dataset = make_synthetic_dataset(config.n_per_class, config.synthetic_params())
    report = run_evaluation(dataset, config)
    try:
        Path(args.output).write_text(report.to_json())
    except OSError as exc:
        raise IoError(f"cannot write {args.output}: {exc}") from exc
    table = render_table(report)
    if args.table:
        try:
            Path(args.table).write_text(table)
        except OSError as exc:
            raise IoError(f"cannot write {args.table}: {exc}") from exc
    if args.figdir:
        from .plots import render_report_figures

        for path in render_report_figures(report, args.figdir):
            print(f"figure: {path}")
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# fitdemo
# ---------------------------------------------------------------------------


def _cmd_fitdemo(args) -> int:
    points = curvefit.load_points_csv(args.points)
    if args.kind == "line":
        model, trace = curvefit.fit_line_stagewise(points)
    else:
        model, trace = curvefit.fit_quad_stagewise(points)
    doc = trace.to_dict()
    doc["final_coefficients"] = list(model.coefficients())
    _write_json(args.output, doc)
    if args.curves:
        xs = np.array([p.x for p in points])
        grid = np.linspace(xs.min(), xs.max(), args.samples)
        try:
            with Path(args.curves).open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["stage", "x", "y"])
                for stage in trace.stages:
                    for x, y in zip(grid, stage.model.predict(grid)):
                        writer.writerow([stage.index, repr(float(x)), repr(float(y))])
        except OSError as exc:
            raise IoError(f"cannot write {args.curves}: {exc}") from exc
    if args.plot:
        from .plots import plot_fit_trace

        plot_fit_trace(points, trace, args.plot)
    print(f"fitted {len(trace.stages)} stages ({len(trace.skipped)} skipped) -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corneakit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--noise-std", type=float, default=6.0)
    p.add_argument("--grid-side", type=int, default=159)
    p.add_argument("--grid-overlay", type=int, default=None, help="dark grid spacing in px")
    p.add_argument("--healthy-range", default="500,600")
    p.add_argument("--lasik-range", default="360,450")
    p.add_argument("--asymmetry", type=float, default=180.0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("prep", help="crop the map square and remove dark grid lines")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--center", default=None, help="crop center as X,Y (omit to skip cropping)")
    p.add_argument("--side", type=int, default=159)
    p.add_argument("--dark-threshold", type=int, default=60)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--repair-report", default=None, help="write repair details as JSON")
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("features", help="compute a feature vector for one sample")
    p.add_argument("map", help="preprocessed map image")
    p.add_argument("pachy", help="pachymetry CSV (center,up,down,left,right)")
    p.add_argument("--combo", choices=sorted(features.COMBOS), required=True)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--channel", choices=sorted(imgprep.CHANNELS), default="red")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train a classifier and persist it")
    p.add_argument("--model", choices=("knn", "hmm"), required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--synthetic", type=int, default=None, metavar="N_PER_CLASS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=6.0)
    p.add_argument("--channel", choices=sorted(imgprep.CHANNELS), default="red")
    p.add_argument("--combo", choices=sorted(features.COMBOS), default="maxmindiff")
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--reject-distance", type=float, default=None)
    p.add_argument("--states", type=int, default=5)
    p.add_argument("--symbols", type=int, default=16)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="classify one sample with a stored model")
    p.add_argument("--model-file", required=True)
    p.add_argument("features", nargs="?", default=None, help="features.json (KNN models)")
    p.add_argument("--map", default=None, help="map image (HMM banks)")
    p.add_argument("--channel", choices=sorted(imgprep.CHANNELS), default="red")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval", help="run the train/test benchmark and report")
    p.add_argument("--config", default=None, help="JSON config; flags override its fields")
    p.add_argument("-o", "--output", required=True, help="report JSON path")
    p.add_argument("--table", default=None, help="write the text comparison table here")
    p.add_argument("--figdir", default=None, help="also render figures into this directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--bands", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--reject-distance", type=float, default=None)
    p.add_argument("--states", type=int, default=None)
    p.add_argument("--symbols", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--channel", choices=sorted(imgprep.CHANNELS), default=None)
    p.add_argument("--n-per-class", type=int, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--grid-side", type=int, default=None)
    p.add_argument("--asymmetry", type=float, default=None)
    p.add_argument("--healthy-range", default=None, metavar="LO,HI")
    p.add_argument("--lasik-range", default=None, metavar="LO,HI")
    p.add_argument("--combos", default=None, help="comma-separated subset of combos")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fitdemo", help="stagewise line/quadratic fit of a CSV point set")
    p.add_argument("points", help="CSV with x,y header")
    p.add_argument("--kind", choices=("line", "quad"), default="line")
    p.add_argument("-o", "--output", required=True, help="trace JSON path")
    p.add_argument("--curves", default=None, help="write sampled per-stage curves as CSV")
    p.add_argument("--samples", type=int, default=100, help="points per sampled curve")
    p.add_argument("--plot", default=None, help="render the stages to this image file")
    p.set_defaults(func=_cmd_fitdemo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
