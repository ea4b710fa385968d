"""Command-line front end.

Exit codes: 0 success, 1 round-trip tolerance failed, 2 usage error,
3 data error, 4 capacity violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import codec, dataset, io, qa
from .core import BitsiError, CapacityViolation, MaskSpec, TimeSeries
from .scoring import TASK_IDS

EXIT_FAIL, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY = 1, 2, 3, 4

TASKS = {"forecast": "forecast", "impute": "imputation"}


class UsageError(Exception):
    pass


def _canvas(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"canvas must look like HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("canvas dimensions must be positive")
    return h, w


def _config(args) -> codec.CodecConfig:
    h, w = args.canvas
    return codec.CodecConfig(h, w, args.alpha, args.cmad, args.kappa)


def _add_codec_flags(p):
    p.add_argument("--canvas", type=_canvas, default=(896, 896), help="image size HxW")
    p.add_argument("--alpha", type=float, default=codec.CodecConfig.alpha)
    p.add_argument("--kappa", type=float, default=codec.CodecConfig.kappa)
    p.add_argument("--cmad", type=float, default=codec.CodecConfig.c_mad)


def _build_mask(mask_arg: str, series: TimeSeries, seed):
    """Return (series to encode, mask). Forecast masks append blank cycles after the input."""
    if mask_arg == "none":
        return series, None
    kind, _, value = mask_arg.partition(":")
    f = series.periodicity
    if kind == "forecast":
        P = int(value)
        pc = -(-P // f)
        s = series.with_values(np.vstack([series.values[series.length % f:], np.full((pc * f, series.num_vars), np.nan)]))
        return s, MaskSpec.forecast(s.num_vars, s.num_cycles, P, f)
    if kind == "impute":
        if seed is None:
            raise UsageError("--seed is required for impute masks")
        ratio = float(value)
        if not codec.MIN_IMPUTE_RATIO <= ratio <= codec.MAX_IMPUTE_RATIO:
            raise UsageError("impute ratio must lie in [0.1, 0.5]")
        C = series.num_cycles
        counts = qa.imputation_counts(C)
        if not counts:
            raise BitsiError(f"no valid imputation mask for {C} cycles")
        k = min(counts, key=lambda c: (abs(c / C - ratio), c))
        rng = np.random.default_rng(seed)
        rows = [sorted(int(j) + 1 for j in rng.choice(C, size=k, replace=False)) for _ in range(series.num_vars)]
        return series, MaskSpec.imputation(rows)
    raise UsageError(f"--mask must be none, forecast:P or impute:ratio, got {mask_arg!r}")


def cmd_encode(args) -> int:
    series = io.read_series_csv(args.input, args.periodicity)
    series, mask = _build_mask(args.mask, series, args.seed)
    image, meta = codec.encode(series, mask, _config(args), series_id=Path(args.input).stem)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    io.write_png(out / f"{stem}.png", image)
    io.write_floatimg(out / f"{stem}.floatimg", image)
    io.write_meta(out / f"{stem}.meta.json", meta)
    print(out / f"{stem}.png")
    return 0


def _read_image(path):
    return io.read_floatimg(path) if str(path).endswith(".floatimg") else io.read_png(path)


def cmd_decode(args) -> int:
    meta = io.read_meta(args.meta)
    series = codec.decode(_read_image(args.image), meta, region=args.region)
    io.write_series_csv(args.out, series.values)
    return 0


def cmd_roundtrip(args) -> int:
    series = io.read_series_csv(args.input, args.periodicity)
    report = codec.roundtrip_report(series, _config(args), use_u8=args.bit_depth == "u8")
    print(json.dumps(report, indent=2))
    print("PASS" if report["passed"] else "FAIL")
    return 0 if report["passed"] else EXIT_FAIL


def cmd_gen_data(args) -> int:
    dataset.gen_data(
        args.input, TASKS[args.task], args.n, args.seed, args.out, args.periodicity,
        _config(args), prediction_length=args.prediction_length, max_cycles=args.max_cycles, jobs=args.jobs,
    )
    return 0


def _tasks(text: str) -> list[str]:
    tasks = [t.strip().upper() for t in text.split(",") if t.strip()]
    bad = [t for t in tasks if t not in TASK_IDS]
    if bad or not tasks:
        raise argparse.ArgumentTypeError(f"unknown tasks {bad}; choose from qa1..qa6")
    return tasks


def cmd_gen_qa(args) -> int:
    records = dataset.gen_qa(args.instances, args.tasks, args.seed, args.out, args.per_instance)
    print(f"{len(records)} QA instances")
    return 0


def cmd_score(args) -> int:
    report = dataset.score_files(args.pred, args.gt)
    io.write_json(args.out, report)
    print(json.dumps(report, indent=2))
    return 0


def cmd_eval(args) -> int:
    report = dataset.evaluate(args.instances, TASKS[args.task], args.baseline)
    io.write_json(args.out, report)
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bitsi", description="Time series <-> image codec and task toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="render a CSV series into a TS-image")
    p.add_argument("--input", required=True)
    p.add_argument("--periodicity", type=int, required=True)
    p.add_argument("--mask", default="none", help="none | forecast:P | impute:ratio")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    _add_codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an image back to a CSV series")
    p.add_argument("--image", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--region", choices=["all", "masked"], default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("roundtrip", help="measure encode/decode reconstruction error")
    p.add_argument("--input", required=True)
    p.add_argument("--periodicity", type=int, required=True)
    p.add_argument("--bit-depth", choices=["float", "u8"], default="float")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("gen-data", help="build forecasting or imputation instances")
    p.add_argument("--input", required=True, help="directory of CSV series")
    p.add_argument("--task", choices=sorted(TASKS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--periodicity", type=int, required=True)
    p.add_argument("--prediction-length", type=int)
    p.add_argument("--max-cycles", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    _add_codec_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("gen-qa", help="derive understanding QA pairs from generated instances")
    p.add_argument("--instances", required=True)
    p.add_argument("--tasks", type=_tasks, default=list(TASK_IDS), help="comma list, e.g. qa1,qa3")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--per-instance", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("score", help="score QA predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="nMASE of a baseline or external model")
    p.add_argument("--task", choices=sorted(TASKS), required=True)
    p.add_argument("--baseline", required=True, help="naive | nearest | linear | copycycle | external:DIR")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BITSI_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except CapacityViolation as exc:
        print(f"capacity violation: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (BitsiError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
