"""Rule-based understanding tasks (QA1-QA6) and generation instances.

Layout-level tasks (variable count, band y-range, cycle box) are answered
from the sidecar alone. Signal-level tasks (mean comparison, anomalous
cycles, per-cycle trend) read the 8-bit pixels of the assigned channel, so
their ground truth can be recomputed from a PNG and its sidecar.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import codec
from .core import (
    CHANNEL_NAMES,
    BitsiError,
    CapacityViolation,
    DataError,
    InstanceMeta,
    MaskSpec,
    TimeSeries,
    TsImage,
    channel_of_var,
    truncate_to_period,
)
from .layout import BBox, contiguous_runs, cycle_bbox, cycles_bbox, var_y_range
from .scoring import TASK_IDS

ANOMALY_THRESHOLD = 18.0
DISTINCT_MARGIN = ANOMALY_THRESHOLD
FLAT_FRACTION = 0.1

UNDERSTANDING_SYSTEM_PROMPT = (
    "Think through the question step by step before answering. Put the reasoning "
    "between <think> and </think>, then give the final answer after 'Answer:'."
)
GENERATION_SYSTEM_PROMPT = (
    "Plan the completion step by step before drawing. Put the plan between "
    "<think> and </think>, then output the completed image."
)


class NoDistinctPair(BitsiError):
    pass


@dataclass(frozen=True)
class TrendFacts:
    min_value: float
    min_index: int
    max_value: float
    max_index: int
    start_value: float
    end_value: float
    direction: str
    description: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class QaInstance:
    task_id: str
    question: str
    ground_truth: dict
    cot: str
    answer: str
    series_id: str

    @property
    def response(self) -> str:
        """Full reply text in the form a model is expected to produce."""
        return f"<think>\n{self.cot}\n</think>\nAnswer: {self.answer}"

    def to_record(self, qa_id: str, image_path: str = "", meta_path: str = "") -> dict:
        return {
            "qa_id": qa_id,
            "task_id": self.task_id,
            "series_id": self.series_id,
            "question": self.question,
            "ground_truth": self.ground_truth,
            "cot": self.cot,
            "answer": self.answer,
            "response": self.response,
            "image_path": image_path,
            "meta_path": meta_path,
        }


def _fmt(x: float, digits: int = 3) -> str:
    s = f"{x:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _preamble(meta: InstanceMeta) -> str:
    lay = meta.layout
    return (
        f"Canvas: {lay.image_width} wide by {lay.image_height} tall, one colour band per variable "
        f"(variable 1 on top) and one vertical strip per cycle (cycle 1 at x = 0)."
    )


def _meta_line(meta: InstanceMeta) -> str:
    return f"Metadata: L = {meta.total_length}, periodicity = {meta.periodicity}."


def _geometry_steps(meta: InstanceMeta) -> list[str]:
    lay = meta.layout
    H, W, N, C = lay.image_height, lay.image_width, lay.num_vars, lay.total_cycles
    L, f = meta.total_length, meta.periodicity
    return [
        f"Bands counted: {N}, so band height h = floor({H} / {N}) = {lay.band_height}.",
        f"Cycles: ceil({L} / {f}) = {C}, each {W} / {C} = {_fmt(lay.cycle_width)} px wide.",
    ]


def _locate(meta: InstanceMeta, n: int, j: int) -> tuple[str, BBox]:
    lay = meta.layout
    box = cycle_bbox(n, j, lay)
    w = _fmt(lay.cycle_width)
    text = (
        f"Variable {n}: y from ({n}-1)*{lay.band_height} = {box.y1} to {n}*{lay.band_height}-1 = {box.y2}. "
        f"Cycle {j}: x from floor({j - 1}*{w}) = {box.x1} to floor({j}*{w})-1 = {box.x2}."
    )
    return text, box


def visible_cycles(meta: InstanceMeta, n: int) -> list[int]:
    return [int(j) + 1 for j in np.flatnonzero(~meta.cycle_mask()[n - 1])]


def cycle_brightness(image: TsImage, meta: InstanceMeta, n: int, j: int) -> float:
    """Mean 8-bit intensity of variable ``n``'s channel over cycle ``j``'s box."""
    b = cycle_bbox(n, j, meta.layout)
    return float(image.pixels_u8[b.y1:b.y2 + 1, b.x1:b.x2 + 1, channel_of_var(n)].mean())


def _check_var(meta: InstanceMeta, n: int):
    var_y_range(n, meta.layout.image_height, meta.layout.num_vars)


def gen_qa1(meta: InstanceMeta) -> QaInstance:
    N = meta.layout.num_vars
    question = f"{_preamble(meta)} How many variables does the image encode?"
    cot = f"Scanning from top to bottom, every band of a single colour is one variable. There are {N} such bands."
    return QaInstance("QA1", question, {"num_vars": N}, cot, f"{N} variables.", meta.series_id)


def gen_qa2(meta: InstanceMeta, n: int) -> QaInstance:
    lay = meta.layout
    y0, y1 = var_y_range(n, lay.image_height, lay.num_vars)
    question = (
        f"{_preamble(meta)} Band height is computed as max(1, H // max(1, nvars)) with integer division. "
        f"With y = 0 on the top row and inclusive indices, give the y-range [y_start, y_end] of variable {n}."
    )
    cot = "\n".join([
        _geometry_steps(meta)[0],
        f"Variable {n} starts at ({n}-1)*{lay.band_height} = {y0} and ends at {n}*{lay.band_height}-1 = {y1}.",
    ])
    gt = {"variable": n, "y_range": [y0, y1], "image_width": lay.image_width}
    return QaInstance("QA2", question, gt, cot, f"Variable {n} spans y-range [{y0}, {y1}].", meta.series_id)


def gen_qa3(meta: InstanceMeta, n: int, j: int) -> QaInstance:
    lay = meta.layout
    loc, box = _locate(meta, n, j)
    question = (
        f"{_preamble(meta)} {_meta_line(meta)} Each cycle occupies a vertical strip. "
        f"(1) What is the width of one cycle in pixels? "
        f"(2) Give the bounding box [(x1, y1), (x2, y2)] of variable {n}, cycle {j}."
    )
    cot = "\n".join(_geometry_steps(meta) + [loc])
    w = _fmt(lay.cycle_width)
    gt = {"variable": n, "cycle": j, "cycle_width": lay.cycle_width, "bbox": box.to_json()}
    answer = f"(1) One cycle is {w} px wide. (2) Variable {n}, cycle {j}: {box}."
    return QaInstance("QA3", question, gt, cot, answer, meta.series_id)


def difference_percent(a: float, b: float) -> float:
    """Absolute difference relative to the pair's average brightness."""
    mid = (a + b) / 2.0
    return 0.0 if mid == 0 else 100.0 * abs(a - b) / mid


def gen_qa4(
    image: TsImage,
    meta: InstanceMeta,
    n: int,
    j_a: Optional[int] = None,
    j_b: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    margin: float = DISTINCT_MARGIN,
) -> QaInstance:
    """Which of two cycles is brighter. Without an explicit pair, a distinct one is drawn."""
    _check_var(meta, n)
    if j_a is None or j_b is None:
        vis = visible_cycles(meta, n)
        means = {j: cycle_brightness(image, meta, n, j) for j in vis}
        pairs = [(a, b) for k, a in enumerate(vis) for b in vis[k + 1:] if abs(means[a] - means[b]) > margin]
        if not pairs:
            raise NoDistinctPair(f"variable {n} has no pair of cycles differing by more than {margin}")
        rng = rng if rng is not None else np.random.default_rng(0)
        j_a, j_b = pairs[int(rng.integers(len(pairs)))]
    mu_a, mu_b = cycle_brightness(image, meta, n, j_a), cycle_brightness(image, meta, n, j_b)
    if abs(mu_a - mu_b) <= margin:
        raise NoDistinctPair(f"cycles {j_a} and {j_b} differ by only {abs(mu_a - mu_b):.1f}")
    win, lose = (j_a, j_b) if mu_a > mu_b else (j_b, j_a)
    pct = difference_percent(mu_a, mu_b)
    loc_a, _ = _locate(meta, n, j_a)
    loc_b, _ = _locate(meta, n, j_b)
    channel = CHANNEL_NAMES[channel_of_var(n)]
    question = (
        f"{_preamble(meta)} {_meta_line(meta)} For variable {n}, compare the overall brightness "
        f"(0-255 pixel values) of cycle {j_a} and cycle {j_b}. Which cycle has higher values?"
    )
    cot = "\n".join(_geometry_steps(meta) + [
        f"Variable {n} is drawn in the {channel} channel.",
        loc_a,
        loc_b,
        f"Mean {channel} intensity: cycle {j_a} = {mu_a:.1f}, cycle {j_b} = {mu_b:.1f}; "
        f"gap = {abs(mu_a - mu_b):.1f}.",
        f"Cycle {win} is brighter than cycle {lose}.",
    ])
    gt = {
        "variable": n, "cycles": [j_a, j_b], "brighter": win,
        "means": [mu_a, mu_b], "difference_percent": pct,
    }
    answer = f"Cycle {win} is brighter (difference: {pct:.1f}%)."
    return QaInstance("QA4", question, gt, cot, answer, meta.series_id)


def classify_anomalies(cycle_means: dict, threshold: float) -> tuple[float, list[int], list[int]]:
    """Return (global mean, bright cycles, dark cycles) using strict comparisons."""
    mu = float(np.mean(list(cycle_means.values())))
    bright = [j for j, m in cycle_means.items() if m > mu + threshold]
    dark = [j for j, m in cycle_means.items() if m < mu - threshold]
    return mu, bright, dark


def gen_qa5(image: TsImage, meta: InstanceMeta, n: int, threshold: float = ANOMALY_THRESHOLD) -> QaInstance:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    _check_var(meta, n)
    vis = visible_cycles(meta, n)
    means = {j: cycle_brightness(image, meta, n, j) for j in vis}
    mu, bright, dark = classify_anomalies(means, threshold)
    anomalies = sorted(bright + dark)
    boxes = [cycle_bbox(n, j, meta.layout) for j in anomalies]
    channel = CHANNEL_NAMES[channel_of_var(n)]
    t = _fmt(threshold, 1)
    question = (
        f"{_preamble(meta)} {_meta_line(meta)} For variable {n}, find the cycles whose average pixel value "
        f"(0-255) is more than {t} above or more than {t} below the mean over all of its cycles. "
        f"Report how many there are, how many are bright and how many dark, and the bounding box "
        f"(x1, y1, x2, y2) of each."
    )
    steps = _geometry_steps(meta) + [
        f"Variable {n} uses the {channel} channel.",
        "Cycle means: " + ", ".join(f"{j}: {m:.1f}" for j, m in means.items()) + ".",
        f"Overall mean {mu:.1f}; bright above {mu + threshold:.1f}, dark below {mu - threshold:.1f}.",
    ]
    for j, b in zip(anomalies, boxes):
        kind = "bright" if j in bright else "dark"
        steps.append(f"Cycle {j} ({means[j]:.1f}) is {kind}, box {b}.")
    if not anomalies:
        steps.append("No cycle crosses either threshold.")
    gt = {
        "variable": n, "threshold": threshold, "global_mean": mu,
        "total": len(anomalies), "bright": len(bright), "dark": len(dark),
        "cycles": anomalies, "bboxes": [b.to_json() for b in boxes],
    }
    box_text = ", ".join(str(b) for b in boxes) if boxes else "none"
    answer = (
        f"Variable {n} has {len(anomalies)} anomalous cycles ({len(bright)} bright, {len(dark)} dark). "
        f"Boxes: {box_text}."
    )
    return QaInstance("QA5", question, gt, "\n".join(steps), answer, meta.series_id)


def trend_facts(values) -> TrendFacts:
    v = np.asarray(values, dtype=np.float64)
    imin, imax = int(np.argmin(v)), int(np.argmax(v))
    start, end = float(v[0]), float(v[-1])
    span = float(v[imax] - v[imin])
    change = end - start
    if span == 0 or abs(change) <= FLAT_FRACTION * span:
        direction, net = "flat", "roughly no net change"
    elif change > 0:
        direction, net = "increasing", "a net increase"
    else:
        direction, net = "decreasing", "a net decrease"
    description = (
        f"The cycle opens at {start:.2f} and closes at {end:.2f}. "
        f"Its highest value is {v[imax]:.2f} at t={imax} and its lowest is {v[imin]:.2f} at t={imin}. "
        f"Over the cycle this is {net}."
    )
    return TrendFacts(float(v[imin]), imin, float(v[imax]), imax, start, end, direction, description)


def gen_qa6(image: TsImage, meta: InstanceMeta, n: int, j: int) -> QaInstance:
    loc, box = _locate(meta, n, j)
    f = meta.periodicity
    decoded = codec.decode(image, meta, region=[j], use_u8=True).values[:, n - 1]
    facts = trend_facts(decoded[(j - 1) * f:j * f])
    channel = CHANNEL_NAMES[channel_of_var(n)]
    mu, sigma, kappa = meta.norm.mu[n - 1], meta.norm.sigma[n - 1], meta.norm.kappa
    question = (
        f"{_preamble(meta)} {_meta_line(meta)} For variable {n}, cycle {j}: "
        f"1. Which colour channel encodes this variable? "
        f"2. What is the bounding box (x1, y1, x2, y2) of the cycle? "
        f"3. Recover the original values and describe the pattern of the cycle in two or three sentences. "
        f"Recovery: value = {_fmt(kappa)} * sigma * arctanh(2 * pixel / 255 - 1) + mu, "
        f"with mu = {mu:.4g} and sigma = {sigma:.4g}."
    )
    cot = "\n".join(_geometry_steps(meta) + [
        loc,
        f"Variable {n} maps to channel {channel}.",
        f"Recovered cycle: min {facts.min_value:.2f} at t={facts.min_index}, "
        f"max {facts.max_value:.2f} at t={facts.max_index}, "
        f"start {facts.start_value:.2f}, end {facts.end_value:.2f}; direction {facts.direction}.",
    ])
    gt = {
        "variable": n, "cycle": j, "channel": channel, "bbox": box.to_json(),
        "trend": facts.to_dict(), "description": facts.description,
    }
    answer = f"1. Channel: {channel}. 2. Bounding box: {box}. 3. Description: {facts.description}"
    return QaInstance("QA6", question, gt, cot, answer, meta.series_id)


def unmasked(meta: InstanceMeta) -> InstanceMeta:
    """Sidecar for the ground-truth (fully visible) image of an instance."""
    return dataclasses.replace(meta, mask=MaskSpec.none(meta.layout.num_vars))


def generate_qa_suite(
    image: TsImage,
    meta: InstanceMeta,
    rng: np.random.Generator,
    count: int,
    tasks: Sequence[str] = TASK_IDS,
) -> list[QaInstance]:
    """Draw ``count`` QA instances cycling through ``tasks``; tasks that cannot be posed are skipped."""
    N = meta.layout.num_vars
    out: list[QaInstance] = []
    k = int(rng.integers(len(tasks)))
    misses = 0
    while len(out) < count and misses < len(tasks):
        task = tasks[k % len(tasks)]
        k += 1
        n = int(rng.integers(1, N + 1))
        vis = visible_cycles(meta, n)
        j = int(vis[rng.integers(len(vis))])
        try:
            if task == "QA1":
                qa = gen_qa1(meta)
            elif task == "QA2":
                qa = gen_qa2(meta, n)
            elif task == "QA3":
                qa = gen_qa3(meta, n, j)
            elif task == "QA4":
                qa = gen_qa4(image, meta, n, rng=rng)
            elif task == "QA5":
                qa = gen_qa5(image, meta, n)
            elif task == "QA6":
                qa = gen_qa6(image, meta, n, j)
            else:
                raise ValueError(f"unknown task {task!r}")
        except NoDistinctPair:
            misses += 1
            continue
        misses = 0
        out.append(qa)
    return out


# --- generation instances ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class GenerationInstance:
    masked: TsImage
    target: TsImage
    meta: InstanceMeta
    window: TimeSeries
    insample: np.ndarray
    instruction: str
    cot: str
    system_prompt: str = GENERATION_SYSTEM_PROMPT

    @property
    def task(self) -> str:
        return self.meta.mask.kind

    @property
    def mask_ratio(self) -> float:
        return self.meta.mask.ratio(self.meta.layout.num_vars, self.meta.layout.total_cycles)


def mask_bboxes(meta: InstanceMeta) -> list[list[tuple[tuple[int, int], BBox]]]:
    """Per variable, the masked cycle runs and the box each run covers."""
    out = []
    for n in range(1, meta.layout.num_vars + 1):
        runs = contiguous_runs(meta.mask.masked_cycles[n - 1]) if meta.mask.kind != "none" else []
        out.append([(run, cycles_bbox(n, run[0], run[1], meta.layout)) for run in runs])
    return out


def _runs_text(run) -> str:
    a, b = run
    return f"cycle {a}" if a == b else f"cycles {a}-{b}"


def _instruction(meta: InstanceMeta) -> str:
    lay, f = meta.layout, meta.periodicity
    N, C = lay.num_vars, lay.total_cycles
    head = (
        f"Canvas {lay.image_width}x{lay.image_height}, {N} band(s), {C} strips of {f} steps per band "
        f"({C * f} steps)."
    )
    if meta.mask.kind == "forecast":
        k = len(meta.mask.masked_cycles[0])
        return f"{head} The rightmost {k} strip(s) ({k * f} steps) are black. Paint what comes next in each band."
    return f"{head} Some strips are black, not necessarily the same ones in every band. Paint them back in."


def generation_cot(masked: TsImage, meta: InstanceMeta) -> str:
    """Plan text built from the same facts the understanding tasks ask for, on visible cycles only."""
    lay = meta.layout
    steps = [
        f"1) Variables: {lay.num_vars} bands; brighter pixels mean larger values.",
        "2) Geometry: " + " ".join(_geometry_steps(meta)),
        "3) Masked regions:",
    ]
    for n, runs in enumerate(mask_bboxes(meta), start=1):
        y0, y1 = var_y_range(n, lay.image_height, lay.num_vars)
        parts = [f"{_runs_text(run)} at {box}" for run, box in runs]
        steps.append(f"   Var {n} (y {y0}-{y1}): " + ("; ".join(parts) if parts else "nothing masked") + ".")
    steps.append("4) Visible-cycle statistics:")
    for n in range(1, lay.num_vars + 1):
        vis = visible_cycles(meta, n)
        means = {j: cycle_brightness(masked, meta, n, j) for j in vis}
        mu, bright, dark = classify_anomalies(means, ANOMALY_THRESHOLD)
        hi = max(means, key=means.get)
        lo = min(means, key=means.get)
        masked_set = set(meta.mask.masked_cycles[n - 1])
        ref = max((j for j in vis if j < min(masked_set, default=lay.total_cycles + 1)), default=vis[-1])
        decoded = codec.decode(masked, meta, region=[ref], use_u8=True).values[:, n - 1]
        facts = trend_facts(decoded[(ref - 1) * meta.periodicity:ref * meta.periodicity])
        steps.append(
            f"   Var {n}: brightest cycle {hi} ({means[hi]:.1f}), darkest cycle {lo} ({means[lo]:.1f}), "
            f"mean {mu:.1f}, {len(bright)} bright and {len(dark)} dark outliers. "
            f"Cycle {ref} runs {facts.start_value:.2f} to {facts.end_value:.2f} "
            f"(max {facts.max_value:.2f} at t={facts.max_index}, min {facts.min_value:.2f} at t={facts.min_index})."
        )
    steps.append("5) Complete each masked region in its band's channel, keeping the brightness scale of the visible cycles.")
    return "\n".join(steps)


def _forecast_window(s: TimeSeries, rng, prediction_length, context_cycles):
    f, avail = s.periodicity, s.num_cycles
    pc = -(-prediction_length // f)
    hi = min(2 * pc, avail - pc)
    if hi < pc or avail - pc < 2:
        need = max(2 * pc, pc + 2)
        raise DataError(f"need at least {need} cycles for a {prediction_length}-step forecast, have {avail}")
    cc = int(rng.integers(pc, hi + 1)) if context_cycles is None else context_cycles
    if not pc <= cc <= 2 * pc or cc + pc > avail:
        raise DataError(f"context of {cc} cycles outside [{pc}, {2 * pc}] or beyond available data")
    # at least two cycles of history so the seasonal MASE scale exists
    lo = max(0, 2 - cc)
    off = int(rng.integers(lo, avail - cc - pc + 1))
    start, origin, stop = off * f, (off + cc) * f, (off + cc + pc) * f
    window = s.values[start:stop]
    mask = MaskSpec.forecast(s.num_vars, cc + pc, prediction_length, f)
    return window, s.values[:origin], mask


def imputation_counts(total_cycles: int) -> list[int]:
    """Masked-cycle counts whose ratio lies in [0.1, 0.5] and leave a visible cycle."""
    return [
        k for k in range(1, total_cycles)
        if codec.MIN_IMPUTE_RATIO <= k / total_cycles <= codec.MAX_IMPUTE_RATIO
    ]


def sample_imputation_mask(rng, num_vars: int, total_cycles: int) -> MaskSpec:
    counts = imputation_counts(total_cycles)
    if not counts:
        raise DataError(f"no valid imputation mask for {total_cycles} cycles")
    rows = []
    for _ in range(num_vars):
        k = counts[int(rng.integers(len(counts)))]
        rows.append(sorted(int(c) + 1 for c in rng.choice(total_cycles, size=k, replace=False)))
    return MaskSpec.imputation(rows)


def gen_generation_instance(
    series: TimeSeries,
    task: str,
    rng_seed,
    config: Optional[codec.CodecConfig] = None,
    prediction_length: Optional[int] = None,
    context_cycles: Optional[int] = None,
    max_cycles: int = 10,
    series_id: str = "series",
) -> GenerationInstance:
    """Cut a window from ``series``, mask it for ``task`` and build the plan text.

    Forecast windows keep between one and two times as many context cycles
    as the horizon needs; imputation windows mask whole cycles per variable
    at a ratio within [0.1, 0.5].
    """
    config = config or codec.CodecConfig()
    rng = np.random.default_rng(rng_seed)
    s = truncate_to_period(series)
    f = s.periodicity
    report = codec.check_capacity(config.height, config.width, s.num_vars, f, 2 * f)
    if not report.ok:
        raise CapacityViolation(report)
    if task == "forecast":
        window, insample, mask = _forecast_window(s, rng, prediction_length or f, context_cycles)
    elif task == "imputation":
        top = min(s.num_cycles, max_cycles)
        if top < 2:
            raise DataError("imputation needs at least two cycles")
        C = int(rng.integers(2, top + 1))
        off = int(rng.integers(0, s.num_cycles - C + 1))
        window = s.values[off * f:(off + C) * f]
        mask = sample_imputation_mask(rng, s.num_vars, C)
        # scale history: the whole source series with the hidden points blanked out
        insample = np.array(s.values)
        insample[off * f:(off + C) * f][mask.timestep_mask(s.num_vars, C, f)] = np.nan
    else:
        raise ValueError(f"unknown generation task {task!r}")
    win = s.with_values(window)
    masked, target, meta = codec.encode_pair(win, mask, config, series_id)
    return GenerationInstance(
        masked=masked,
        target=target,
        meta=meta,
        window=win,
        insample=np.asarray(insample),
        instruction=_instruction(meta),
        cot=generation_cot(masked, meta),
    )
