"""On-disk instance trees and the batch pipelines behind the CLI.

Layout of a generated dataset::

    <out>/generation.jsonl
    <out>/instances/<id>/masked.png        model input
    <out>/instances/<id>/masked.meta.json
    <out>/instances/<id>/target.png        ground-truth image
    <out>/instances/<id>/target.meta.json  same sidecar without the mask
    <out>/instances/<id>/window.csv        raw values of the encoded window
    <out>/instances/<id>/insample.csv      history used for the MASE scale

External models write ``<dir>/<id>/completed.png``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import codec, evaluation, io, qa, scoring
from .core import BitsiError, InstanceMeta

log = logging.getLogger(__name__)

INSTANCES = "instances"


def _instance_seed(seed: int, index: int) -> list[int]:
    return [int(seed), int(index)]


def _gen_one(args) -> dict:
    index, path, task, seed, out, periodicity, config, prediction_length, max_cycles = args
    series = io.read_series_csv(path, periodicity)
    inst_id = f"{index:06d}"
    sid = f"{Path(path).stem}#{index}"
    inst = qa.gen_generation_instance(
        series, task, _instance_seed(seed, index), config,
        prediction_length=prediction_length, max_cycles=max_cycles, series_id=sid,
    )
    d = Path(out) / INSTANCES / inst_id
    d.mkdir(parents=True, exist_ok=True)
    io.write_png(d / "masked.png", inst.masked)
    io.write_meta(d / "masked.meta.json", inst.meta)
    io.write_png(d / "target.png", inst.target)
    io.write_meta(d / "target.meta.json", qa.unmasked(inst.meta))
    io.write_series_csv(d / "window.csv", inst.window.values)
    io.write_series_csv(d / "insample.csv", inst.insample)
    rel = Path(INSTANCES) / inst_id
    return {
        "instance_id": inst_id,
        "series_id": sid,
        "task": task,
        "system_prompt": inst.system_prompt,
        "src_image_path": str(rel / "masked.png"),
        "instruction": inst.instruction,
        "gen_cot": inst.cot,
        "tgt_image_path": str(rel / "target.png"),
        "meta_path": str(rel / "masked.meta.json"),
        "mask_ratio": inst.mask_ratio,
        "prediction_length": inst.meta.mask.prediction_length,
    }


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def gen_data(
    input_dir,
    task: str,
    n: int,
    seed: int,
    out,
    periodicity: int,
    config: Optional[codec.CodecConfig] = None,
    prediction_length: Optional[int] = None,
    max_cycles: int = 10,
    jobs: int = 1,
) -> list[dict]:
    files = sorted(Path(input_dir).glob("*.csv"))
    if not files:
        raise io.EmptyFile(f"no .csv files in {input_dir}")
    config = config or codec.CodecConfig()
    Path(out).mkdir(parents=True, exist_ok=True)
    args = [
        (i, str(files[i % len(files)]), task, seed, str(out), periodicity, config, prediction_length, max_cycles)
        for i in range(n)
    ]
    records = _map(_gen_one, args, jobs)
    io.write_jsonl(Path(out) / "generation.jsonl", records)
    log.info("wrote %d %s instances to %s", len(records), task, out)
    return records


def instance_dirs(root) -> list[Path]:
    root = Path(root)
    base = root / INSTANCES if (root / INSTANCES).is_dir() else root
    return sorted(p for p in base.iterdir() if p.is_dir() and (p / "masked.meta.json").exists())


def gen_qa(instances, tasks: Sequence[str], seed: int, out, per_instance: int = 10) -> list[dict]:
    root = Path(instances)
    records = []
    for idx, d in enumerate(instance_dirs(root)):
        image = io.read_png(d / "target.png")
        meta = io.read_meta(d / "target.meta.json")
        rng = np.random.default_rng(_instance_seed(seed, idx))
        suite = qa.generate_qa_suite(image, meta, rng, per_instance, tasks)
        for k, item in enumerate(suite):
            records.append(item.to_record(
                f"{d.name}-{k:02d}",
                str((d / "target.png").relative_to(root)),
                str((d / "target.meta.json").relative_to(root)),
            ))
    io.write_jsonl(out, records)
    return records


def prediction_text(record: dict) -> str:
    for key in ("response", "prediction", "output"):
        if isinstance(record.get(key), str):
            return record[key]
    return f"<think>\n{record.get('cot', '')}\n</think>\nAnswer: {record.get('answer', '')}"


def score_files(pred_path, gt_path, text_sim=scoring.token_f1) -> dict:
    preds = {r["qa_id"]: r for r in io.read_jsonl(pred_path)}
    results = []
    for gt in io.read_jsonl(gt_path):
        pred = preds.get(gt["qa_id"])
        if pred is None:
            results.append((gt["task_id"], scoring.UNPARSEABLE))
            continue
        results.append((gt["task_id"], scoring.score_instance(gt["task_id"], prediction_text(pred), gt["ground_truth"], text_sim)))
    return scoring.score_report(results)


# --- evaluation --------------------------------------------------------------

class LoadedInstance:
    def __init__(self, d: Path):
        self.dir = d
        self.id = d.name
        self.meta: InstanceMeta = io.read_meta(d / "masked.meta.json")
        self.window = io.read_matrix_csv(d / "window.csv")
        self.insample = io.read_matrix_csv(d / "insample.csv")

    @property
    def task(self) -> str:
        return self.meta.mask.kind

    def gapped(self) -> np.ndarray:
        return np.where(self.meta.timestep_mask(), np.nan, self.window)

    def eval_positions(self) -> np.ndarray:
        if self.task == "forecast":
            where = np.zeros_like(self.window, dtype=bool)
            origin = self.meta.context_length
            where[origin:origin + self.meta.mask.prediction_length] = True
            return where
        return self.meta.timestep_mask()

    def bucket(self) -> str:
        if self.task == "forecast":
            return f"P={self.meta.mask.prediction_length}"
        return evaluation.ratio_bucket(self.meta.mask.ratio(self.meta.layout.num_vars, self.meta.layout.total_cycles))


def _image_prediction(image, inst: LoadedInstance) -> np.ndarray:
    decoded = codec.decode(image, inst.meta, region="masked").values
    return np.where(inst.meta.timestep_mask(), decoded, inst.window)


def predict(inst: LoadedInstance, baseline: str) -> np.ndarray:
    """Full-window prediction (observed values kept) for a named baseline."""
    f = inst.meta.periodicity
    if baseline == "naive":
        if inst.task == "forecast":
            ctx = inst.window[:inst.meta.context_length]
            pred = inst.window.copy()
            pred[inst.meta.context_length:] = evaluation.baseline_naive_forecast(
                ctx, f, inst.window.shape[0] - inst.meta.context_length
            )
            return pred
        return evaluation.baseline_naive_impute(inst.gapped(), f)
    if baseline == "nearest":
        return evaluation.baseline_nearest_impute(inst.gapped())
    if baseline == "linear":
        return evaluation.baseline_linear_impute(inst.gapped())
    if baseline == "copycycle":
        masked = io.read_png(inst.dir / "masked.png")
        return _image_prediction(evaluation.baseline_copycycle_inpaint(masked, inst.meta), inst)
    if baseline.startswith("external:"):
        path = Path(baseline.split(":", 1)[1]) / inst.id / "completed.png"
        return _image_prediction(io.read_png(path), inst)
    raise ValueError(f"unknown baseline {baseline!r}")


def _clean(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def evaluate(instances, task: str, baseline: str) -> dict:
    """Score ``baseline`` against the naive reference on every ``task`` instance under ``instances``."""
    loaded = [LoadedInstance(d) for d in instance_dirs(instances)]
    loaded = [i for i in loaded if i.task == task]
    if not loaded:
        raise BitsiError(f"no {task} instances under {instances}")
    model, naive, bucket_of = {}, {}, {}
    for inst in loaded:
        where, f = inst.eval_positions(), inst.meta.periodicity
        bucket_of[inst.id] = inst.bucket()
        naive[inst.id] = evaluation.instance_mase(predict(inst, "naive"), inst.window, inst.insample, f, where)
        try:
            pred = predict(inst, baseline)
        except (BitsiError, OSError, ValueError) as exc:
            log.warning("instance %s: no usable prediction (%s)", inst.id, exc)
            continue
        if pred.shape != inst.window.shape:
            log.warning("instance %s: prediction shape %s does not match target", inst.id, pred.shape)
            continue
        model[inst.id] = evaluation.instance_mase(pred, inst.window, inst.insample, f, where)

    rows = []
    for bucket in sorted(set(bucket_of.values())) + ["all"]:
        ids = [k for k, b in bucket_of.items() if bucket in (b, "all")]
        sub_model = {k: model[k] for k in ids if k in model}
        sub_naive = {k: naive[k] for k in ids}
        try:
            res = evaluation.summarize(sub_model, sub_naive, attempted=len(ids))
            row = res.row(task, bucket)
        except evaluation.EmptyIntersection:
            row = evaluation.EvalResult(n_instances=0, excluded=len(ids),
                                        success_rate=len(sub_model) / len(ids)).row(task, bucket)
        rows.append({k: _clean(v) for k, v in row.items()})
    return {"task": task, "baseline": baseline, "rows": rows}
