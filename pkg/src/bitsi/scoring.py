"""Scores for the six understanding tasks, each normalized to [0, 1].

Raw model output is first reduced to its answer section (text after the last
``Answer:`` marker, else after ``</think>``, else the whole text) and then
handed to a task-specific parser. Outputs that do not yield an answer are
reported as unparseable and excluded from the task mean; the fraction that
parse is the success rate.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

from .layout import BBox

TextSim = Callable[[str, str], float]

TASK_IDS = ("QA1", "QA2", "QA3", "QA4", "QA5", "QA6")

_INT = r"-?\d+"
_BOX_PAIRS = re.compile(
    rf"[\[(]\s*\(\s*({_INT})\s*,\s*({_INT})\s*\)\s*,\s*\(\s*({_INT})\s*,\s*({_INT})\s*\)\s*[\])]"
)
_BOX_FLAT = re.compile(rf"[\[(]\s*({_INT})\s*,\s*({_INT})\s*,\s*({_INT})\s*,\s*({_INT})\s*[\])]")
_RANGE = re.compile(rf"\[\s*({_INT})\s*,\s*({_INT})\s*\]")
_TOKEN = re.compile(r"[a-z0-9]+(?:\.[0-9]+)?")


def canonical(value):
    if isinstance(value, str):
        return " ".join(value.split()).casefold()
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def exact_match(pred, gt) -> int:
    return int(canonical(pred) == canonical(gt))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union with inclusive pixel areas."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1) + 1
    ih = min(a.y2, b.y2) - max(a.y1, b.y1) + 1
    inter = max(0, iw) * max(0, ih)
    return inter / (a.area + b.area - inter)


def token_f1(pred: str, ref: str) -> float:
    """Bag-of-words F1 over lowercase alphanumeric tokens (decimals kept whole)."""
    p, r = Counter(_TOKEN.findall(pred.lower())), Counter(_TOKEN.findall(ref.lower()))
    if not p and not r:
        return 1.0
    common = sum((p & r).values())
    if common == 0:
        return 0.0
    precision, recall = common / sum(p.values()), common / sum(r.values())
    return 2 * precision * recall / (precision + recall)


def _counts(c) -> tuple:
    if isinstance(c, dict):
        return (c["total"], c["bright"], c["dark"])
    return tuple(c)


def score_qa5(pred_counts, gt_counts) -> float:
    """Mean of three exact matches on (total, bright, dark)."""
    p, g = _counts(pred_counts), _counts(gt_counts)
    return sum(exact_match(a, b) for a, b in zip(p, g)) / 3.0


def score_qa6(pred: dict, gt: dict, text_sim: TextSim = token_f1) -> float:
    color = exact_match(pred["channel"], gt["channel"])
    box = iou(_box(pred["bbox"]), _box(gt["bbox"]))
    return (color + box + text_sim(pred["description"], gt["description"])) / 3.0


def _box(b) -> BBox:
    return b if isinstance(b, BBox) else BBox.from_json(b)


# --- answer extraction -------------------------------------------------------

def answer_section(text: str) -> str:
    low = text.lower()
    k = low.rfind("answer:")
    if k >= 0:
        return text[k + len("answer:"):]
    k = low.rfind("</think>")
    if k >= 0:
        return text[k + len("</think>"):]
    return text


def parse_boxes(text: str) -> list[BBox]:
    found = []
    for rx in (_BOX_PAIRS, _BOX_FLAT):
        for m in rx.finditer(text):
            x1, y1, x2, y2 = (int(g) for g in m.groups())
            if x1 <= x2 and y1 <= y2:
                found.append((m.start(), BBox(x1, y1, x2, y2)))
        if found:
            break
    return [b for _, b in sorted(found, key=lambda t: t[0])]


def parse_qa1(ans: str) -> Optional[int]:
    m = re.search(r"(\d+)\s*(?:variables?|channels?|bands?|series)\b", ans, re.I)
    if m:
        return int(m.group(1))
    nums = re.findall(r"\d+", ans)
    return int(nums[0]) if len(nums) == 1 else None


def parse_qa2(ans: str) -> Optional[tuple[int, int]]:
    m = _RANGE.search(ans)
    if not m:
        return None
    a, b = int(m.group(1)), int(m.group(2))
    return (a, b) if a <= b else None


def parse_qa3(ans: str) -> Optional[BBox]:
    boxes = parse_boxes(ans)
    return boxes[0] if boxes else None


def parse_qa4(ans: str) -> Optional[int]:
    m = re.search(r"(?:cycle\s*)?(\d+)\s+is\s+(?:the\s+)?brighter", ans, re.I)
    if m is None:
        m = re.search(r"cycle\s*(\d+)", ans, re.I)
    return int(m.group(1)) if m else None


def parse_qa5(ans: str) -> Optional[dict]:
    fields = {}
    for key, rx in (
        ("total", r"(\d+)\s+(?:anomalous|abnormal|anomal)"),
        ("bright", r"(\d+)\s+bright"),
        ("dark", r"(\d+)\s+dark"),
    ):
        m = re.search(rx, ans, re.I)
        if m is None:
            return None
        fields[key] = int(m.group(1))
    return fields


def parse_qa6(ans: str) -> Optional[dict]:
    color = re.search(r"\b(red|green|blue)\b", ans, re.I)
    boxes = parse_boxes(ans)
    desc = re.search(r"(?:description|trend(?: analysis)?)\s*:\s*(.+)", ans, re.I | re.S)
    if color is None or not boxes or desc is None:
        return None
    return {"channel": color.group(1), "bbox": boxes[0], "description": desc.group(1).strip()}


@dataclass(frozen=True)
class ScoreResult:
    score: Optional[float]
    parsed: bool


UNPARSEABLE = ScoreResult(None, False)


def score_instance(task_id: str, pred_text: str, gt: dict, text_sim: TextSim = token_f1) -> ScoreResult:
    ans = answer_section(pred_text)
    if task_id == "QA1":
        v = parse_qa1(ans)
        return UNPARSEABLE if v is None else ScoreResult(float(exact_match(v, gt["num_vars"])), True)
    if task_id == "QA2":
        v = parse_qa2(ans)
        if v is None:
            return UNPARSEABLE
        width = gt["image_width"]
        g0, g1 = gt["y_range"]
        return ScoreResult(iou(BBox(0, v[0], width - 1, v[1]), BBox(0, g0, width - 1, g1)), True)
    if task_id == "QA3":
        v = parse_qa3(ans)
        return UNPARSEABLE if v is None else ScoreResult(iou(v, _box(gt["bbox"])), True)
    if task_id == "QA4":
        v = parse_qa4(ans)
        return UNPARSEABLE if v is None else ScoreResult(float(exact_match(v, gt["brighter"])), True)
    if task_id == "QA5":
        v = parse_qa5(ans)
        return UNPARSEABLE if v is None else ScoreResult(score_qa5(v, gt), True)
    if task_id == "QA6":
        v = parse_qa6(ans)
        return UNPARSEABLE if v is None else ScoreResult(score_qa6(v, gt, text_sim), True)
    raise ValueError(f"unknown task id {task_id!r}")


def score_report(results) -> dict:
    """Aggregate ``(task_id, ScoreResult)`` pairs into ``{task_id: {mean_score, success_rate, n}}``."""
    buckets: dict[str, list[ScoreResult]] = {}
    for task_id, res in results:
        buckets.setdefault(task_id, []).append(res)
    report = {}
    for task_id in sorted(buckets):
        rs = buckets[task_id]
        scores = [r.score for r in rs if r.parsed]
        report[task_id] = {
            "mean_score": sum(scores) / len(scores) if scores else None,
            "success_rate": len(scores) / len(rs),
            "n": len(rs),
        }
    return report
