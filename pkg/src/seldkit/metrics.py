"""Joint localization/detection metrics.

Events are grouped into fixed-length segments of label frames (1 s by
default). Within each segment and class, prediction instances are matched
to reference instances by minimum-total-angular-distance assignment on
segment-representative DOAs. Matched pairs closer than the angle threshold
count as location-dependent true positives; matched pairs at or beyond it
count as both a false positive and a false negative. The class-dependent
localization error/recall ignore the threshold entirely.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import EventList, ValidationError, angular_distance, azel_to_vec


@dataclass(frozen=True)
class EvalConfig:
    angle_threshold_deg: float = 20.0
    segment_frames: int = 10  # 1 s at 100 ms label frames


@dataclass
class MetricAccumulator:
    """Counters for one or more evaluations; merge is commutative."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: int = 0
    distance_sum: float = 0.0
    n_ref: int = 0
    subs: int = 0
    dels: int = 0
    ins: int = 0

    def merge(self, other: "MetricAccumulator") -> "MetricAccumulator":
        return MetricAccumulator(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            matched=self.matched + other.matched,
            distance_sum=self.distance_sum + other.distance_sum,
            n_ref=self.n_ref + other.n_ref,
            subs=self.subs + other.subs,
            dels=self.dels + other.dels,
            ins=self.ins + other.ins,
        )

    def scores(self) -> tuple[float, float, float, float]:
        """(error rate, F-score, localization error deg, localization recall)."""
        er = (self.subs + self.dels + self.ins) / self.n_ref if self.n_ref else 0.0
        denom = 2 * self.tp + self.fp + self.fn
        f = 2 * self.tp / denom if denom else 1.0
        le = self.distance_sum / self.matched if self.matched else 180.0
        lr = self.matched / self.n_ref if self.n_ref else 0.0
        return er, f, le, lr


def _segment_instances(events: EventList, seg_start: int, seg_end: int):
    """Per-class representative DOAs for (class, track) instances in a segment.

    The representative is the DOA at the instance's median active frame
    (lower median) within the segment.
    """
    rows: dict[tuple[int, int], list] = {}
    for ev in events:
        if seg_start <= ev.frame < seg_end:
            rows.setdefault((ev.class_id, ev.track_id), []).append(ev)
    out: dict[int, list[np.ndarray]] = {}
    for (class_id, _track), evs in sorted(rows.items()):
        evs.sort(key=lambda e: e.frame)
        rep = evs[(len(evs) - 1) // 2]
        out.setdefault(class_id, []).append(azel_to_vec(rep.azimuth, rep.elevation))
    return out


def accumulate(pred: EventList, ref: EventList, cfg: EvalConfig = EvalConfig()) -> MetricAccumulator:
    """Score one prediction/reference pair into a fresh accumulator."""
    if pred.class_count != ref.class_count:
        raise ValidationError(
            f"class counts differ: {pred.class_count} vs {ref.class_count}"
        )
    acc = MetricAccumulator()
    n_frames = max(pred.n_frames, ref.n_frames)
    n_segments = -(-n_frames // cfg.segment_frames) if n_frames else 0
    for seg in range(n_segments):
        start = seg * cfg.segment_frames
        stop = start + cfg.segment_frames
        p_inst = _segment_instances(pred, start, stop)
        r_inst = _segment_instances(ref, start, stop)
        seg_fp = seg_fn = 0
        for class_id in sorted(set(p_inst) | set(r_inst)):
            preds = p_inst.get(class_id, [])
            refs = r_inst.get(class_id, [])
            acc.n_ref += len(refs)
            if preds and refs:
                cost = np.array([[angular_distance(p, r) for r in refs] for p in preds])
                rows, cols = linear_sum_assignment(cost)
                for i, j in zip(rows, cols):
                    dist = cost[i, j]
                    acc.matched += 1
                    acc.distance_sum += dist
                    if dist < cfg.angle_threshold_deg:
                        acc.tp += 1
                    else:
                        seg_fp += 1
                        seg_fn += 1
                seg_fp += len(preds) - len(rows)
                seg_fn += len(refs) - len(rows)
            else:
                seg_fp += len(preds)
                seg_fn += len(refs)
        acc.fp += seg_fp
        acc.fn += seg_fn
        acc.subs += min(seg_fp, seg_fn)
        acc.dels += max(0, seg_fn - seg_fp)
        acc.ins += max(0, seg_fp - seg_fn)
    return acc


def evaluate(pred: EventList, ref: EventList,
             cfg: EvalConfig = EvalConfig()) -> tuple[float, float, float, float]:
    """Location-dependent ER/F and class-dependent LE/LR for one file pair."""
    return accumulate(pred, ref, cfg).scores()


def seld_score(er: float, f: float, le: float, lr: float) -> float:
    """Aggregate score: mean of (ER, 1-F, LE/180, 1-LR); 0 is perfect, 1 worst."""
    return float(np.mean([er, 1.0 - f, le / 180.0, 1.0 - lr]))


@dataclass
class CorpusReport:
    """Micro-averaged corpus metrics plus per-file breakdown."""

    overall: tuple[float, float, float, float]
    per_file: dict[str, tuple[float, float, float, float]]
    missing: list[str] = field(default_factory=list)

    @property
    def seld(self) -> float:
        return seld_score(*self.overall)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["file", "er", "f", "le_deg", "lr", "seld"])
            for name in sorted(self.per_file):
                er, f, le, lr = self.per_file[name]
                writer.writerow([name, f"{er:.6f}", f"{f:.6f}", f"{le:.6f}",
                                 f"{lr:.6f}", f"{seld_score(er, f, le, lr):.6f}"])
            er, f, le, lr = self.overall
            writer.writerow(["OVERALL", f"{er:.6f}", f"{f:.6f}", f"{le:.6f}",
                             f"{lr:.6f}", f"{self.seld:.6f}"])

    def format_table(self) -> str:
        lines = [f"{'file':<32} {'ER':>7} {'F%':>7} {'LE°':>7} {'LR%':>7}"]
        for name in sorted(self.per_file):
            er, f, le, lr = self.per_file[name]
            lines.append(f"{name:<32} {er:7.3f} {100 * f:7.1f} {le:7.1f} {100 * lr:7.1f}")
        er, f, le, lr = self.overall
        lines.append(f"{'OVERALL':<32} {er:7.3f} {100 * f:7.1f} {le:7.1f} {100 * lr:7.1f}")
        lines.append(f"SELD score: {self.seld:.4f}")
        return "\n".join(lines)


def evaluate_corpus(pred_dir, ref_dir, cfg: EvalConfig, class_count: int,
                    allow_missing: bool = False, jobs: int = 1) -> CorpusReport:
    """Micro-average metrics over matching CSV files in two directories.

    Counters accumulate across files before the final ratios. Files present
    on only one side abort the evaluation unless ``allow_missing`` is set,
    in which case they are listed in the report and skipped.
    """
    from .core import read_metadata

    pred_dir, ref_dir = Path(pred_dir), Path(ref_dir)
    pred_files = {p.name: p for p in sorted(pred_dir.glob("*.csv"))}
    ref_files = {p.name: p for p in sorted(ref_dir.glob("*.csv"))}
    missing = sorted(set(pred_files) ^ set(ref_files))
    if missing and not allow_missing:
        raise ValidationError(
            f"unpaired files: {', '.join(missing[:8])}"
            + (" ..." if len(missing) > 8 else "")
        )
    names = sorted(set(pred_files) & set(ref_files))
    if not names:
        raise ValidationError("no paired CSV files to evaluate")

    def one(name: str):
        pred = read_metadata(pred_files[name], class_count)
        ref = read_metadata(ref_files[name], class_count)
        return name, accumulate(pred, ref, cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, names))
    else:
        results = [one(name) for name in names]

    total = MetricAccumulator()
    per_file = {}
    for name, acc in results:
        per_file[name] = acc.scores()
        total = total.merge(acc)
    return CorpusReport(overall=total.scores(), per_file=per_file, missing=missing)
