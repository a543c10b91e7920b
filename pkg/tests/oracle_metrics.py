"""Independent brute-force oracle for the joint localization/detection metrics.

Deliberately reimplements the scoring rules with exhaustive enumeration:
the minimum-total-distance matching is found by trying every injective
assignment (feasible for <= 4 events per class per segment) instead of the
Hungarian algorithm, and all counters are tallied with plain Python loops.
"""

from itertools import permutations

import numpy as np

from seldkit.core import EventList, angular_distance, azel_to_vec


def _instances(events: EventList, start, stop):
    rows = {}
    for ev in events:
        if start <= ev.frame < stop:
            rows.setdefault((ev.class_id, ev.track_id), []).append(ev)
    out = {}
    for (class_id, _track), evs in sorted(rows.items()):
        evs.sort(key=lambda e: e.frame)
        rep = evs[(len(evs) - 1) // 2]
        out.setdefault(class_id, []).append(azel_to_vec(rep.azimuth, rep.elevation))
    return out


def _best_matching(preds, refs):
    """Exhaustive minimum-total-angular-distance assignment."""
    n = min(len(preds), len(refs))
    if n == 0:
        return []
    best = None
    best_cost = np.inf
    if len(preds) <= len(refs):
        for combo in permutations(range(len(refs)), n):
            cost = sum(angular_distance(preds[i], refs[j]) for i, j in enumerate(combo))
            if cost < best_cost:
                best_cost = cost
                best = [(i, j) for i, j in enumerate(combo)]
    else:
        for combo in permutations(range(len(preds)), n):
            cost = sum(angular_distance(preds[i], refs[j]) for j, i in enumerate(combo))
            if cost < best_cost:
                best_cost = cost
                best = [(i, j) for j, i in enumerate(combo)]
    return best


def evaluate_oracle(pred: EventList, ref: EventList, angle_threshold=20.0,
                    segment_frames=10):
    tp = fp = fn = matched = 0
    dist_sum = 0.0
    n_ref = subs = dels = ins = 0
    n_frames = max(pred.n_frames, ref.n_frames)
    n_segments = -(-n_frames // segment_frames) if n_frames else 0
    for seg in range(n_segments):
        start, stop = seg * segment_frames, (seg + 1) * segment_frames
        p_inst = _instances(pred, start, stop)
        r_inst = _instances(ref, start, stop)
        seg_fp = seg_fn = 0
        for class_id in set(p_inst) | set(r_inst):
            preds = p_inst.get(class_id, [])
            refs = r_inst.get(class_id, [])
            n_ref += len(refs)
            pairs = _best_matching(preds, refs)
            for i, j in pairs:
                d = angular_distance(preds[i], refs[j])
                matched += 1
                dist_sum += d
                if d < angle_threshold:
                    tp += 1
                else:
                    seg_fp += 1
                    seg_fn += 1
            seg_fp += len(preds) - len(pairs)
            seg_fn += len(refs) - len(pairs)
        fp += seg_fp
        fn += seg_fn
        subs += min(seg_fp, seg_fn)
        dels += max(0, seg_fn - seg_fp)
        ins += max(0, seg_fp - seg_fn)
    er = (subs + dels + ins) / n_ref if n_ref else 0.0
    denom = 2 * tp + fp + fn
    f = 2 * tp / denom if denom else 1.0
    le = dist_sum / matched if matched else 180.0
    lr = matched / n_ref if n_ref else 0.0
    counts = dict(tp=tp, fp=fp, fn=fn, matched=matched, n_ref=n_ref,
                  subs=subs, dels=dels, ins=ins)
    return (er, f, le, lr), counts
