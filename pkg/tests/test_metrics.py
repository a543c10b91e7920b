import numpy as np
import pytest

from conftest import random_events
from oracle_metrics import evaluate_oracle
from seldkit.core import Event, EventList, ValidationError, write_metadata
from seldkit.metrics import (
    CorpusReport,
    EvalConfig,
    MetricAccumulator,
    accumulate,
    evaluate,
    evaluate_corpus,
    seld_score,
)


def _events(*rows, class_count=12):
    return EventList(events=tuple(Event(*r) for r in rows), class_count=class_count)


def _random_case(rng, classes=3, segments=2, seg_len=10, max_per=4):
    """Random pred/ref pair with <= max_per instances per class per segment."""

    def build():
        rows = []
        for seg in range(segments):
            for class_id in range(classes):
                for track in range(int(rng.integers(0, max_per + 1))):
                    frame = int(rng.integers(seg * seg_len, (seg + 1) * seg_len))
                    az = int(rng.integers(-180, 180))
                    el = int(rng.integers(-89, 90))
                    rows.append((frame, class_id, track, az, el))
        unique = {}
        for row in rows:
            unique[(row[0], row[1], row[2])] = row
        return _events(*unique.values(), class_count=classes)

    return build(), build()


class TestEvaluate:
    def test_perfect_prediction(self, rng):
        events = random_events(rng, frames=25, density=0.2)
        assert evaluate(events, events) == (0.0, 1.0, 0.0, 1.0)

    def test_thirty_degrees_off(self):
        ref = _events((2, 4, 0, 0, 0))
        pred = _events((2, 4, 0, 30, 0))
        er, f, le, lr = evaluate(pred, ref)
        assert (er, f) == (1.0, 0.0)
        assert le == pytest.approx(30.0, abs=1e-9)
        assert lr == 1.0

    def test_no_predictions(self, rng):
        ref = random_events(rng, frames=20, density=0.2)
        pred = _events()
        er, f, le, lr = evaluate(pred, ref)
        assert (er, f, le, lr) == (1.0, 0.0, 180.0, 0.0)

    def test_class_count_mismatch(self):
        with pytest.raises(ValidationError):
            evaluate(_events(class_count=10), _events(class_count=12))

    def test_permutation_invariance(self, rng):
        pred, ref = _random_case(rng)
        shuffled = EventList(
            events=tuple(rng.permutation(np.array(pred.events, dtype=object))),
            class_count=pred.class_count,
        )
        assert evaluate(shuffled, ref) == evaluate(pred, ref)

    def test_spurious_prediction_never_helps(self, rng):
        for _ in range(25):
            pred, ref = _random_case(rng, classes=3)
            er0, f0, _, _ = evaluate(pred, ref)
            # a prediction of a class that has no references anywhere
            spur = EventList(events=pred.events + (Event(0, 3, 9, 10, 10),),
                             class_count=4)
            ref4 = EventList(events=ref.events, class_count=4)
            pred4 = EventList(events=pred.events, class_count=4)
            er0, f0, _, _ = evaluate(pred4, ref4)
            er1, f1, _, _ = evaluate(spur, ref4)
            assert er1 >= er0 - 1e-12
            assert f1 <= f0 + 1e-12

    def test_le_lr_ignore_angle_threshold(self, rng):
        for _ in range(10):
            pred, ref = _random_case(rng)
            results = [evaluate(pred, ref, EvalConfig(angle_threshold_deg=th))
                       for th in (10.0, 20.0, 40.0)]
            les = {r[2] for r in results}
            lrs = {r[3] for r in results}
            assert len(les) == 1 and len(lrs) == 1

    def test_oracle_agreement(self, rng):
        for _ in range(50):
            pred, ref = _random_case(rng)
            got = evaluate(pred, ref)
            (er, f, le, lr), _counts = evaluate_oracle(pred, ref)
            assert got[0] == pytest.approx(er, abs=1e-12)
            assert got[1] == pytest.approx(f, abs=1e-12)
            assert got[2] == pytest.approx(le, abs=1e-9)
            assert got[3] == pytest.approx(lr, abs=1e-12)


class TestAccumulator:
    def test_merge_commutative_associative(self, rng):
        pairs = [_random_case(rng) for _ in range(3)]
        accs = [accumulate(p, r) for p, r in pairs]
        a, b, c = accs
        ab_c = a.merge(b).merge(c)
        c_ba = c.merge(b.merge(a))
        assert ab_c == c_ba

    def test_counters_non_negative(self, rng):
        pred, ref = _random_case(rng)
        acc = accumulate(pred, ref)
        assert min(acc.tp, acc.fp, acc.fn, acc.matched, acc.n_ref) >= 0
        assert acc.tp <= acc.matched


class TestSeldScore:
    def test_perfect_and_worst(self):
        assert seld_score(0.0, 1.0, 0.0, 1.0) == 0.0
        assert seld_score(1.0, 0.0, 180.0, 0.0) == 1.0

    def test_published_baseline_numbers(self):
        # 0.73, 30.7 %, 24.5 deg, 40.5 % -> (0.73 + 0.693 + 24.5/180 + 0.595)/4
        got = seld_score(0.73, 0.307, 24.5, 0.405)
        assert got == pytest.approx((0.73 + 0.693 + 24.5 / 180.0 + 0.595) / 4.0, abs=1e-12)
        assert got == pytest.approx(0.5385, abs=1e-4)


class TestCorpus:
    def _write_corpus(self, tmp_path, rng, n_files=3):
        pred_dir = tmp_path / "pred"
        ref_dir = tmp_path / "ref"
        pred_dir.mkdir()
        ref_dir.mkdir()
        for i in range(n_files):
            pred, ref = _random_case(rng)
            write_metadata(pred, pred_dir / f"clip{i}.csv")
            write_metadata(ref, ref_dir / f"clip{i}.csv")
        return pred_dir, ref_dir

    def test_single_file_equals_evaluate(self, tmp_path, rng):
        pred, ref = _random_case(rng)
        (tmp_path / "p").mkdir()
        (tmp_path / "r").mkdir()
        write_metadata(pred, tmp_path / "p" / "a.csv")
        write_metadata(ref, tmp_path / "r" / "a.csv")
        report = evaluate_corpus(tmp_path / "p", tmp_path / "r", EvalConfig(), 3)
        assert report.overall == evaluate(pred, ref)

    def test_duplication_invariance(self, tmp_path, rng):
        pred_dir, ref_dir = self._write_corpus(tmp_path, rng)
        base = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3).overall
        for src in sorted(pred_dir.glob("*.csv")):
            (pred_dir / ("dup_" + src.name)).write_bytes(src.read_bytes())
        for src in sorted(ref_dir.glob("*.csv")):
            (ref_dir / ("dup_" + src.name)).write_bytes(src.read_bytes())
        doubled = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3).overall
        assert doubled == pytest.approx(base, abs=1e-12)

    def test_missing_counterpart(self, tmp_path, rng):
        pred_dir, ref_dir = self._write_corpus(tmp_path, rng)
        (pred_dir / "extra.csv").write_text("")
        with pytest.raises(ValidationError, match="extra.csv"):
            evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3)
        report = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3,
                                 allow_missing=True)
        assert report.missing == ["extra.csv"]

    def test_empty_corpus(self, tmp_path):
        (tmp_path / "p").mkdir()
        (tmp_path / "r").mkdir()
        with pytest.raises(ValidationError):
            evaluate_corpus(tmp_path / "p", tmp_path / "r", EvalConfig(), 3)

    def test_parallel_matches_serial(self, tmp_path, rng):
        pred_dir, ref_dir = self._write_corpus(tmp_path, rng, n_files=6)
        serial = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3, jobs=1)
        parallel = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3, jobs=4)
        assert serial.overall == parallel.overall
        assert serial.per_file == parallel.per_file

    def test_report_csv(self, tmp_path, rng):
        pred_dir, ref_dir = self._write_corpus(tmp_path, rng)
        report = evaluate_corpus(pred_dir, ref_dir, EvalConfig(), 3)
        out = tmp_path / "report.csv"
        report.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "file,er,f,le_deg,lr,seld"
        assert lines[-1].startswith("OVERALL,")
        assert "SELD" in report.format_table()
