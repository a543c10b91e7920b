"""Command-line entry point.

Subcommands cover the full data path: ``features`` (spectral feature
dumps), ``augment`` (waveform mixing, rotations, feature masking), ``irs``
(segment extraction, verdict templates, clip synthesis), ``encode`` /
``decode`` (label grid conversion), ``ensemble`` (manifest-driven output
averaging), ``evaluate`` (corpus metrics with CSV + figure report), and
``selftest``. Structured one-line logs go to stderr; machine-readable
outputs go to the declared paths. Exit codes: 0 ok, 1 validation error,
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, accdoa, augment, dsp, ensemble
from .config import get_float, get_int, get_pair, load_config
from .core import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_LABEL_RATE,
    ToolkitError,
    read_metadata,
    read_wav,
    write_metadata,
    write_wav,
)
from .metrics import EvalConfig, evaluate_corpus
from .spatial import parse_rotation_flag, rotate_foa, rotate_labels

logger = logging.getLogger("seldkit")

_GRID_FORMAT_VERSION = 1
_FEATURE_FORMAT_VERSION = 1


def _log_stage(stage: str, t0: float, **counters) -> None:
    extras = " ".join(f"{k}={v}" for k, v in counters.items())
    logger.info("stage=%s wall_ms=%d %s", stage, int(1000 * (time.time() - t0)), extras)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker pool size for per-file stages")
    parser.add_argument("--config", help="key=value config file (flags override)")


def _load_cfg(args) -> dict:
    return load_config(args.config) if getattr(args, "config", None) else {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seldkit",
        description="Data-path toolkit for frame-wise sound event localization "
                    "and detection systems.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"seldkit {__version__} (grid format v{_GRID_FORMAT_VERSION}, "
                f"feature format v{_FEATURE_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract model-input feature dumps from WAVs")
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["amp_ipd", "pcen_ipd"], default="amp_ipd")
    p.add_argument("--log-amplitude", action="store_true",
                   help="log-compress the amplitude maps")
    _add_common(p)

    p = sub.add_parser("augment", help="augment a labeled dataset")
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--meta-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--emda", action="store_true", help="mix random extra clips")
    p.add_argument("--specaugment", action="store_true",
                   help="also write masked feature dumps")
    p.add_argument("--rotations", default=None,
                   help="all16 | identity | list:i,j,... (rotated dataset copies)")
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)
    _add_common(p)

    irs = sub.add_parser("irs", help="impulse-response-simulation augmentation")
    irs_sub = irs.add_subparsers(dest="irs_command", required=True)

    p = irs_sub.add_parser("extract", help="mine beamformed source segments")
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--meta-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verdicts", help="per-segment class-score CSV (stage-1 filter)")
    p.add_argument("--score-threshold", type=float, default=0.5)
    p.add_argument("--min-frames", type=int, default=5)
    p.add_argument("--max-frames", type=int, default=60)
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)
    _add_common(p)

    p = irs_sub.add_parser("verdicts", help="write a pass-through verdict template")
    p.add_argument("--segments", required=True, help="directory of extracted segments")
    p.add_argument("--out", required=True)
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)

    p = irs_sub.add_parser("simulate", help="synthesize labeled reverberant clips")
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--mode", choices=["eigenmike", "direct-foa"], default="eigenmike")
    p.add_argument("--clip-seconds", type=float, default=10.0)
    p.add_argument("--max-order", default="12",
                   help="image-source reflection order, or 'auto' (60 dB rule, cap 30)")
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)
    _add_common(p)

    p = sub.add_parser("encode", help="metadata CSV -> ACCDOA grid file")
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=None,
                   help="grid length (defaults to the last annotated frame + 1)")
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)

    p = sub.add_parser("decode", help="ACCDOA grid file -> metadata CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.3)

    p = sub.add_parser("ensemble", help="average model outputs per a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="corpus metrics for prediction/reference CSVs")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="report directory (CSV + figure)")
    p.add_argument("--threshold-deg", type=float, default=20.0)
    p.add_argument("--segment-frames", type=int, default=10)
    p.add_argument("--class-count", type=int, default=DEFAULT_CLASS_COUNT)
    p.add_argument("--allow-missing", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)

    sub.add_parser("selftest", help="run the embedded invariant suite")
    return parser


def _cmd_features(args) -> int:
    t0 = time.time()
    audio_dir, out_dir = Path(args.audio_dir), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        raise ToolkitError(f"{audio_dir}: no WAV files")

    def one(path: Path) -> str:
        clip = read_wav(path)
        feats = dsp.extract_features(clip, kind=args.kind,
                                     log_amplitude=args.log_amplitude)
        dsp.write_features(feats, out_dir / (path.stem + ".feat"))
        return path.stem

    from concurrent.futures import ThreadPoolExecutor

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            names = list(pool.map(one, wavs))
    else:
        names = [one(p) for p in wavs]
    _log_stage("features", t0, files=len(names), kind=args.kind)
    return 0


def _cmd_augment(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args)
    audio_dir, meta_dir, out_dir = Path(args.audio_dir), Path(args.meta_dir), Path(args.out)
    if not (args.emda or args.specaugment or args.rotations):
        raise ToolkitError("nothing to do: pass --emda, --specaugment, or --rotations")
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    (out_dir / "metadata").mkdir(parents=True, exist_ok=True)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        raise ToolkitError(f"{audio_dir}: no WAV files")
    pairs = []
    for wav in wavs:
        meta = meta_dir / (wav.stem + ".csv")
        if not meta.exists():
            raise ToolkitError(f"missing metadata for {wav.name}")
        pairs.append((wav, meta))
    emda_cfg = augment.EmdaConfig(
        gain_db=get_pair(cfg, "emda.gain_db", (-12.0, 0.0)),
        eq_freq_hz=get_pair(cfg, "emda.eq_freq_hz", (100.0, 8000.0)),
        eq_gain_db=get_pair(cfg, "emda.eq_gain_db", (-6.0, 6.0)),
        eq_q=get_float(cfg, "emda.eq_q", 1.0),
    )
    sa_cfg = augment.SpecAugmentConfig(
        n_time_masks=get_int(cfg, "specaugment.time_masks", 2),
        max_time_width=get_int(cfg, "specaugment.max_time_width", 64),
        n_freq_masks=get_int(cfg, "specaugment.freq_masks", 2),
        max_freq_width=get_int(cfg, "specaugment.max_freq_width", 16),
        channel_mask_prob=get_float(cfg, "specaugment.channel_mask_prob", 0.1),
    )
    rotations = parse_rotation_flag(args.rotations) if args.rotations else None
    written = 0

    def one(index: int) -> int:
        count = 0
        wav, meta = pairs[index]
        rng = np.random.default_rng(np.random.SeedSequence(entropy=args.seed,
                                                           spawn_key=(index,)))
        clip = read_wav(wav)
        events = read_metadata(meta, args.class_count)
        if args.emda:
            n_extra = int(rng.integers(1, emda_cfg.max_mixed_events + 1))
            picks = rng.integers(0, len(pairs), size=n_extra)
            extras = []
            for pick in picks:
                ew, em = pairs[int(pick)]
                extras.append((read_wav(ew), read_metadata(em, args.class_count)))
            mixed, merged = augment.emda((clip, events), extras, rng, emda_cfg)
            write_wav(mixed, out_dir / "audio" / f"{wav.stem}_emda.wav")
            write_metadata(merged, out_dir / "metadata" / f"{wav.stem}_emda.csv")
            count += 1
        if rotations is not None:
            for r_index, matrix in enumerate(rotations):
                write_wav(rotate_foa(clip, matrix),
                          out_dir / "audio" / f"{wav.stem}_rot{r_index:02d}.wav")
                write_metadata(rotate_labels(events, matrix),
                               out_dir / "metadata" / f"{wav.stem}_rot{r_index:02d}.csv")
                count += 1
        if args.specaugment:
            feats = dsp.extract_features(clip)
            masked = augment.spec_augment_mc(feats, rng, sa_cfg)
            (out_dir / "features").mkdir(exist_ok=True)
            dsp.write_features(masked, out_dir / "features" / f"{wav.stem}_sa.feat")
            count += 1
        return count

    from concurrent.futures import ThreadPoolExecutor

    indices = range(len(pairs))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            written = sum(pool.map(one, indices))
    else:
        written = sum(one(i) for i in indices)
    _log_stage("augment", t0, inputs=len(pairs), outputs=written)
    return 0


def _cmd_irs(args) -> int:
    from . import irs

    t0 = time.time()
    if args.irs_command == "extract":
        segments = irs.extract_directory(
            args.audio_dir, args.meta_dir, args.out,
            class_count=args.class_count, min_len=args.min_frames,
            max_len=args.max_frames, verdicts_path=args.verdicts,
            score_threshold=args.score_threshold, jobs=args.jobs,
        )
        _log_stage("irs.extract", t0, segments=len(segments))
    elif args.irs_command == "verdicts":
        pool = irs.load_segment_pool(args.segments)
        irs.write_verdict_template([seg.segment_id for seg, _ in pool],
                                   args.class_count, args.out)
        _log_stage("irs.verdicts", t0, segments=len(pool))
    elif args.irs_command == "simulate":
        max_order = args.max_order if args.max_order == "auto" else int(args.max_order)
        names = irs.simulate_directory(
            args.segments, args.out, seed=args.seed, count=args.count,
            mode=args.mode, clip_seconds=args.clip_seconds, max_order=max_order,
            class_count=args.class_count, jobs=args.jobs,
        )
        _log_stage("irs.simulate", t0, clips=len(names), mode=args.mode,
                   seed=args.seed)
    return 0


def _cmd_encode(args) -> int:
    events = read_metadata(args.meta, args.class_count)
    frames = args.frames if args.frames is not None else events.n_frames
    grid = accdoa.encode_labels(events, frames=frames, classes=args.class_count)
    accdoa.write_grid(grid, args.out)
    logger.info("stage=encode frames=%d classes=%d", frames, args.class_count)
    return 0


def _cmd_decode(args) -> int:
    grid = accdoa.read_grid(args.grid)
    events = accdoa.decode(grid, args.threshold)
    write_metadata(events, args.out)
    logger.info("stage=decode frames=%d events=%d threshold=%.2f",
                grid.n_frames, len(events), args.threshold)
    return 0


def _cmd_ensemble(args) -> int:
    t0 = time.time()
    report = ensemble.run_manifest(args.manifest, args.out)
    _log_stage("ensemble", t0, members=report["members"], clips=report["clips"],
               threshold=report["threshold"])
    return 0


def _cmd_evaluate(args) -> int:
    t0 = time.time()
    cfg = EvalConfig(angle_threshold_deg=args.threshold_deg,
                     segment_frames=args.segment_frames)
    report = evaluate_corpus(args.pred, args.ref, cfg, args.class_count,
                             allow_missing=args.allow_missing, jobs=args.jobs)
    print(report.format_table())
    er, f, le, lr = report.overall
    print(f"ER {er:.2f}, F {100 * f:.1f}, LE {le:.1f}, LR {100 * lr:.1f}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_csv(out_dir / "report.csv")
        if not args.no_figures:
            from .report import render_metrics_figure

            render_metrics_figure(report, out_dir / "report.png")
    _log_stage("evaluate", t0, files=len(report.per_file),
               missing=len(report.missing))
    return 0


def _cmd_selftest(_args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "features": _cmd_features,
        "augment": _cmd_augment,
        "irs": _cmd_irs,
        "encode": _cmd_encode,
        "decode": _cmd_decode,
        "ensemble": _cmd_ensemble,
        "evaluate": _cmd_evaluate,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except ToolkitError as exc:
        logger.error("error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
