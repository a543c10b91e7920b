"""Directory-level drivers for the segment-extraction and synthesis stages.

``extract`` mines beamformed mono source segments (WAV + sidecar CSV) from
a labeled FOA dataset; ``simulate`` turns a pool of extracted segments into
new labeled reverberant clips in the dataset layout (audio/ + metadata/).
Both are deterministic for a fixed seed, including under a worker pool:
every independent work unit derives its own generator from (seed, index).
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_LABEL_RATE,
    ValidationError,
    read_metadata,
    read_wav,
    write_metadata,
    write_wav,
)
from .beamform import cgmm_mvdr
from .room import RoomSamplerConfig, sample_room
from .segments import SegmentCandidate, extract_segments, stage1_filter, stage2_eigen_filter
from .simulate import simulate_foa_rirs
from .sphere import ArrayModel
from .synth import synthesize

logger = logging.getLogger(__name__)

_SIDECAR_FIELDS = ["segment_id", "source", "class_id", "azimuth", "elevation",
                   "start_frame", "end_frame", "sample_rate"]


@dataclass(frozen=True)
class ExtractedSegment:
    segment_id: str
    source: str
    class_id: int
    azimuth: int
    elevation: int
    start_frame: int
    end_frame: int
    sample_rate: int


def read_verdicts(path, class_count: int) -> dict[str, np.ndarray]:
    """Verdict CSV: header ``segment_id,score_0,...``; scores in [0, 1]."""
    out: dict[str, np.ndarray] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "segment_id":
            raise ValidationError(f"{path}: expected a verdict header row")
        if len(header) != class_count + 1:
            raise ValidationError(
                f"{path}: {len(header) - 1} score columns for {class_count} classes"
            )
        for row in reader:
            if not row:
                continue
            scores = np.array([float(v) for v in row[1:]])
            if scores.size != class_count or scores.min() < 0 or scores.max() > 1:
                raise ValidationError(f"{path}: bad scores for {row[0]}")
            out[row[0]] = scores
    return out


def write_verdict_template(segment_ids, class_count: int, path) -> None:
    """All-ones verdict file: the pass-through stand-in for a real classifier."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id"] + [f"score_{c}" for c in range(class_count)])
        for seg_id in segment_ids:
            writer.writerow([seg_id] + ["1.0"] * class_count)


def _write_sidecar(path, seg: ExtractedSegment) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SIDECAR_FIELDS)
        writer.writerow([seg.segment_id, seg.source, seg.class_id, seg.azimuth,
                         seg.elevation, seg.start_frame, seg.end_frame, seg.sample_rate])


def read_sidecar(path) -> ExtractedSegment:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        row = next(reader, None)
        if header != _SIDECAR_FIELDS or row is None:
            raise ValidationError(f"{path}: not a segment sidecar file")
    return ExtractedSegment(
        segment_id=row[0], source=row[1], class_id=int(row[2]), azimuth=int(row[3]),
        elevation=int(row[4]), start_frame=int(row[5]), end_frame=int(row[6]),
        sample_rate=int(row[7]),
    )


def extract_directory(audio_dir, meta_dir, out_dir, class_count: int = DEFAULT_CLASS_COUNT,
                      min_len: int = 5, max_len: int = 60,
                      verdicts_path=None, score_threshold: float = 0.5,
                      label_rate: float = DEFAULT_LABEL_RATE,
                      beamform_iters: int = 20, jobs: int = 1) -> list[ExtractedSegment]:
    """Mine beamformed source segments from every WAV/CSV pair.

    Writes ``<segment_id>.wav`` (mono float32) plus ``<segment_id>.csv``
    sidecars into ``out_dir`` and returns the manifest of what was kept.
    """
    audio_dir, meta_dir, out_dir = Path(audio_dir), Path(meta_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        raise ValidationError(f"{audio_dir}: no WAV files")
    verdicts = read_verdicts(verdicts_path, class_count) if verdicts_path else None

    def one(wav_path: Path):
        meta_path = meta_dir / (wav_path.stem + ".csv")
        if not meta_path.exists():
            raise ValidationError(f"missing metadata for {wav_path.name}")
        clip = read_wav(wav_path)
        events = read_metadata(meta_path, class_count)
        candidates = extract_segments(clip, events, min_len, max_len, label_rate,
                                      id_prefix=f"{wav_path.stem}_seg")
        candidates = stage1_filter(candidates, verdicts, score_threshold)
        kept = []
        for cand in candidates:
            verdict = stage2_eigen_filter(clip, cand)
            if not verdict.keep:
                logger.info("drop %s: %s", cand.segment_id, verdict.reason)
                continue
            try:
                beam = cgmm_mvdr(clip, cand, iters=beamform_iters)
            except ValidationError as exc:
                logger.info("drop %s: %s", cand.segment_id, exc)
                continue
            seg = ExtractedSegment(
                segment_id=cand.segment_id, source=wav_path.stem,
                class_id=cand.class_id, azimuth=cand.azimuth, elevation=cand.elevation,
                start_frame=cand.start_frame, end_frame=cand.end_frame,
                sample_rate=clip.sample_rate,
            )
            _write_mono_wav(out_dir / f"{cand.segment_id}.wav", beam.signal,
                            clip.sample_rate)
            _write_sidecar(out_dir / f"{cand.segment_id}.csv", seg)
            kept.append(seg)
        return kept

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(one, wavs))
    else:
        batches = [one(wav_path) for wav_path in wavs]
    segments = [seg for batch in batches for seg in batch]
    logger.info("extract: kept %d segments from %d files", len(segments), len(wavs))
    return segments


def _write_mono_wav(path, signal: np.ndarray, sample_rate: int) -> None:
    from scipy.io import wavfile

    data = np.clip(np.asarray(signal, dtype=np.float64), -1.0, 1.0)
    wavfile.write(str(path), sample_rate, data.astype(np.float32))


def _read_mono_wav(path) -> tuple[np.ndarray, int]:
    from scipy.io import wavfile

    sample_rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValidationError(f"{path}: segment audio must be mono")
    if data.dtype == np.int16:
        data = data / 2.0**15
    elif data.dtype == np.int32:
        data = data / 2.0**31
    return np.asarray(data, dtype=np.float64), int(sample_rate)


def load_segment_pool(segments_dir) -> list[tuple[ExtractedSegment, np.ndarray]]:
    segments_dir = Path(segments_dir)
    pool = []
    for sidecar in sorted(segments_dir.glob("*.csv")):
        seg = read_sidecar(sidecar)
        wav_path = sidecar.with_suffix(".wav")
        if not wav_path.exists():
            raise ValidationError(f"missing audio for segment {seg.segment_id}")
        signal, rate = _read_mono_wav(wav_path)
        if rate != seg.sample_rate:
            raise ValidationError(f"{wav_path}: rate {rate} != sidecar {seg.sample_rate}")
        pool.append((seg, signal))
    if not pool:
        raise ValidationError(f"{segments_dir}: no segment sidecars found")
    return pool


def simulate_directory(segments_dir, out_dir, seed: int, count: int,
                       mode: str = "eigenmike", clip_seconds: float = 10.0,
                       sources_range: tuple[int, int] = (1, 3),
                       max_order="auto",
                       room_config: RoomSamplerConfig | None = None,
                       array: ArrayModel | None = None,
                       class_count: int = DEFAULT_CLASS_COUNT,
                       label_rate: float = DEFAULT_LABEL_RATE,
                       sample_rate: int = 24000, jobs: int = 1) -> list[str]:
    """Synthesize ``count`` labeled clips from a pool of extracted segments.

    Output layout: ``out_dir/audio/clipNNNN.wav`` (float32 FOA) with
    ``out_dir/metadata/clipNNNN.csv``. Byte-reproducible from the seed for
    any worker count.
    """
    pool = load_segment_pool(segments_dir)
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    meta_dir = out_dir / "metadata"
    audio_dir.mkdir(parents=True, exist_ok=True)
    meta_dir.mkdir(parents=True, exist_ok=True)
    room_config = room_config or RoomSamplerConfig()
    clip_len = int(round(clip_seconds * sample_rate))

    def one(index: int) -> str:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(index,)))
        n_sources = int(rng.integers(sources_range[0], sources_range[1] + 1))
        cfg = RoomSamplerConfig(
            rt60_range=room_config.rt60_range,
            length_range=room_config.length_range,
            width_range=room_config.width_range,
            height_range=room_config.height_range,
            n_sources=n_sources,
            array_margin=room_config.array_margin,
            source_margin=room_config.source_margin,
            min_source_distance=room_config.min_source_distance,
            max_attempts=room_config.max_attempts,
        )
        room = sample_room(rng, cfg)
        rirs = simulate_foa_rirs(room, array=array, mode=mode, max_order=max_order,
                                 sample_rate=sample_rate)
        picks = rng.integers(0, len(pool), size=n_sources)
        sources = []
        for pick in picks:
            seg, signal = pool[int(pick)]
            if signal.size > clip_len // 2:
                signal = signal[:clip_len // 2]
            sources.append((signal, seg.class_id))
        clip, events = synthesize(sources, rirs, clip_len, rng,
                                  label_rate=label_rate, class_count=class_count)
        name = f"clip{index:04d}"
        write_wav(clip, audio_dir / f"{name}.wav", bit_depth="float32")
        write_metadata(events, meta_dir / f"{name}.csv")
        return name

    indices = list(range(count))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            names = list(pool_exec.map(one, indices))
    else:
        names = [one(index) for index in indices]
    logger.info("simulate: wrote %d clips to %s", len(names), out_dir)
    return names
