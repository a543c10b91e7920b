"""Impulse-response-simulation augmentation: segment mining, beamforming,
room simulation, FOA encoding, and clip synthesis."""

from .beamform import BeamformResult, CgmmFit, cgmm_em, cgmm_mvdr
from .pipeline import (
    ExtractedSegment,
    extract_directory,
    load_segment_pool,
    read_sidecar,
    read_verdicts,
    simulate_directory,
    write_verdict_template,
)
from .room import (
    RoomSamplerConfig,
    RoomSpec,
    auto_max_order,
    image_source_positions,
    sabine_absorption,
    sample_room,
    schroeder_t60,
)
from .segments import (
    EigenVerdict,
    SegmentCandidate,
    extract_segments,
    stage1_filter,
    stage2_eigen_filter,
)
from .simulate import FoaRirSet, encode_foa, simulate_capsule_rirs, simulate_foa_rirs
from .sphere import ArrayModel, real_sh_matrix, rigid_sphere_mode_strength
from .synth import synthesize

__all__ = [
    "ArrayModel", "BeamformResult", "CgmmFit", "EigenVerdict", "ExtractedSegment",
    "FoaRirSet", "RoomSamplerConfig", "RoomSpec", "SegmentCandidate",
    "auto_max_order", "cgmm_em", "cgmm_mvdr", "encode_foa", "extract_directory",
    "extract_segments", "image_source_positions", "load_segment_pool",
    "read_sidecar", "read_verdicts", "real_sh_matrix", "rigid_sphere_mode_strength",
    "sabine_absorption", "sample_room", "schroeder_t60", "simulate_capsule_rirs",
    "simulate_directory", "simulate_foa_rirs", "stage1_filter",
    "stage2_eigen_filter", "synthesize", "write_verdict_template",
]
