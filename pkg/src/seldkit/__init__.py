"""seldkit: data-path toolkit for frame-wise sound event localization and
detection systems — FOA audio/label I/O, spectral features, room-simulation
augmentation, output post-processing, ensembling, and joint metrics."""

__version__ = "0.1.0"

from .accdoa import (
    AccdoaGrid,
    Einv2Output,
    decode,
    einv2_to_accdoa,
    encode_labels,
    mse_loss,
    read_grid,
    write_grid,
)
from .core import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_LABEL_RATE,
    Event,
    EventList,
    FoaClip,
    angular_distance,
    azel_to_vec,
    read_metadata,
    read_wav,
    vec_to_azel,
    write_metadata,
    write_wav,
)
from .metrics import EvalConfig, evaluate, evaluate_corpus, seld_score
from .spatial import discrete_rotation_set, rotate_foa, rotate_labels, tta_average

__all__ = [
    "AccdoaGrid", "DEFAULT_CLASS_COUNT", "DEFAULT_LABEL_RATE", "Einv2Output",
    "EvalConfig", "Event", "EventList", "FoaClip", "angular_distance",
    "azel_to_vec", "decode", "discrete_rotation_set", "einv2_to_accdoa",
    "encode_labels", "evaluate", "evaluate_corpus", "mse_loss", "read_grid",
    "read_metadata", "read_wav", "rotate_foa", "rotate_labels", "seld_score",
    "tta_average", "vec_to_azel", "write_grid", "write_metadata", "write_wav",
]
