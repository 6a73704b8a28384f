"""Cross-spectral iris recognition pipeline.

Eye-color-aware RGB channel selection, circle-based segmentation,
rubber-sheet normalization, two binary iris encoders, masked Hamming
matching with shift compensation, and an all-pairs ROC/EER evaluation
protocol, plus a seeded synthetic multispectral dataset generator.
"""

from . import exceptions
from .encoding import (
    DctPatchEncoder,
    GaborPhaseEncoder,
    code_from_bytes,
    code_to_bytes,
    encode_dct,
    encode_gabor,
    make_encoder,
    read_code,
    write_code,
)
from .evaluation import (
    Comparison,
    DatasetManifest,
    ProtocolResult,
    RocCurve,
    RunSettings,
    ScoreSet,
    build_comparisons,
    compute_roc,
    emit_report,
    load_manifest,
    load_run_settings,
    run_protocol,
)
from .imaging import (
    crop_center,
    default_policy,
    extract_channel,
    load_image,
    load_policy,
    save_image,
    select_channel,
)
from .matching import HammingMatcher, fractional_hd, match_with_shifts
from .normalization import RubberSheetNormalizer, rubber_sheet
from .pipeline import IrisTemplateExtractor
from .segmentation import IrisSegmenter, segment_iris, specular_mask
from .synthdata import (
    GroundTruth,
    SpectralContrastModel,
    generate_dataset,
    generate_identity,
    load_ground_truth,
    render_eye,
)
from .types import (
    ChannelPolicy,
    Circle,
    EyeImage,
    IrisCode,
    MatchScore,
    NormalizedIris,
    SampleMeta,
    SegmentationResult,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelPolicy",
    "Circle",
    "Comparison",
    "DatasetManifest",
    "DctPatchEncoder",
    "EyeImage",
    "GaborPhaseEncoder",
    "GroundTruth",
    "HammingMatcher",
    "IrisCode",
    "IrisSegmenter",
    "IrisTemplateExtractor",
    "MatchScore",
    "NormalizedIris",
    "ProtocolResult",
    "RocCurve",
    "RubberSheetNormalizer",
    "RunSettings",
    "SampleMeta",
    "ScoreSet",
    "SegmentationResult",
    "SpectralContrastModel",
    "build_comparisons",
    "code_from_bytes",
    "code_to_bytes",
    "compute_roc",
    "crop_center",
    "default_policy",
    "emit_report",
    "encode_dct",
    "encode_gabor",
    "exceptions",
    "extract_channel",
    "fractional_hd",
    "generate_dataset",
    "generate_identity",
    "load_ground_truth",
    "load_image",
    "load_manifest",
    "load_policy",
    "load_run_settings",
    "make_encoder",
    "match_with_shifts",
    "read_code",
    "render_eye",
    "rubber_sheet",
    "run_protocol",
    "save_image",
    "segment_iris",
    "select_channel",
    "specular_mask",
    "write_code",
]
