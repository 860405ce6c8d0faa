"""Procedural multimodal corpus: road profiles, tire response, textures,
file formats, and dataset assembly."""

from .build import (
    COUNT_PRESETS,
    build_corpus,
    load_pairs,
    make_pair,
    resolve_counts,
    split_sizes,
    synthesize_session,
)
from .formats import (
    DatasetManifest,
    PairRecord,
    read_image,
    read_rtk_csv,
    read_session,
    read_signal,
    read_stream,
    write_image,
    write_rtk_csv,
    write_session,
    write_signal,
    write_stream,
)
from .profiles import (
    CLASS_INDEX,
    CLASS_ORDER,
    DEFAULT_PROFILE_PARAMS,
    LightCondition,
    RoadClass,
    RoadProfile,
    RoadProfileParams,
    displacement_psd,
    synthesize_road_profile,
)
from .textures import TEXTURE_PARAMS, render_texture_image
from .tire import (
    GAIN,
    QUALITY,
    RESONANCE_HZ,
    SENSOR_NOISE_RMS,
    simulate_tire_response,
    tire_filter_coefficients,
)

__all__ = [
    "COUNT_PRESETS",
    "CLASS_INDEX",
    "CLASS_ORDER",
    "DEFAULT_PROFILE_PARAMS",
    "DatasetManifest",
    "GAIN",
    "LightCondition",
    "PairRecord",
    "QUALITY",
    "RESONANCE_HZ",
    "RoadClass",
    "RoadProfile",
    "RoadProfileParams",
    "SENSOR_NOISE_RMS",
    "TEXTURE_PARAMS",
    "build_corpus",
    "displacement_psd",
    "load_pairs",
    "make_pair",
    "read_image",
    "read_rtk_csv",
    "read_session",
    "read_signal",
    "read_stream",
    "render_texture_image",
    "resolve_counts",
    "simulate_tire_response",
    "split_sizes",
    "synthesize_road_profile",
    "synthesize_session",
    "tire_filter_coefficients",
    "write_image",
    "write_rtk_csv",
    "write_session",
    "write_signal",
    "write_stream",
]
