"""roadfeel: generate tactile road-vibration signals from forward road imagery.

The pipeline aligns camera frames with the tire vibrations recorded when the
vehicle later traverses the imaged road segment, trains a conditional latent
diffusion model (1D VAE + conditioned U-Net denoiser) on the aligned pairs,
and evaluates generated signals with distributional, spectral, and downstream
classification metrics. A procedural corpus generator makes the whole loop
runnable on a CPU with no external data.
"""

__version__ = "0.1.0"

from .alignment import (
    AlignedPair,
    AlignmentConfig,
    RtkTrack,
    TactileSignal,
    TactileStream,
    VisualFrame,
    align_batch,
    align_pair,
    arrival_time,
)
from .config import PipelineConfig, config_hash
from .corpus import DatasetManifest, LightCondition, RoadClass, build_corpus, load_pairs
from .diffusion import (
    NoiseSchedule,
    forward_diffuse,
    generate_tactile,
    make_schedule,
    reverse_step,
    sample,
    training_loss,
)
from .metrics import (
    amplitude_range_stats,
    band_energy_ratio,
    build_report,
    fft_spectrum,
    fid,
    rmse,
    spectral_distance,
    spectral_similarity,
)
from .unet import DenoiserConfig, NoiseUnet1d
from .vae import TactileVae, VaeConfig, reparameterize, train_vae
from .vision import extract_features, load_backbone

__all__ = [
    "AlignedPair",
    "AlignmentConfig",
    "DatasetManifest",
    "DenoiserConfig",
    "LightCondition",
    "NoiseSchedule",
    "NoiseUnet1d",
    "PipelineConfig",
    "RoadClass",
    "RtkTrack",
    "TactileSignal",
    "TactileStream",
    "TactileVae",
    "VaeConfig",
    "VisualFrame",
    "align_batch",
    "align_pair",
    "amplitude_range_stats",
    "arrival_time",
    "band_energy_ratio",
    "build_corpus",
    "build_report",
    "config_hash",
    "extract_features",
    "fft_spectrum",
    "fid",
    "forward_diffuse",
    "generate_tactile",
    "load_backbone",
    "load_pairs",
    "make_schedule",
    "reparameterize",
    "reverse_step",
    "rmse",
    "sample",
    "spectral_distance",
    "spectral_similarity",
    "train_vae",
    "training_loss",
]
