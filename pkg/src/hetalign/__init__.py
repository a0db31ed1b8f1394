"""Alignment of attributed heterogeneous social networks via synergistic partition."""

from .graph import AlignedPair, HeterogeneousNetwork, load_aligned_pair, load_network
from .pipeline import PipelineConfig, generate_synthetic, run_pipeline

__all__ = [
    "AlignedPair",
    "HeterogeneousNetwork",
    "PipelineConfig",
    "generate_synthetic",
    "load_aligned_pair",
    "load_network",
    "run_pipeline",
]
__version__ = "0.1.0"
