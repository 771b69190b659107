"""Multi-modal person-track clustering via relation distribution representations.

The package groups face, body, and voice clue features into a per-track
multi-modal graph, learns a pairwise scorer over subsampled subgraphs, pools
scores into track-level linkage, and unions tracks into identity clusters.
The flat namespace below re-exports the pieces a caller needs to run the
whole loop programmatically; the ``cluecluster`` console script wraps the
same functions.
"""

from .clustering import ClusterAssignment, LinkageTable, UnionFind, cluster, merge_linkages
from .config import RunConfig, apply_overrides, config_loads, load_config
from .dataio import (
    read_assignment,
    read_checkpoint,
    read_dataset,
    write_assignment,
    write_checkpoint,
    write_dataset,
)
from .distribution import DistributionConfig, compute_distribution, init_distribution
from .errors import ClueClusterError, InvalidInput, IoError, NumericalError
from .graph import Clue, Modality, MultiModalGraph, Track, build_graph
from .metrics import cf, character_pr, nmi, wcp
from .pipeline import (
    apply_load_transforms,
    best_by_nmi,
    evaluate_assignment,
    infer_linkage,
    prepare,
    sweep_rows,
    train_model,
)
from .sampling import SamplerConfig
from .synth import Dataset, NoiseConfig, SynthConfig, angle_for_within_cosine, generate, inject_noise
from .training import TrainerConfig, init_model

__version__ = "0.1.0"

__all__ = [
    "ClueClusterError",
    "ClusterAssignment",
    "Clue",
    "Dataset",
    "DistributionConfig",
    "InvalidInput",
    "IoError",
    "LinkageTable",
    "Modality",
    "MultiModalGraph",
    "NoiseConfig",
    "NumericalError",
    "RunConfig",
    "SamplerConfig",
    "SynthConfig",
    "Track",
    "TrainerConfig",
    "UnionFind",
    "angle_for_within_cosine",
    "apply_load_transforms",
    "apply_overrides",
    "best_by_nmi",
    "build_graph",
    "cf",
    "character_pr",
    "cluster",
    "compute_distribution",
    "config_loads",
    "evaluate_assignment",
    "generate",
    "infer_linkage",
    "init_distribution",
    "init_model",
    "inject_noise",
    "load_config",
    "merge_linkages",
    "nmi",
    "prepare",
    "read_assignment",
    "read_checkpoint",
    "read_dataset",
    "sweep_rows",
    "train_model",
    "wcp",
    "write_assignment",
    "write_checkpoint",
    "write_dataset",
    "__version__",
]
