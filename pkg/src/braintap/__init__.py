"""BrainTAP: dual-modality brain-network transformer with adaptive mutual
distillation and selective prior fusion."""

from .config import TrainConfig
from .data import (
    CohortManifest,
    PriorSet,
    Subject,
    derive_free_mask,
    generate_synthetic_cohort,
    load_cohort,
)
from .model import BrainTAP, ForwardResult
from .pipeline import EvalReport, auc, run_ablation, total_loss, train

__version__ = "0.1.0"

__all__ = [
    "BrainTAP", "CohortManifest", "EvalReport", "ForwardResult", "PriorSet",
    "Subject", "TrainConfig", "auc", "derive_free_mask",
    "generate_synthetic_cohort", "load_cohort", "run_ablation", "total_loss",
    "train",
]
