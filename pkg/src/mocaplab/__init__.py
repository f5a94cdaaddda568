"""Markerless model-based 3D human pose tracking.

An articulated 3D body model is rendered into calibrated virtual cameras and
compared against silhouette and edge features extracted from the real (or
synthetic) views; particle swarm optimization or a particle filter searches
the pose space frame by frame.
"""

from . import geometry, imaging, objective, render
from .objective import BatchEvaluator, FitnessComponents, ObjectiveConfig, evaluate_batch
from .camera import BehindCamera, TsaiCamera, load_rig, save_rig
from .optimize import RngPool, TrackerConfig, pf_track_frame, pso_track_frame
from .pipeline import (
    FeatureConfig,
    bench,
    default_ring_rig,
    evaluate_run,
    perf_metrics,
    synth_generate,
    track_sequence,
)
from .skeleton import Bone, FlatPart, SkeletonModel, default_model, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "BehindCamera",
    "TsaiCamera",
    "load_rig",
    "save_rig",
    "Bone",
    "FlatPart",
    "SkeletonModel",
    "default_model",
    "load_model",
    "save_model",
    "BatchEvaluator",
    "FitnessComponents",
    "ObjectiveConfig",
    "objective",
    "evaluate_batch",
    "optimize",
    "pipeline",
    "RngPool",
    "TrackerConfig",
    "pso_track_frame",
    "pf_track_frame",
    "FeatureConfig",
    "default_ring_rig",
    "synth_generate",
    "track_sequence",
    "evaluate_run",
    "perf_metrics",
    "bench",
    "geometry",
    "imaging",
    "render",
    "__version__",
]
