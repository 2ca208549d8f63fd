"""Point cloud denoising by momentum gradient ascent over estimated
gradient fields."""

__version__ = "0.1.0"

from .errors import Diverged, InvalidInput
from .geometry import (
    NeighborGraph,
    NormTransform,
    PointCloud,
    TriMesh,
    build_knn_graph,
    denormalize,
    nearest_surface_point,
    nearest_surface_points,
    normalize,
)
from .io import load_off, load_xyz, save_off, save_xyz
from .noise import NoiseSpec, add_noise, rng_from_seed
from .fields import (
    GradientField,
    MlsField,
    OracleField,
    build_mls_field,
    ensemble_gradient,
    ensemble_gradients,
    parse_provider,
)
from .learned import (
    LearnedField,
    PerceptronParams,
    TrainConfig,
    build_learned_field,
    extract_features,
    load_model,
    save_model,
    train_field,
)
from .solver import AscentConfig, Trajectory, classical_denoise, denoise
from .metrics import MetricReport, chamfer_distance, make_report, point_to_mesh
from .shapes import builtin_mesh, sample_mesh_surface, sample_shape
from .bench import BenchPlan, load_plan, run_benchmark

__all__ = [
    "__version__",
    "AscentConfig",
    "BenchPlan",
    "Diverged",
    "GradientField",
    "InvalidInput",
    "LearnedField",
    "MetricReport",
    "MlsField",
    "NeighborGraph",
    "NoiseSpec",
    "NormTransform",
    "OracleField",
    "PerceptronParams",
    "PointCloud",
    "Trajectory",
    "TrainConfig",
    "TriMesh",
    "add_noise",
    "build_knn_graph",
    "build_learned_field",
    "build_mls_field",
    "builtin_mesh",
    "chamfer_distance",
    "classical_denoise",
    "denoise",
    "denormalize",
    "ensemble_gradient",
    "ensemble_gradients",
    "extract_features",
    "load_model",
    "load_off",
    "load_plan",
    "load_xyz",
    "make_report",
    "nearest_surface_point",
    "nearest_surface_points",
    "normalize",
    "parse_provider",
    "point_to_mesh",
    "rng_from_seed",
    "run_benchmark",
    "sample_mesh_surface",
    "sample_shape",
    "save_model",
    "save_off",
    "save_xyz",
    "train_field",
]
