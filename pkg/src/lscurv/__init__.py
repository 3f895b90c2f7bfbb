"""Hybrid numerical/neural curvature estimation for 2D level-set interfaces."""

from .bench import ErrorStats, error_stats, relative_norms
from .datagen import (
    Dataset,
    Sample,
    bin_balance,
    generate_circle_dataset,
    generate_sine_dataset,
    split,
)
from .grid import (
    Grid,
    LevelSetField,
    Stencil9,
    compound_numerical,
    interface_nodes,
    numerical_curvature_field,
    project_to_interface,
    reinitialize,
    stencil_extract,
)
from .hybrid import HybridSolver, estimate, estimate_batch
from .interfaces import (
    CircleInterface,
    ClosestPointResult,
    RoseInterface,
    SineInterface,
    circle_level_set,
    global_to_local,
    rose_closest_point,
    rose_curvature,
    rose_level_set,
    sine_closest_point,
    sine_curvature,
    sine_level_set,
)
from .neural import (
    MlpArchitecture,
    MlpModel,
    TrainConfig,
    TrainHistory,
    backward,
    forward,
    param_count,
    train,
)
from .preprocess import PcaParams, fit_pca, fit_standardization, load_pca, save_pca, transform

__version__ = "0.1.0"
