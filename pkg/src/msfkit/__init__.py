"""Multi-scale feature pooling and kernel-fusion classification toolkit."""

from .errors import (
    CacheInvalidError,
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateSampleError,
    FormatError,
    ManifestError,
)
from .featmap import (
    GRAY_WEIGHTS,
    ExtractorSpec,
    FeatureMap,
    Image,
    LayerSpec,
    ScaleSet,
    extract,
    output_side,
    warp,
)
from .kernels import (
    GramMatrix,
    KernelSpec,
    SimplexWeights,
    combine,
    gram,
    kernel_rows,
    normalize_gram,
)
from .mkl import MklModel, MklProblem, mkl_gradient, mkl_train, outer_objective
from .pipeline import (
    ConfusionMatrix,
    Dataset,
    ExperimentReport,
    FitConfig,
    OvrModel,
    SplitPlan,
    evaluate,
    make_splits,
    predict,
    train_ovr,
)
from .spp import Descriptor, PyramidSpec, descriptor_length, pool_windows, spp_pool, window_geometry
from .svm import SvmModel, TrainSet, decision, qp_oracle, svm_solve

__version__ = "0.1.0"

__all__ = [
    "CacheInvalidError",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DegenerateSampleError",
    "FormatError",
    "ManifestError",
    "GRAY_WEIGHTS",
    "ExtractorSpec",
    "FeatureMap",
    "Image",
    "LayerSpec",
    "ScaleSet",
    "extract",
    "output_side",
    "warp",
    "GramMatrix",
    "KernelSpec",
    "SimplexWeights",
    "combine",
    "gram",
    "kernel_rows",
    "normalize_gram",
    "MklModel",
    "MklProblem",
    "mkl_gradient",
    "mkl_train",
    "outer_objective",
    "ConfusionMatrix",
    "Dataset",
    "ExperimentReport",
    "FitConfig",
    "OvrModel",
    "SplitPlan",
    "evaluate",
    "make_splits",
    "predict",
    "train_ovr",
    "Descriptor",
    "PyramidSpec",
    "descriptor_length",
    "pool_windows",
    "spp_pool",
    "window_geometry",
    "SvmModel",
    "TrainSet",
    "decision",
    "qp_oracle",
    "svm_solve",
    "__version__",
]
