"""Numpy implementation of the 1-D convolutional severity classifier."""

from .layers import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    LayerSpec,
    MaxPool1D,
    ReLU,
    ShapeMismatch,
    build_layer,
    conv1d,
    conv1d_input_grad,
    conv_output_length,
    dense,
    dropout,
    flatten,
    maxpool1d,
    relu,
)
from .network import (
    ActivationTrace,
    GradientSet,
    Network,
    Prediction,
    StaleTrace,
    make_default_network,
    softmax,
)
from .train import (
    Adam,
    DivergedTraining,
    EpochStats,
    GridSearchResult,
    InsufficientData,
    TrainConfig,
    cross_entropy,
    grid_search,
    train,
)
from .checkpoint import (
    BadMagic,
    CheckpointError,
    ChecksumMismatch,
    TruncatedFile,
    VersionMismatch,
    load_checkpoint,
    save_checkpoint,
)
from .evaluate import (
    ClassificationReport,
    ClassStats,
    classification_report,
    confusion_matrix,
    evaluate_windows,
    format_report,
    predict_batch,
    report_to_dict,
    standardize_window,
    weighted_f1,
    windows_to_arrays,
)
from .gradcheck import finite_difference_grad, max_relative_error

__all__ = [name for name in dir() if not name.startswith("_")]
