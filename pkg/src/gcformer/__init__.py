"""Global-local long-horizon forecasting with long convolution kernels."""

from .config import RunConfig, load_config, read_config
from .data import (
    ForecastDataset,
    Series,
    WindowedDataset,
    inject_noise,
    load_csv,
    sliding_windows,
    split_712,
    synth_generate,
    write_csv,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DatasetNotFoundError,
    GCFormerError,
    InvalidArgumentError,
    InvalidStateError,
    MalformedRowError,
    NonMonotoneTimestampError,
    NonNumericCellError,
    NumericError,
)
from .kernels import KernelSpec, kernel_basis, materialize_kernel, param_count
from .legendre import legt_matrices, legt_project, legt_reconstruct, legt_system, ssm_recurrence
from .model import GCformerModel, ModelConfig, revin_denormalize, revin_normalize
from .numerics import causal_convolve, circular_convolve
from .theory import column_selection_check, noise_accumulation
from .training import AdamState, TrainConfig, TrainReport, adam_step, evaluate, mae, mse, train

__version__ = "0.1.0"
