"""Quantum-circuit, tensor-network, and classical models for cross-sectional
stock return prediction, with a walk-forward backtest harness."""

from .backtest import (
    BacktestReport,
    Fold,
    FoldResult,
    FoldSchedule,
    Metrics,
    PortfolioRecord,
    build_schedule,
    compute_metrics,
    portfolio_return,
    run_backtest,
    select_top_quintile,
)
from .classical import (
    LinearModel,
    NeuralNet,
    make_nn,
    nn_forward,
    nn_forward_batch,
    nn_gradient,
    nn_parameter_count,
    nn_vjp_batch,
    ols_fit,
)
from .errors import (
    ConfigurationError,
    DataError,
    NumericalError,
    QxsError,
    TrainingDiverged,
    UsageError,
    ValidationError,
)
from .gradcheck import (
    finite_difference_gradient,
    mps_gradient_check,
    nn_gradient_check,
    qcl_gradient_check,
)
from .mps import (
    MpsWeights,
    init_mps,
    mps_forward,
    mps_forward_batch,
    mps_gradient,
    mps_parameter_count,
    mps_to_full_tensor,
    mps_vjp_batch,
)
from .panel import (
    DEFAULT_FEATURES,
    CrossSection,
    FeatureSpec,
    PanelData,
    SyntheticSpec,
    beta_feature,
    compute_forward_returns,
    generate_synthetic,
    load_benchmark_csv,
    load_panel_csv,
    momentum,
    month_index,
    month_range,
    month_str,
    rank_transform,
    save_benchmark_csv,
    save_panel_csv,
    size_feature,
)
from .qcl import (
    QclModel,
    encode,
    init_qcl,
    qcl_forward,
    qcl_forward_batch,
    qcl_gradient,
    qcl_vjp_batch,
    shift_rule_sign,
)
from .statevector import (
    DenseUnitary,
    RandomHamiltonianSpec,
    StateVector,
    apply_rotation,
    apply_unitary,
    expectation_z,
    exponentiate_hamiltonian,
    hamiltonian_matrix,
    init_zero_state,
    make_random_hamiltonian,
)
from .training import (
    AdamState,
    LinearSpec,
    MpsSpec,
    NeuralNetSpec,
    QclSpec,
    RandomScoreSpec,
    TrainConfig,
    TrainedPredictor,
    adam_step,
    fit,
    mse,
    sgd_step,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BacktestReport",
    "ConfigurationError",
    "CrossSection",
    "DEFAULT_FEATURES",
    "DataError",
    "DenseUnitary",
    "FeatureSpec",
    "Fold",
    "FoldResult",
    "FoldSchedule",
    "LinearModel",
    "LinearSpec",
    "Metrics",
    "MpsSpec",
    "MpsWeights",
    "NeuralNet",
    "NeuralNetSpec",
    "NumericalError",
    "PanelData",
    "PortfolioRecord",
    "QclModel",
    "QclSpec",
    "QxsError",
    "RandomHamiltonianSpec",
    "RandomScoreSpec",
    "StateVector",
    "SyntheticSpec",
    "TrainConfig",
    "TrainedPredictor",
    "TrainingDiverged",
    "UsageError",
    "ValidationError",
    "adam_step",
    "apply_rotation",
    "apply_unitary",
    "beta_feature",
    "build_schedule",
    "compute_forward_returns",
    "compute_metrics",
    "encode",
    "expectation_z",
    "exponentiate_hamiltonian",
    "finite_difference_gradient",
    "fit",
    "generate_synthetic",
    "hamiltonian_matrix",
    "init_mps",
    "init_qcl",
    "init_zero_state",
    "load_benchmark_csv",
    "load_panel_csv",
    "make_nn",
    "make_random_hamiltonian",
    "momentum",
    "month_index",
    "month_range",
    "month_str",
    "mps_forward",
    "mps_forward_batch",
    "mps_gradient",
    "mps_gradient_check",
    "mps_parameter_count",
    "mps_to_full_tensor",
    "mps_vjp_batch",
    "mse",
    "nn_forward",
    "nn_forward_batch",
    "nn_gradient",
    "nn_gradient_check",
    "nn_parameter_count",
    "nn_vjp_batch",
    "ols_fit",
    "portfolio_return",
    "qcl_forward",
    "qcl_forward_batch",
    "qcl_gradient",
    "qcl_gradient_check",
    "qcl_vjp_batch",
    "rank_transform",
    "run_backtest",
    "save_benchmark_csv",
    "save_panel_csv",
    "select_top_quintile",
    "sgd_step",
    "shift_rule_sign",
    "size_feature",
]
