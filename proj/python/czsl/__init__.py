from ._czsl import (
    balanced_accuracy,
    conditional_hsic,
    generate,
    harmonic_mean,
    hsic_linear,
    recover_cores,
    run_experiment,
    summary_csv_header,
)

__all__ = [
    "balanced_accuracy",
    "conditional_hsic",
    "generate",
    "harmonic_mean",
    "hsic_linear",
    "recover_cores",
    "run_experiment",
    "summary_csv_header",
]
