"""Dynamic-connectivity multi-task localization of eloquent cortex.

Thin Python surface over the native core: synthetic cohort generation,
sliding-window connectivity, training, cross-validation and prediction.
"""

from eloc._core import (  # noqa: F401
    ConfigError,
    DataError,
    DimensionError,
    ModelConfig,
    NumericError,
    SynthConfig,
    TrainConfig,
    WindowConfig,
    __version__,
    build_dynamic_connectivity,
    cross_validate,
    generate_cohort,
    predict,
    similarity_matrix,
    simulate,
    task_names,
    train,
)
