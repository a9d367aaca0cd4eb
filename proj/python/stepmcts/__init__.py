"""MCTS step scoring and self-training on a toy arithmetic domain."""

from ._core import (
    FEATURE_DIM,
    ArithmeticDomain,
    Checkpoint,
    ConfigError,
    EvalResult,
    ExperimentConfig,
    Family,
    MissingArtifact,
    Problem,
    TrainingExample,
    __version__,
    config_keys,
    dpo_loss,
    dump_config,
    evaluate,
    generate_dataset,
    generate_problems,
    load_checkpoint,
    load_config,
    parse_config,
    run_command,
    run_search,
    save_checkpoint,
    score_children,
    train_iteration,
    ucb_value,
    weighted_nll_kl_grad,
    weighted_nll_kl_loss,
    zeros,
)

__all__ = [
    "FEATURE_DIM",
    "ArithmeticDomain",
    "Checkpoint",
    "ConfigError",
    "EvalResult",
    "ExperimentConfig",
    "Family",
    "MissingArtifact",
    "Problem",
    "TrainingExample",
    "config_keys",
    "dpo_loss",
    "dump_config",
    "evaluate",
    "generate_dataset",
    "generate_problems",
    "load_checkpoint",
    "load_config",
    "parse_config",
    "run_command",
    "run_search",
    "save_checkpoint",
    "score_children",
    "train_iteration",
    "ucb_value",
    "weighted_nll_kl_grad",
    "weighted_nll_kl_loss",
    "zeros",
]
