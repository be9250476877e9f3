from .compare import ComparisonReport, compare, promotion_percent, score_at, steps_to_match
from .config import (ConfigError, ExperimentConfig, config_from_dict, config_to_dict,
                     dump_config, load_config)
from .run import RunResult, TrainingRun, evaluate, load_run, run_training

__all__ = [
    "ComparisonReport", "compare", "promotion_percent", "score_at", "steps_to_match",
    "ConfigError", "ExperimentConfig", "config_from_dict", "config_to_dict",
    "dump_config", "load_config",
    "RunResult", "TrainingRun", "evaluate", "load_run", "run_training",
]
