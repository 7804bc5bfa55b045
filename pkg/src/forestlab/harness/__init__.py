"""Experiment orchestration: configs, paired runs, presets, sweeps, output."""

from forestlab.harness.config import ExperimentConfig, load_config, resolve_mtry
from forestlab.harness.experiment import (ExperimentResult, ReportRow, SweepResult, emit_figure_data,
                                          execute, run_experiment, run_sweep)
from forestlab.harness.presets import PRESET_NAMES, preset_configs, run_table_preset

__all__ = [
    "ExperimentConfig", "ExperimentResult", "PRESET_NAMES", "ReportRow", "SweepResult",
    "emit_figure_data", "execute", "load_config", "preset_configs", "resolve_mtry",
    "run_experiment", "run_sweep", "run_table_preset",
]
