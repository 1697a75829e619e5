"""Synthetic experiments, file formats and the command-line interface."""

from robpca.harness.config import ExperimentConfig, config_from_mapping, load_config
from robpca.harness.experiments import (
    ComparisonReport,
    CoverageReport,
    clopper_pearson,
    project_data,
    run_comparison,
    run_coverage,
    run_trial,
)
from robpca.harness.generators import generate_sample, population_moments, trial_seed
