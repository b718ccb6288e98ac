"""Experiment orchestration: configuration, replication, checks and reports."""

from .checks import IntermediateTrend, intermediate_order_check, topk_comparison
from .config import ExperimentConfig, load_config
from .experiment import SimulationResult, analyze, load_result, run_experiment, simulate_experiment, simulate_intermediate
from .report import CheckRecord, Report, load_report, render_report
from .stats import count_distribution_test, ks_one_sample, ks_two_sample, ks_two_sample_threshold
