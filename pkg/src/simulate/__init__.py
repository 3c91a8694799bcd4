"""
Discrete-event simulation of PRAC and its baselines, plus closed forms.
"""
from .delays import build_delay_model, sample_packet_service, sample_transmission, scenario_lambdas
from .engine import run_adaptive, run_c3p, run_gc3p, run_prac, simulate_protocol
from .staircase import threshold_completion_time, run_staircase, staircase_time
from .theory import (
    optimal_d,
    prac_completion_estimate,
    config_completion_estimate,
    config_gap_bound,
    staircase_gap_bound,
)
from .batch import batch as run_batch, parse_sweep, run_sweep, summarize

__all__ = [
    # Delays
    "build_delay_model",
    "sample_packet_service",
    "sample_transmission",
    "scenario_lambdas",
    # Schemes
    "run_adaptive",
    "run_c3p",
    "run_gc3p",
    "run_prac",
    "simulate_protocol",
    "threshold_completion_time",
    "run_staircase",
    "staircase_time",
    # Closed forms
    "optimal_d",
    "prac_completion_estimate",
    "config_completion_estimate",
    "config_gap_bound",
    "staircase_gap_bound",
    # Batches
    "run_batch",
    "parse_sweep",
    "run_sweep",
    "summarize",
]
