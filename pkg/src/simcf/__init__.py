"""Simulation and sum-rate optimisation for SIM-aided cell-free massive MIMO downlinks."""

from .assoc import aga, association_cost, brute_force_assoc, distance_tensor, nua
from .channel import build_correlation, build_propagation, compute_cascade, effective_channel, sample_channels
from .driver import SchemeId, monte_carlo, run_scheme
from .rate import build_stacked, sinr, sum_rate
from .scenario import ScenarioConfig, build_scenario, noise_power, path_loss, rng_stream

__version__ = "0.1.0"
