"""Waiting-time bounds and simulation for fork-join queues with Markov-modulated workloads."""
from .bounds import BoundReport, blocking_bound, compute_bound, decay_rate, work_conserving_bound
from .calibrate import FittedMmpp, TraceCounts, fit_mmpp, generate_mmpp_counts
from .chain import ModulatingChain, stationary_distribution, validate_chain
from .kernel import TransformedKernel, build_blocking_kernel, build_server_kernel
from .provisions import compare_provisions, random_provision, reactive_provision
from .simulator import SimulationConfig, SimulationOutcome, simulate
from .spectral import normalize_eigenvector, perron_eigenpair
from .workload import Discipline, WorkloadSpec, alpha_max_exp_mean, beta_max_exp_mgf, stability_check

__all__ = [
    "BoundReport", "Discipline", "FittedMmpp", "ModulatingChain", "SimulationConfig", "SimulationOutcome",
    "TraceCounts", "TransformedKernel", "WorkloadSpec", "alpha_max_exp_mean", "beta_max_exp_mgf",
    "blocking_bound", "build_blocking_kernel", "build_server_kernel", "compare_provisions", "compute_bound",
    "decay_rate", "fit_mmpp", "generate_mmpp_counts", "normalize_eigenvector", "perron_eigenpair",
    "random_provision", "reactive_provision", "simulate", "stability_check", "stationary_distribution",
    "validate_chain", "work_conserving_bound",
]
