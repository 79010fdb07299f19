"""Gradual domain adaptation with self-training and dynamic loss weighting."""
from .adapt import AdaptConfig, AdaptTrace, direct_adapt, gst_adapt, phi_step, stdw_adapt
from .domains import (
    Domain, DomainSequence, gen_intensity_shift, gen_rotating_moons, load_idx_images,
    make_rotated_sequence, partition_batches, rotate_flat_images,
)
from .harness import ExperimentConfig, RunReport, ablate_schedules, run_experiment, sweep_intermediates
from .lyapunov import lyapunov_check
from .metrics import evaluate
from .nn_core import (
    Model, OptimState, forward, gradient_check, init_model, load_model, model_from_bytes,
    model_to_bytes, save_model,
)
from .schedule import build_pair_plan, make_rho_schedule

__version__ = "0.1.0"
