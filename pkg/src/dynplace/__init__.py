"""Dynamic sensor placement for time-varying graph signals.

Sensors sample a graph signal at K of N nodes, the rest is reconstructed by
subspace projection onto a dictionary learned online from past
reconstructions, and sensors move each step inside their graph Voronoi
regions to maximize the D-optimal gain.
"""
from ._accel import numba_enabled, use_numba
from .dictlearn import LearnerState, learn_step, soft_threshold, update_coefficients, update_dictionary
from .experiment import ExperimentConfig, RunRecord, ingest_grid_csv, run_dynamic, run_experiment, run_static, sweep_k
from .filters import FilterSpec, chebyshev_filter_apply, exact_filter_matrix, sensing_matrix
from .graph import (
    Graph,
    Spectrum,
    gft,
    hop_distances,
    igft,
    knn_graph,
    laplacian,
    random_sensor_graph,
    spectrum,
    voronoi_partition,
)
from .placement import PlacementState, distributed_gap_check, psi_score, relocate_sensor, step
from .sampling import SamplingOperator, build_Z, greedy_select, reconstruct, sample
from .signals import BandlimitedModel, PiecewiseConstantModel, add_noise, bl_signal, pc_signal

__version__ = "0.1.0"
