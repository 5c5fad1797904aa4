"""One-dimensional Gross-Pitaevskii dynamics with norm-conserving dissipation."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import (ComplexField, Grid1D, gradient, inner_product, laplacian,
                   mode_amplitude, mode_amplitudes, norm_sq)
from .model import (DynamicsKind, ModelParams, ObservableRecord, current, density,
                    free_energy, gp_operator, observables, project_q,
                    stationarity_residual)
from .dynamics import (EvolutionConfig, LambdaSchedule, MemorySink, auto_dt,
                       evolve, ground_state_ite, ite_direction, rhs,
                       stability_bound, step_rk4)
from .states import (SolitonSpec, ThermalSpec, gray_soliton, plane_wave,
                     thermal_sample, thermalization_check, two_soliton_state,
                     uniform_state)
from .bogoliubov import (DispersionConfig, DispersionPoint, analytic_dispersion,
                         bogoliubov_frequency, linearized_stability_report,
                         measure_dispersion)
from .tracking import find_density_minima, track_solitons
from .io import (SnapshotHeader, emit_heatmap, read_snapshot, write_observables,
                 write_snapshot)
from .config import RunConfig, parse_config
