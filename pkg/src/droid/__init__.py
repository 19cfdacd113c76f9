"""Event-driven simulation of coupled ring-oscillator Ising machines."""

from .analysis import Histogram, SolutionSample, emd_1d, normalize_and_bin, phase_snapshots
from .ising import (CouplingMatrix, brute_force_ground_state, hamiltonian,
                    load_problem, normalize_spins, problem_hash, random_problem,
                    save_problem)
from .netlist import (Netlist, build_a2a, build_ring_pair, delay_bounds,
                      dump_netlist, predecessor, ring_pair_matrix)
from .phase import (PhaseState, dt_phase_step, genadler_step, solve_phases,
                    spins_from_phases, tanh_coupling)
from .sim import (Event, SimConfig, SimResult, assign_spins, check_sync,
                  look_back, process_event, simulate, simulate_debug)
from .timing import (SurrogateParams, TimingFile, characterize_surrogate,
                     load_timing, lookup_coupled, lookup_uncoupled, save_timing)

__version__ = "0.1.0"
