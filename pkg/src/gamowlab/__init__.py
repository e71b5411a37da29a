"""Resonance decay with Gamow states, pole expansions and decoherent histories.

Modules by topic:

``resonance_model``  rational S-matrix models and pole search
``wavefunctions``    energy wavefunctions and the Hardy-class check
``gamow_core``       Gamow states, semigroup evolution, pole/background expansion
``histories``        time-ordered projector chains
``kaon``             decay-vertex Monte Carlo and lifetime fits
``cli``              command-line driver
"""

__version__ = "0.1.0"

# public API re-exports
# flake8: noqa
from .errors import *  # noqa: F401,F403
from .gamow_core import (Decomposition, EvolutionResult, GamowState, background_integral,
                         born_limit_check, conjugate_semigroup_evolve, decay_probability,
                         decay_rate, decompose, gamow_energy_density, hegerfeldt_demo,
                         semigroup_evolve, survival_amplitude_exact)
from .histories import (DensityOperator, Hamiltonian, HistoryChain, ProjectorFamily,
                        chain_probability, effective_density, evolve_projector,
                        exhaustive_scan, single_probability)
from .kaon import (BeamConfig, CountingHistogram, DecayEvent, FitResult, fit_lifetime,
                   histogram, sample_decays, to_lab_distance)
from .resonance_model import ResonancePole, SMatrixModel, eval_s_matrix, find_poles
from .wavefunctions import EnergyWaveFunction, eval_wavefunction, hardy_check
