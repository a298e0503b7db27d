"""Exact relaxation dynamics of a closed spin ladder vs a birth-death Fokker-Planck model.

The package builds the fixed-magnetization sector of an anisotropic two-beam
spin ladder, evolves pure and mixed states exactly, and compares the motion
of the beam magnetization difference against a nine-state birth-death master
equation, including the second-order projection-operator rates that justify
the stochastic description.
"""

from .ladder import (LadderConfig, SectorBasis, SparseOperator, XProjector, apply,
                     build_basis, build_h0, build_hamiltonian, build_projectors,
                     build_v, build_x_observable, subspace_dimension)
from .spectral import (ChainFactorizedBasis, DimensionBudgetError, RotatedBlock,
                       SpectralDecomposition, WindowProjector, chain_factorize_h0,
                       diagonalize_dense, dirac_rotate_v_block, window_projector)
from .propagation import (MixedEnsemble, ObservableSeries, PropagationError,
                          Propagator, WindowMixedRep, diagonal_ensemble,
                          evolve_series, evolve_window_mixed, propagate)
from .stochastic import (DistributionSeries, FpeCoefficients, RateTable,
                         evolve_master, fpe_coefficients, master_generator, moments,
                         naive_rates, stationary_distribution)
from .tcl import (CorrelationFunction, GammaFit, InitialValueReport, PlateauError,
                  TclRates, TclRateSet, adjacent_correlations, build_rate_set,
                  check_initial_value, correlation_function, evolve_tcl_master,
                  fit_gamma, tcl2_rates)
from .states import (InitialStateSpec, beam_cut_entropy_bits, random_entangled_state,
                     random_product_state, window_mixed_state)
from .analysis import (BlockStructureReport, CompareReport, DeltaReport, EthReport,
                       block_structure, compare_report, delta_metric, eth_diagonals)
from .runio import ConfigError, RunConfig, parse_config

__version__ = "0.1.0"
