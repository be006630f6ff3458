"""Incoherent resonance-fluorescence spectra of a polar two-level system
driven by a commensurable polychromatic field."""
from .analysis import Peak, PeakReport, find_peaks, integrated_intensity
from .errors import (ConfigError, EmptySpectrum, IncommensurableFrequencies, NoConvergence,
                     NumericalError, PolarFluorError, SingularSystem, StepUnderflow,
                     TruncationTooSmall)
from .floquet import HarmonicState, converge_truncation, steady_state
from .model import (AtomParams, DipoleSet, DriveComponent, FrequencyLattice, build_lattice,
                    reduce_dipoles)
from .regression import CorrelationSystem, SpectrumSeries, build_correlation_system, spectrum
from .scenario import ScenarioConfig, load_config, preset, run_scenario, run_sweep

__version__ = "0.1.0"
