"""Simulation and analysis of heralded single-photon OAM thermal states."""

__version__ = "0.1.0"

from .analysis import (OamSpectrum, ThermalFit, fit_thermal, kl_divergence, mean_energy,
                       partition_function, poisson_errors, thermal_pdf)
from .detection import (CoherentState, DetectorConfig, MaskOp, aperture_efficiency,
                        coherent_thermal_state, heralded_spectrum, heralded_state,
                        mask_shift_detection, sample_counts, thermal_superposition_mask)
from .lg_modes import (GridSpec, TransverseField, apply_phase, azimuthal_decompose,
                       default_grid, evaluate_lg, overlap, spiral_phase)
from .source import (JointAmplitudes, joint_amplitudes_overlap, joint_amplitudes_thermal,
                     reduced_spectrum)
from .turbulence import (CrosstalkMatrix, PhaseScreen, TurbulenceParams, crosstalk_matrix,
                         ensemble_average, generate_phase_screen, propagate_coherent,
                         propagate_incoherent)
