"""Dressed-state NV-center electrometry simulator.

Exact spin-1 dynamics under continuous phase-modulated driving, the
analytic dressed-frame model it is validated against, Ramsey protocol
sampling, spectral/time-domain fitting, and quasi-static electric-noise
dephasing analysis.
"""

from .errors import (
    ConfigError,
    DegenerateDesign,
    EngineMismatch,
    FitFailure,
    InsufficientSpan,
    NonHermitianInput,
    NonUniformGrid,
    NvsimError,
    PerturbationWarning,
    PropagationError,
    RwaHierarchyWarning,
    StepSizeTooCoarse,
)
from .hamiltonians import (
    TWO_PI,
    DriveParameters,
    FieldEnvironment,
    NoisePerturbation,
    NvConstants,
    check_rwa_hierarchy,
    detuning_delta,
    detuning_delta2,
    dressed_hamiltonian,
    drive_hamiltonian,
    frame_transformations,
    lab_hamiltonian,
    rwa_hamiltonian,
    transition_frequencies,
)
from .noise import (
    Delta2Fluctuations,
    DielectricFit,
    DielectricModel,
    GaussianFieldNoise,
    delta2_dephasing_trace,
    dephasing_closed_form,
    effective_dipole,
    ensemble_dephasing_trace,
    fit_dielectric_model,
    fit_pure_inverse,
    noise_ratio,
    t2_star_closed_form,
    t2star_model,
    temperature_budget,
)
from .propagator import PropagationConfig, propagate, propagate_unitary, propagate_with_samples
from .sequences import (
    PulseSpec,
    ShiftPoint,
    closed_form_signal,
    composite_z_pi,
    frequency_shift_scan,
    gate_unitary,
    initialization_chain,
    ramsey_protocol,
    ramsey_signal,
    ramsey_trace,
    readout_chain,
    readout_chain_real,
    u_x,
    u_y,
    u_z_real,
    undersample_period,
    undersampled_trace,
)
from .spectral import (
    DecayFit,
    LorentzianFit,
    PeakFit,
    Spectrum,
    fft_spectrum,
    find_peaks,
    fit_damped_sinusoid,
    fit_lorentzian_peaks,
)
from .spin import (
    BRIGHT,
    DARK,
    KET_MINUS,
    KET_PLUS,
    KET_ZERO,
    SX,
    SY,
    SZ,
    SZ2,
    dressed_basis,
    matrix_exponential,
    spin_operators,
)
from .trace import SignalTrace, load_trace, save_trace

__version__ = "0.1.0"
