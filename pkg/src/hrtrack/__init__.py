"""Heart-rate tracking from wrist PPG with a discrete-state Markov filter."""

from .errors import (
    BeliefCollapseError,
    ConfigError,
    DataError,
    DecodeFailureError,
    DomainError,
    FormatError,
    HrTrackError,
    InsufficientDataError,
    NumericError,
    ParameterError,
    RangeError,
    ValidationError,
)
from .grid import (
    BinDistribution,
    DistStats,
    HrGrid,
    dist_stats,
    gaussian_label,
    upsample,
)
from .transition import (
    TransitionModel,
    discretize_transition,
    fit_transition,
    load_transition,
    save_transition,
)
from .frontend import (
    RawSession,
    SignalWindow,
    bandpass,
    make_windows,
    resample,
    zscore,
)
from .emission import (
    EmissionSeries,
    EmissionSource,
    SpectralEmission,
    emissions_from_windows,
    load_emissions,
    save_emissions,
    spectral_emission,
)
from .inference import (
    BeliefTrace,
    filter_beliefs,
    filter_stream,
    forward_step,
    viterbi,
)
from .evaluation import (
    PredictionRecord,
    calibration_curve,
    grouped_mape,
    mae_by_session,
    nll,
    rejection_sweep,
)
from .synthetic import SynthConfig, synth_hr_walk, synth_session
from .sessionio import load_session, save_session

__version__ = "0.1.0"
