"""Triple-quantum excitation of spin-3/2 nuclei: exact propagation and effective Floquet Hamiltonians."""

__version__ = "0.1.0"

from .params import ConfigurationError, ExcitationProfile, ExperimentParams, quad_frequency, rms_deviation, time_grid
from .oracle import DETECTION_SIGN, exact_signal_batch, tq_signal_exact
from .floquet import DegeneracyError, DivergenceWarning, FloquetMatrix, Pass, bch_transform, contact_sequence, default_schedule
from .engines import Engine, parse_engine
from .powder import CrystalSet, classify, generate_crystal_set, hybrid_profile, load_crystal_file, powder_average, save_crystal_file

__all__ = [
    "ConfigurationError",
    "CrystalSet",
    "DETECTION_SIGN",
    "DegeneracyError",
    "DivergenceWarning",
    "Engine",
    "ExcitationProfile",
    "ExperimentParams",
    "FloquetMatrix",
    "Pass",
    "bch_transform",
    "classify",
    "contact_sequence",
    "default_schedule",
    "exact_signal_batch",
    "generate_crystal_set",
    "hybrid_profile",
    "load_crystal_file",
    "parse_engine",
    "powder_average",
    "quad_frequency",
    "rms_deviation",
    "save_crystal_file",
    "time_grid",
    "tq_signal_exact",
]
