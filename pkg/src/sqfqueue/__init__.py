"""Workload analysis of two parallel queues under shortest-queue-first service."""
from .exceptions import (ContinuationError, CutError, InversionError, ParameterError,
                         PoleError, SeriesError, SimulationError, SQFError)
from .inversion import InversionMethod, InversionOptions, ccdf_curve, invert_ccdf
from .metrics import (TailLaw, empty_queue_probability, g_singularity, hol_tail_law,
                      sqf_tail_law)
from .model import (GeneralParams, Regime, SymmetricParams, validate_general,
                    validate_symmetric)
from .sim import Policy, ServiceLaw, SimConfig, SimOutput, simulate
from .solver import f_marginal, g_transform, m_series

__version__ = "0.1.0"

__all__ = [
    "SQFError", "ParameterError", "CutError", "PoleError", "ContinuationError", "SeriesError",
    "InversionError", "SimulationError",
    "SymmetricParams", "GeneralParams", "Regime", "validate_symmetric", "validate_general",
    "m_series", "g_transform", "f_marginal",
    "TailLaw", "empty_queue_probability", "sqf_tail_law", "hol_tail_law", "g_singularity",
    "InversionMethod", "InversionOptions", "invert_ccdf", "ccdf_curve",
    "Policy", "ServiceLaw", "SimConfig", "SimOutput", "simulate",
]
