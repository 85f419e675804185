"""Joint sensing, communication and multi-tier computing optimisation.

A NOMA uplink feeds a dual-function BS that senses a target, computes part
of the offloaded bits and forwards the rest to a cloud server over the
sensing waveform.  The package provides the rate/SINR models, a WMMSE-based
alternating optimiser for partial offloading, an ADMM-based optimiser for
binary offloading, exhaustive oracles and a Monte Carlo experiment harness.
"""
from .binary import BinarySolution, exhaustive_binary_oracle, solve_binary
from .errors import (ConfigError, ConvergenceFailure, DegeneratePattern, DegenerateSensing,
                     InfeasibleSensing, InvalidArgument, JcsmcError, NeedsPhaseOne, NumericalFailure,
                     ProblemTooLarge)
from .partial import PartialSolution, exhaustive_order_oracle, propose_decoding_order, solve_partial
from .rates import DecodingOrder
from .scenario import ChannelRealization, ScenarioConfig, sample_channels

__version__ = "0.1.0"

__all__ = [
    "BinarySolution", "ChannelRealization", "ConfigError", "ConvergenceFailure", "DecodingOrder",
    "DegeneratePattern", "DegenerateSensing", "InfeasibleSensing", "InvalidArgument", "JcsmcError",
    "NeedsPhaseOne", "NumericalFailure", "PartialSolution", "ProblemTooLarge", "ScenarioConfig",
    "exhaustive_binary_oracle", "exhaustive_order_oracle", "propose_decoding_order", "sample_channels",
    "solve_binary", "solve_partial",
]
