"""Workbench for a memory-k nanopore insertion/deletion/substitution channel:
simulation, parameter estimation, inner/outer coding, trellis decoding and
achievable-rate measurement."""

__version__ = "0.1.0"

from ._kernels import USING_NUMBA
from .channel import (
    ALPHABET,
    START,
    ChannelParams,
    EventKind,
    EventTrace,
    PositionClass,
    as_seq,
    classify_position,
    kmer_context,
    marginal_event_rates,
    seq_to_str,
    transmit,
    transmit_multi,
    validate,
)

__all__ = [
    "ALPHABET",
    "START",
    "ChannelParams",
    "EventKind",
    "EventTrace",
    "PositionClass",
    "USING_NUMBA",
    "as_seq",
    "classify_position",
    "kmer_context",
    "marginal_event_rates",
    "seq_to_str",
    "transmit",
    "transmit_multi",
    "validate",
]
