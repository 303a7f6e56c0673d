"""Distributed space-time block codes for asynchronous OFDM relay networks."""

__version__ = "0.1.0"

from .channel import ChannelRealization, PowerConfig, sample_channel
from .constellation import GroupSignalSet, per_symbol_qpsk, precoded_rotated_qpsk
from .decoder import group_decode, ml_decode
from .differential import build_fourgroup_diff_r4, diff_decode, diff_encode
from .dstbc import (
    ConjugateLinearCode,
    builtin_code,
    check_full_rank,
    check_row_conditions,
    derive_relay_schedule,
    row_partitions,
)
from .ofdm import dft, idft, zeta
from .transceiver import build_subcarrier_model, run_frames

__all__ = [
    "ChannelRealization", "PowerConfig", "sample_channel",
    "GroupSignalSet", "per_symbol_qpsk", "precoded_rotated_qpsk",
    "group_decode", "ml_decode",
    "build_fourgroup_diff_r4", "diff_decode", "diff_encode",
    "ConjugateLinearCode", "builtin_code", "check_full_rank",
    "check_row_conditions", "derive_relay_schedule", "row_partitions",
    "dft", "idft", "zeta",
    "build_subcarrier_model", "run_frames",
]
