"""Multiuser MMSE hybrid analog/digital beamforming for downlink mmWave MIMO."""

__version__ = "0.1.0"

from .channel import ChannelSet, SystemConfig, array_response, build_channel, draw_paths, random_channel
from .errors import HbfError
from .fdbf import fdbf_alternate
from .hbf import AlternateOptions, alternate, sum_mse_direct

__all__ = [
    "AlternateOptions",
    "ChannelSet",
    "HbfError",
    "SystemConfig",
    "alternate",
    "array_response",
    "build_channel",
    "draw_paths",
    "fdbf_alternate",
    "random_channel",
    "sum_mse_direct",
]
