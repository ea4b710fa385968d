"""Bidirectional time series <-> image codec with understanding and generation task tooling."""
from .codec import CodecConfig, decode, encode, encode_pair
from .core import InstanceMeta, LayoutSpec, MaskSpec, NormStats, TimeSeries, TsImage

__all__ = [
    "CodecConfig", "InstanceMeta", "LayoutSpec", "MaskSpec", "NormStats",
    "TimeSeries", "TsImage", "decode", "encode", "encode_pair",
]
__version__ = "0.1.0"
