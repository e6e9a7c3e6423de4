"""Feature coding test model: compress time series of multi-scale neural
feature tensors into an FCMB container and restore them."""

from .errors import FcmError
from .pipeline import EncoderConfig, decode, encode
from .tensors import (
    FeatureLayer,
    FeatureSequence,
    FeatureSet,
    ReducedFeature,
    load_feature_sequence,
    save_feature_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "EncoderConfig",
    "FcmError",
    "FeatureLayer",
    "FeatureSequence",
    "FeatureSet",
    "ReducedFeature",
    "decode",
    "encode",
    "load_feature_sequence",
    "save_feature_sequence",
]
