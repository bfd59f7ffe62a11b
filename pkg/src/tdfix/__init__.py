"""Skeleton action recognition with interpretable residual TCNs."""

from .dataio import (
    NTU_LAYOUT,
    SYNTH_LAYOUT,
    Dataset,
    MeanSkeleton,
    SkeletonLayout,
    SkeletonSequence,
    SyntheticSpec,
    build_datasets,
    load_ntu_file,
    parse_ntu_filename,
    parse_ntu_skeleton,
    preprocess,
    split,
    synth_datasets,
)
from .errors import ConfigError, ConsistencyError, DataError, NumericError, ParseError, TdfixError
from .fmd import compress_filters, decode, decode_raw, filter_to_skeleton, upsample_linear
from .msnet import MaskSpec, MSResTCN, MSResTCNConfig, build_ms, mask_input, ms_fit, ms_forward
from .numcore import SGDConfig
from .restcn import ActivationBundle, ResTCN, ResTCNConfig, build_restcn, evaluate, fit, forward, response_trace

__version__ = "0.1.0"

__all__ = [
    "ActivationBundle", "ConfigError", "ConsistencyError", "DataError", "Dataset", "MSResTCN", "MSResTCNConfig",
    "MaskSpec", "MeanSkeleton", "NTU_LAYOUT", "NumericError", "ParseError", "ResTCN", "ResTCNConfig", "SGDConfig",
    "SYNTH_LAYOUT", "SkeletonLayout", "SkeletonSequence", "SyntheticSpec", "TdfixError", "build_datasets",
    "build_ms", "build_restcn", "compress_filters", "decode", "decode_raw", "evaluate", "filter_to_skeleton", "fit",
    "forward", "load_ntu_file", "mask_input", "ms_fit", "ms_forward", "parse_ntu_filename", "parse_ntu_skeleton",
    "preprocess", "response_trace", "split", "synth_datasets", "upsample_linear",
]
