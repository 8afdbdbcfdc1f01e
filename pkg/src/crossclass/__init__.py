"""Cross-classification clustering for volumetric instance segmentation."""
from .encoding import Codebook, DecodePolicy, build_codebook, decode_pixels, encode_digit, min_digits
from .errors import CrossClassError
from .kernels import BACKEND
from .volume import Dims, LabelStack, ScalarStack, compact_labels, load_stack, save_stack

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Codebook",
    "CrossClassError",
    "DecodePolicy",
    "Dims",
    "LabelStack",
    "ScalarStack",
    "build_codebook",
    "compact_labels",
    "decode_pixels",
    "encode_digit",
    "load_stack",
    "min_digits",
    "save_stack",
]
