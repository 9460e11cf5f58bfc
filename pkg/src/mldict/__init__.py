"""Lossless binary-image compression with multi-level pattern dictionaries."""

from .errors import (
    ChecksumError, CorruptionError, FormatError, InputError, MLDictError,
    TruncationError, VersionError, WrongDictionaryError,
)
from .imgproc import BinaryImage, GrayImage, PaddedImage, binarize, crop, pad_to_16, to_gray
from .patchkey import LEVELS, block_to_key, key_to_block, split_key, tile_keys
from .dictionary import ConvergenceMonitor, Dictionary, DictionarySet, PrunePolicy, Trainer
from .huffman import ESCAPE, CodeBook, build_lengths, canonicalize
from .codec import Container, compression_ratio, decode, encode

__version__ = "0.1.0"
