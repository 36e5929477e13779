"""Fragmentation layer: chunking, block diffing and the block-chain file client."""

from .chunker import POLYNOMIAL, WINDOW, ChunkerParams, block_hash, chunk, cut_points, is_irreducible
from .diff import DiffOp, DiffStatus, apply_diff, diff_hashes
from .fm import FragmentClient, IntegrityError, UpdateSummary, decode_block, encode_block

__all__ = [
    "POLYNOMIAL", "WINDOW", "ChunkerParams", "block_hash", "chunk", "cut_points", "is_irreducible",
    "DiffOp", "DiffStatus", "apply_diff", "diff_hashes",
    "FragmentClient", "IntegrityError", "UpdateSummary", "decode_block", "encode_block",
]
