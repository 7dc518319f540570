"""Adaptive low-latency streaming erasure codes."""

from .blockcode import BlockCode, CodeParams, capacity, construct_code, verify_block_code

__all__ = ["BlockCode", "CodeParams", "capacity", "construct_code", "verify_block_code"]
__version__ = "0.1.0"
