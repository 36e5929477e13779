"""Content-defined chunking with a Rabin rolling fingerprint over GF(2)[x].

The fingerprint of the last ``WINDOW`` bytes is maintained incrementally with
two 256-entry tables (one to shift a byte in, one to cancel the byte leaving
the window). Because the window slides continuously across the whole file, a
cut decision depends only on local content and the distance to the previous
cut, so a local edit moves O(1) boundaries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numba import njit

# Degree-53 irreducible polynomial (irreducibility is checked by the test suite).
POLYNOMIAL = 0x3DA3358B4DC173
WINDOW = 48


def poly_degree(p: int) -> int:
    return p.bit_length() - 1


def poly_mod(a: int, p: int) -> int:
    dp = poly_degree(p)
    while a and poly_degree(a) >= dp:
        a ^= p << (poly_degree(a) - dp)
    return a


def poly_mulmod(a: int, b: int, p: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a = poly_mod(a << 1, p)
    return poly_mod(out, p)


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def is_irreducible(p: int) -> bool:
    """Ben-Or test: p is irreducible iff gcd(p, x^(2^i) - x) = 1 for i = 1..deg/2."""
    d = poly_degree(p)
    if d < 1:
        return False
    x_pow = 0b10
    for _ in range(d // 2):
        x_pow = poly_mulmod(x_pow, x_pow, p)
        if poly_gcd(p, x_pow ^ 0b10) != 1:
            return False
    return True


def _append_byte(fp: int, b: int, p: int) -> int:
    return poly_mod((fp << 8) | b, p)


def build_tables(p: int = POLYNOMIAL, window: int = WINDOW):
    deg = poly_degree(p)
    mod_t = np.zeros(256, dtype=np.int64)
    out_t = np.zeros(256, dtype=np.int64)
    for b in range(256):
        # xoring mod_t[top byte] both clears the overflow bits and adds their residue
        mod_t[b] = poly_mod(b << deg, p) | (b << deg)
        h = _append_byte(0, b, p)
        for _ in range(window - 1):
            h = _append_byte(h, 0, p)
        out_t[b] = h
    return mod_t, out_t


_MOD_T, _OUT_T = build_tables()
_SHIFT = poly_degree(POLYNOMIAL) - 8


@njit(cache=True)
def _cut_points(data, mod_t, out_t, shift, window, min_size, mask, max_size):
    n = data.shape[0]
    cuts = np.empty(n // min_size + 2, dtype=np.int64)
    count = 0
    win = np.zeros(window, dtype=np.int64)
    wpos = 0
    fp = np.int64(0)
    start = 0
    for i in range(n):
        b = np.int64(data[i])
        fp ^= out_t[win[wpos]]
        win[wpos] = b
        wpos += 1
        if wpos == window:
            wpos = 0
        fp = ((fp << 8) | b) ^ mod_t[fp >> shift]
        length = i + 1 - start
        if length >= max_size or (length >= min_size and (fp & mask) == mask):
            cuts[count] = i + 1
            count += 1
            start = i + 1
    if start < n:
        cuts[count] = n
        count += 1
    return cuts[:count]


@dataclass(frozen=True)
class ChunkerParams:
    min_size: int = 512 * 1024
    avg_size: int = 512 * 1024
    max_size: int = 1024 * 1024

    def __post_init__(self):
        if not 1 <= self.min_size <= self.avg_size <= self.max_size:
            raise ValueError("need 1 <= min_size <= avg_size <= max_size")
        if self.avg_size & (self.avg_size - 1):
            raise ValueError("avg_size must be a power of two")

    def to_json(self) -> list:
        return [self.min_size, self.avg_size, self.max_size]


def cut_points(data: bytes, params: ChunkerParams) -> np.ndarray:
    """End offsets of every chunk (the last one is ``len(data)``)."""
    arr = np.frombuffer(data, dtype=np.uint8)
    return _cut_points(arr, _MOD_T, _OUT_T, _SHIFT, WINDOW,
                       params.min_size, params.avg_size - 1, params.max_size)


def block_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def chunk(data: bytes, params: ChunkerParams) -> list[tuple[bytes, str]]:
    out = []
    start = 0
    for end in cut_points(data, params):
        piece = data[start:int(end)]
        out.append((piece, block_hash(piece)))
        start = int(end)
    return out
