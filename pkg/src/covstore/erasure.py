"""Systematic [n, k] Reed-Solomon code over GF(2^8).

The generator matrix is a Vandermonde matrix on the points 0..n-1 multiplied by
the inverse of its top k x k block, so the first k coded elements are the plain
data fragments and any k rows are invertible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PRIMITIVE_POLY = 0x11D


class CodecError(Exception):
    pass


class CodecParameterError(CodecError, ValueError):
    pass


class InsufficientFragmentsError(CodecError):
    pass


class CorruptionError(CodecError):
    pass


def _build_tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    exp[255:510] = exp[0:255]
    a = np.arange(256)
    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = a[1:]
    mul[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % 255]
    return exp, log, mul


EXP, LOG, MUL = _build_tables()


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(EXP[255 - LOG[a]])


def gf_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP[(LOG[a] * e) % 255])


def gf_invert_matrix(m: list[list[int]]) -> list[list[int]]:
    size = len(m)
    aug = [list(row) + [int(i == j) for j in range(size)] for i, row in enumerate(m)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col]), None)
        if pivot is None:
            raise CodecParameterError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = gf_inv(aug[col][col])
        aug[col] = [gf_mul(v, inv) for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [v ^ gf_mul(f, p) for v, p in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


def _gf_matmul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    out = []
    for row in a:
        new = []
        for j in range(len(b[0])):
            acc = 0
            for i, v in enumerate(row):
                acc ^= gf_mul(v, b[i][j])
            new.append(acc)
        out.append(new)
    return out


def _check_params(n: int, k: int):
    if not (1 <= k <= n <= 255):
        raise CodecParameterError(f"invalid code parameters n={n}, k={k}")


@lru_cache(maxsize=None)
def generator_matrix(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    _check_params(n, k)
    vander = [[gf_pow(i, j) for j in range(k)] for i in range(n)]
    top_inv = gf_invert_matrix(vander[:k])
    return tuple(tuple(r) for r in _gf_matmul(vander, top_inv))


@dataclass(frozen=True)
class CodedElement:
    index: int
    payload: bytes
    orig_len: int

    def encode(self) -> bytes:
        return struct.pack(">HQ", self.index, self.orig_len) + self.payload

    @classmethod
    def decode(cls, raw: bytes) -> CodedElement:
        index, orig_len = struct.unpack_from(">HQ", raw)
        return cls(index, bytes(raw[10:]), orig_len)

    def __len__(self) -> int:
        return len(self.payload)


ELEMENT_HEADER = 10


def fragment_size(length: int, k: int) -> int:
    return -(-length // k)


def _combine(coeffs, rows: list[np.ndarray], size: int) -> np.ndarray:
    out = np.zeros(size, dtype=np.uint8)
    for c, row in zip(coeffs, rows):
        if c == 0:
            continue
        if c == 1:
            out ^= row
        else:
            out ^= MUL[c][row]
    return out


def encode(value: bytes, n: int, k: int) -> list[CodedElement]:
    _check_params(n, k)
    orig_len = len(value)
    size = fragment_size(orig_len, k)
    if k == 1:
        return [CodedElement(i, bytes(value), orig_len) for i in range(n)]
    buf = np.zeros(size * k, dtype=np.uint8)
    buf[:orig_len] = np.frombuffer(value, dtype=np.uint8)
    frags = [buf[j * size:(j + 1) * size] for j in range(k)]
    gen = generator_matrix(n, k)
    out = [CodedElement(j, frags[j].tobytes(), orig_len) for j in range(k)]
    for i in range(k, n):
        out.append(CodedElement(i, _combine(gen[i], frags, size).tobytes(), orig_len))
    return out


def decode(elements, n: int, k: int) -> bytes:
    _check_params(n, k)
    by_index: dict[int, CodedElement] = {}
    for e in elements:
        if not 0 <= e.index < n:
            raise CorruptionError(f"element index {e.index} outside [0, {n})")
        prev = by_index.get(e.index)
        if prev is not None and prev != e:
            raise CorruptionError(f"conflicting elements for index {e.index}")
        by_index[e.index] = e
    if len(by_index) < k:
        raise InsufficientFragmentsError(f"need {k} distinct elements, have {len(by_index)}")
    chosen = [by_index[i] for i in sorted(by_index)[:k]]
    orig_len = chosen[0].orig_len
    size = fragment_size(orig_len, k)
    for e in by_index.values():
        if e.orig_len != orig_len:
            raise CorruptionError("elements disagree on original length")
        if len(e.payload) != size:
            raise CorruptionError(f"element {e.index} has {len(e.payload)} bytes, expected {size}")
    if k == 1:
        return chosen[0].payload[:orig_len]
    idx = [e.index for e in chosen]
    if idx == list(range(k)):
        return b"".join(e.payload for e in chosen)[:orig_len]
    gen = generator_matrix(n, k)
    inv = gf_invert_matrix([list(gen[i]) for i in idx])
    rows = [np.frombuffer(e.payload, dtype=np.uint8) for e in chosen]
    data = [_combine(inv[j], rows, size) for j in range(k)]
    return b"".join(d.tobytes() for d in data)[:orig_len]
