import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from covstore import erasure
from covstore.erasure import CodedElement


def test_k1_is_replication():
    elems = erasure.encode(b"hello", 3, 1)
    assert [e.payload for e in elems] == [b"hello"] * 3
    for e in elems:
        assert erasure.decode([e], 3, 1) == b"hello"


def test_empty_value():
    elems = erasure.encode(b"", 6, 2)
    assert len(elems) == 6
    assert all(e.payload == b"" and e.orig_len == 0 for e in elems)
    assert erasure.decode(elems[4:], 6, 2) == b""


def test_every_pair_of_six_decodes_1kib():
    value = random.Random(7).randbytes(1024)
    elems = erasure.encode(value, 6, 2)
    subsets = list(itertools.combinations(elems, 2))
    assert len(subsets) == 15
    for subset in subsets:
        assert erasure.decode(list(subset), 6, 2) == value


def test_systematic_prefix():
    value = bytes(range(10))
    elems = erasure.encode(value, 5, 2)
    assert elems[0].payload + elems[1].payload == value


def test_first_two_elements_decode():
    value = b"abcdefgh" * 33
    elems = erasure.encode(value, 6, 2)
    assert erasure.decode(elems[:2], 6, 2) == value


def test_too_few_elements():
    elems = erasure.encode(b"abc", 6, 2)
    with pytest.raises(erasure.InsufficientFragmentsError):
        erasure.decode(elems[:1], 6, 2)


def test_inconsistent_orig_len_is_corruption():
    a = erasure.encode(b"abcd", 4, 2)
    b = erasure.encode(b"abcdef", 4, 2)
    with pytest.raises(erasure.CorruptionError):
        erasure.decode([a[0], b[1]], 4, 2)


def test_duplicate_indices_do_not_count_twice():
    elems = erasure.encode(b"abcd", 4, 2)
    with pytest.raises(erasure.CodecError):
        erasure.decode([elems[1], elems[1]], 4, 2)


@pytest.mark.parametrize("n,k", [(3, 0), (3, 4), (256, 2)])
def test_bad_parameters(n, k):
    with pytest.raises(erasure.CodecParameterError):
        erasure.encode(b"x", n, k)


@given(st.binary(max_size=300), st.integers(1, 8), st.data())
@settings(max_examples=60, deadline=None)
def test_mds_roundtrip(value, n, data):
    k = data.draw(st.integers(1, n))
    elems = erasure.encode(value, n, k)
    subset = data.draw(st.permutations(elems)).__getitem__(slice(0, k))
    assert erasure.decode(list(subset), n, k) == value


def test_storage_ratio():
    value = random.Random(1).randbytes(1001)
    for n, k in [(5, 3), (11, 6), (6, 2)]:
        total = sum(len(e.payload) for e in erasure.encode(value, n, k))
        assert n * len(value) / k <= total <= n * (len(value) + k - 1) / k


def test_element_encoding_layout():
    e = CodedElement(3, b"xyz", 9)
    raw = e.encode()
    assert raw[:2] == b"\x00\x03"
    assert raw[2:10] == (9).to_bytes(8, "big")
    assert raw[10:] == b"xyz"
    assert CodedElement.decode(raw) == e


def test_gf_inverse():
    for a in range(1, 256):
        assert erasure.gf_mul(a, erasure.gf_inv(a)) == 1
