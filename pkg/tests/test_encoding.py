import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdtls.encoding import DecodeError, decode_wire, encode_wire, int_to_bytes, pack, unpack

wire_values = st.recursive(
    st.none() | st.booleans() | st.integers(0, 2**300) | st.binary(max_size=40) | st.text(max_size=20),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=8), inner, max_size=4),
    max_leaves=20,
)


@given(st.lists(st.binary(max_size=50), max_size=8))
def test_pack_round_trip(fields):
    assert unpack(pack(*fields)) == fields


def test_pack_is_injective_on_boundaries():
    assert pack(b"ab", b"c") != pack(b"a", b"bc")


def test_unpack_count_mismatch():
    with pytest.raises(DecodeError):
        unpack(pack(b"a", b"b"), 3)


def test_unpack_truncated():
    with pytest.raises(DecodeError):
        unpack(pack(b"hello")[:-1])


def test_int_to_bytes_width():
    assert int_to_bytes(1, 4) == b"\x00\x00\x00\x01"


@given(wire_values)
def test_wire_round_trip(value):
    assert decode_wire(encode_wire(value)) == value


def test_wire_key_order_is_preserved():
    d = {"b": 1, "a": 2}
    assert list(decode_wire(encode_wire(d))) == ["b", "a"]


@pytest.mark.parametrize("bad", [b"", b"Z", b"I\x00\x00\x00\x05ab", encode_wire([1]) + b"x"])
def test_wire_rejects_garbage(bad):
    with pytest.raises(DecodeError):
        decode_wire(bad)


def test_wire_rejects_negative_ints_and_foreign_types():
    with pytest.raises((TypeError, ValueError)):
        encode_wire(-1)
    with pytest.raises(TypeError):
        encode_wire(1.5)
