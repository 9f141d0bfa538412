import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdtls.counters import MODMULS, POINT_UNITS, OpCounter
from mdtls.encoding import DecodeError
from mdtls.modgroup import SCHNORR_TEST_64
from mdtls.sigschemes import (ECDSA, SCHNORR, KeyPair, SchnorrScheme, Signature, ecdsa_sign,
                              ecdsa_verify, get_scheme, keygen, schnorr_sign, schnorr_verify)

SMALL_SCHNORR = SchnorrScheme(SCHNORR_TEST_64)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.binary(max_size=64))
def test_ecdsa_round_trip(seed, msg):
    rng = random.Random(seed)
    keys = keygen("ecdsa", rng)
    sig = ecdsa_sign(keys.secret, msg, rng)
    assert ecdsa_verify(keys.public, msg, sig)
    assert not ecdsa_verify(keys.public, msg + b"\x00", sig)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.binary(max_size=64))
def test_schnorr_round_trip_small_group(seed, msg):
    rng = random.Random(seed)
    keys = SMALL_SCHNORR.keygen(rng)
    sig = SMALL_SCHNORR.sign(keys.secret, msg, rng)
    assert SMALL_SCHNORR.verify(keys.public, msg, sig)
    assert not SMALL_SCHNORR.verify(keys.public, msg + b"\x00", sig)


def test_schnorr_round_trip_full_group():
    rng = random.Random(5)
    keys = keygen(SCHNORR, rng)
    sig = schnorr_sign(keys.secret, b"hello", rng)
    assert schnorr_verify(keys.public, b"hello", sig)
    other = keygen(SCHNORR, rng)
    assert not schnorr_verify(other.public, b"hello", sig)


@pytest.mark.parametrize("scheme,metric,costs", [
    (ECDSA, POINT_UNITS, (384, 384, 768)),
    (SCHNORR, MODMULS, (384, 385, 448)),
])
def test_operation_units(scheme, metric, costs):
    rng = random.Random(0)
    measured = []
    ctr = OpCounter()
    keys = scheme.keygen(rng, ctr)
    measured.append(ctr.units(metric))
    ctr = OpCounter()
    sig = scheme.sign(keys.secret, b"m", rng, ctr)
    measured.append(ctr.units(metric))
    ctr = OpCounter()
    assert scheme.verify(keys.public, b"m", sig, ctr)
    measured.append(ctr.units(metric))
    assert tuple(measured) == costs


@pytest.mark.parametrize("scheme", [ECDSA, SMALL_SCHNORR])
def test_out_of_range_signatures_rejected(scheme):
    rng = random.Random(1)
    keys = scheme.keygen(rng)
    q = scheme.q
    for sig in (Signature(0, 1), Signature(1, q), Signature(q, 1), Signature(q + 1, 5)):
        assert not scheme.verify(keys.public, b"m", sig)


@pytest.mark.parametrize("scheme", [ECDSA, SMALL_SCHNORR])
def test_commitment_recovery_matches_signer(scheme):
    rng = random.Random(2)
    keys = scheme.keygen(rng)
    sig, Y = scheme.sign_committed(keys.secret, b"msg", rng)
    assert scheme.recover_commitment(keys.public, b"msg", sig) == Y


def test_signature_bytes_round_trip():
    sig = Signature(123, 456)
    assert Signature.from_bytes(sig.to_bytes()) == sig


def test_keypair_repr_hides_secret():
    kp = KeyPair(0xDEADBEEF1234, (1, 2))
    assert "deadbeef1234" not in repr(kp).lower() and str(0xDEADBEEF1234) not in repr(kp)


def test_public_key_codecs():
    rng = random.Random(3)
    for scheme in (ECDSA, SMALL_SCHNORR):
        keys = scheme.keygen(rng)
        assert scheme.decode_public(scheme.encode_public(keys.public)) == keys.public
    with pytest.raises(DecodeError):
        ECDSA.decode_public(b"\x00")


def test_get_scheme():
    assert get_scheme("ecdsa") is ECDSA and get_scheme("schnorr") is SCHNORR
    with pytest.raises(ValueError):
        get_scheme("rsa")
