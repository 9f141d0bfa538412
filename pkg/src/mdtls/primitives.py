"""Hashing, HMAC, HKDF-style expansion and an encrypt-then-MAC AEAD."""

from __future__ import annotations

import hashlib
import hmac

from .ec import SECP256R1
from .encoding import pack

TAG_LEN = 16


class AuthenticationError(Exception):
    """Authenticated decryption failed."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_to_scalar(msg: bytes, q: int = SECP256R1.n) -> int:
    return int.from_bytes(sha256(msg), "big") % q


def hmac_tag(key: bytes, msg: bytes) -> bytes:
    return hmac.new(key, msg, hashlib.sha256).digest()


def hkdf_extract(salt: bytes, ikm: bytes) -> bytes:
    return hmac_tag(salt or b"\x00" * 32, ikm)


def hkdf_expand(prk: bytes, info: bytes, length: int) -> bytes:
    if length > 255 * 32:
        raise ValueError("requested length too large")
    out = b""
    block = b""
    counter = 1
    while len(out) < length:
        block = hmac_tag(prk, block + info + bytes([counter]))
        out += block
        counter += 1
    return out[:length]


def prf_expand(secret: bytes, label: bytes, length: int) -> bytes:
    return hkdf_expand(hkdf_extract(b"", secret), label, length)


def _subkeys(key: bytes) -> tuple[bytes, bytes]:
    if not key:
        raise ValueError("empty key")
    material = prf_expand(key, b"mdtls aead subkeys", 64)
    return material[:32], material[32:]


def _keystream(enc_key: bytes, nonce: bytes, length: int) -> bytes:
    blocks = []
    for i in range((length + 31) // 32):
        blocks.append(hmac_tag(enc_key, nonce + i.to_bytes(4, "big")))
    return b"".join(blocks)[:length]


def aead_seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes = b"") -> bytes:
    enc_key, mac_key = _subkeys(key)
    stream = _keystream(enc_key, nonce, len(plaintext))
    body = bytes(a ^ b for a, b in zip(plaintext, stream))
    tag = hmac_tag(mac_key, pack(aad, nonce, body))[:TAG_LEN]
    return body + tag


def aead_open(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes = b"") -> bytes:
    if len(ciphertext) < TAG_LEN:
        raise AuthenticationError("ciphertext too short")
    enc_key, mac_key = _subkeys(key)
    body, tag = ciphertext[:-TAG_LEN], ciphertext[-TAG_LEN:]
    expected = hmac_tag(mac_key, pack(aad, nonce, body))[:TAG_LEN]
    if not hmac.compare_digest(tag, expected):
        raise AuthenticationError("authentication tag mismatch")
    stream = _keystream(enc_key, nonce, len(body))
    return bytes(a ^ b for a, b in zip(body, stream))
