"""ECDSA and Schnorr signatures over the counted arithmetic.

Both schemes expose the same backend surface, so the proxy-signature layer
and the protocol can be written once:

* ``keygen`` / ``sign`` / ``verify``;
* ``recover_commitment``: rebuild the signer's nonce commitment ``Y`` from a
  signature (returns ``None`` when the signature does not check out);
* ``combine``: ``r*G + h*Q`` (or ``g^r * Q^h``), used for proxy public keys;
* ``proxy_secret``: ``r + d*h mod q``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .counters import POINT_UNITS, MODMULS, OpCounter
from .ec import SECP256R1, TOY_CURVE, Curve
from .encoding import DecodeError, int_to_bytes, pack, unpack
from .modgroup import SCHNORR_3072, SchnorrGroup
from .primitives import hash_to_scalar


@dataclass(frozen=True)
class Signature:
    first: int
    second: int

    def to_bytes(self, length: int = 32) -> bytes:
        return pack(int_to_bytes(self.first, length), int_to_bytes(self.second, length))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        a, b = unpack(data, 2)
        return cls(int.from_bytes(a, "big"), int.from_bytes(b, "big"))


@dataclass(frozen=True)
class KeyPair:
    secret: int
    public: object

    def __repr__(self) -> str:
        return f"KeyPair(public={self.public!r})"


def _ctr(ctr):
    return ctr if ctr is not None else OpCounter()


class EcdsaScheme:
    name = "ecdsa"
    metric = POINT_UNITS

    def __init__(self, curve: Curve = SECP256R1):
        self.curve = curve

    @property
    def q(self) -> int:
        return self.curve.n

    @property
    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def H(self, msg: bytes) -> int:
        return hash_to_scalar(msg, self.q)

    def base_mul(self, k: int, ctr=None):
        return self.curve.scalar_mul(k, self.curve.G, _ctr(ctr))

    def keygen(self, rng: random.Random, ctr=None) -> KeyPair:
        d = rng.randrange(1, self.q)
        return KeyPair(d, self.base_mul(d, ctr))

    def sign_with_nonce(self, d: int, m: bytes, y: int, ctr=None) -> tuple[Signature, object] | None:
        q = self.q
        Y = self.base_mul(y, ctr)
        x_y = Y[0] % q
        c = self.H(m)
        s = (c + d * x_y) * pow(y, -1, q) % q
        if x_y == 0 or s == 0:
            return None
        return Signature(x_y, s), Y

    def sign(self, d: int, m: bytes, rng: random.Random, ctr=None) -> Signature:
        return self.sign_committed(d, m, rng, ctr)[0]

    def sign_committed(self, d: int, m: bytes, rng: random.Random, ctr=None):
        """Sign and also return the nonce commitment ``Y``."""
        while True:
            out = self.sign_with_nonce(d, m, rng.randrange(1, self.q), ctr)
            if out is not None:
                return out

    def _two_term(self, u1: int, P1, u2: int, P2, ctr):
        ctr = _ctr(ctr)
        acc = None
        for u, P in ((u1, P1), (u2, P2)):
            if u:
                acc = self.curve.point_add(acc, self.curve.scalar_mul(u, P, ctr), ctr)
        return acc

    def recover_commitment(self, Q, m: bytes, sig: Signature, ctr=None):
        q = self.q
        if not (0 < sig.first < q and 0 < sig.second < q) or Q is None:
            return None
        w = pow(sig.second, -1, q)
        Y = self._two_term(self.H(m) * w % q, self.curve.G, sig.first * w % q, Q, ctr)
        if Y is None or Y[0] % q != sig.first:
            return None
        return Y

    def verify(self, Q, m: bytes, sig: Signature, ctr=None) -> bool:
        return self.recover_commitment(Q, m, sig, ctr) is not None

    def combine(self, r: int, h: int, Q, ctr=None):
        return self._two_term(r % self.q, self.curve.G, h % self.q, Q, ctr)

    def proxy_secret(self, r: int, d: int, h: int, ctr=None) -> int:
        return (r + d * h) % self.q

    def encode_public(self, Q) -> bytes:
        return self.curve.encode_point(Q)

    def decode_public(self, data: bytes):
        Q = self.curve.decode_point(data)
        if Q is None:
            raise DecodeError("identity public key")
        return Q

    def encode_commitment(self, Y) -> bytes:
        return self.curve.encode_point(Y)

    def is_valid_public(self, Q) -> bool:
        return Q is not None and self.curve.is_on_curve(Q)


class SchnorrScheme:
    """Schnorr signatures with challenge ``c = H(m || Y)`` and ``s = y + c*d``."""

    name = "schnorr"
    metric = MODMULS

    def __init__(self, group: SchnorrGroup = SCHNORR_3072):
        self.group = group

    @property
    def q(self) -> int:
        return self.group.q

    @property
    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def H(self, msg: bytes) -> int:
        return hash_to_scalar(msg, self.q)

    def base_mul(self, k: int, ctr=None) -> int:
        return self.group.mod_exp(self.group.g, k, _ctr(ctr))

    def keygen(self, rng: random.Random, ctr=None) -> KeyPair:
        d = rng.randrange(1, self.q)
        return KeyPair(d, self.base_mul(d, ctr))

    def _challenge(self, m: bytes, Y: int) -> int:
        return self.H(pack(m, self.group.encode_element(Y)))

    def sign_committed(self, d: int, m: bytes, rng: random.Random, ctr=None):
        ctr = _ctr(ctr)
        while True:
            y = rng.randrange(1, self.q)
            Y = self.base_mul(y, ctr)
            c = self._challenge(m, Y)
            if c == 0:
                continue
            s = (y + self.group.scalar_product(c, d, ctr)) % self.q
            if s == 0:
                continue
            return Signature(c, s), Y

    def sign(self, d: int, m: bytes, rng: random.Random, ctr=None) -> Signature:
        return self.sign_committed(d, m, rng, ctr)[0]

    def recover_commitment(self, v: int, m: bytes, sig: Signature, ctr=None):
        q = self.q
        if not (0 < sig.first < q and 0 <= sig.second < q) or v is None:
            return None
        Y = self.group.multi_exp(self.group.g, sig.second, v, q - sig.first, _ctr(ctr))
        if self._challenge(m, Y) != sig.first:
            return None
        return Y

    def verify(self, v: int, m: bytes, sig: Signature, ctr=None) -> bool:
        return self.recover_commitment(v, m, sig, ctr) is not None

    def combine(self, r: int, h: int, Q: int, ctr=None) -> int:
        # The cost model books forming g^r * Q^h as a single multiplication.
        ctr = _ctr(ctr)
        pkp = self.group.multi_exp(self.group.g, r % self.q, Q, h % self.q, ctr, charge=False)
        ctr.charge(MODMULS, 1)
        return pkp

    def proxy_secret(self, r: int, d: int, h: int, ctr=None) -> int:
        return (r + self.group.scalar_product(d, h, ctr)) % self.q

    def encode_public(self, v: int) -> bytes:
        return self.group.encode_element(v)

    def decode_public(self, data: bytes) -> int:
        return self.group.decode_element(data)

    def encode_commitment(self, Y: int) -> bytes:
        return self.group.encode_element(Y)

    def is_valid_public(self, v) -> bool:
        return isinstance(v, int) and self.group.is_element(v)


ECDSA = EcdsaScheme()
SCHNORR = SchnorrScheme()
TOY_ECDSA = EcdsaScheme(TOY_CURVE)


def get_scheme(name: str):
    try:
        return {"ecdsa": ECDSA, "schnorr": SCHNORR}[name]
    except KeyError:
        raise ValueError(f"unknown signature scheme {name!r}") from None


def keygen(scheme, rng: random.Random, ctr=None) -> KeyPair:
    if isinstance(scheme, str):
        scheme = get_scheme(scheme)
    return scheme.keygen(rng, ctr)


def ecdsa_sign(d: int, m: bytes, rng: random.Random, ctr=None, scheme: EcdsaScheme = ECDSA) -> Signature:
    return scheme.sign(d, m, rng, ctr)


def ecdsa_verify(Q, m: bytes, sig: Signature, ctr=None, scheme: EcdsaScheme = ECDSA) -> bool:
    return scheme.verify(Q, m, sig, ctr)


def schnorr_sign(d: int, m: bytes, rng: random.Random, ctr=None, scheme: SchnorrScheme = SCHNORR) -> Signature:
    return scheme.sign(d, m, rng, ctr)


def schnorr_verify(v: int, m: bytes, sig: Signature, ctr=None, scheme: SchnorrScheme = SCHNORR) -> bool:
    return scheme.verify(v, m, sig, ctr)
