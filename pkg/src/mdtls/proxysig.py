"""Partial delegation with warrant.

The original signer (the server) signs a delegation message naming a proxy
(a middlebox) and a warrant. The proxy folds the delegation's nonce
commitment into its own secret to get the proxy signing key

    t = r + d_proxy * H(Y_d || warrant)

whose public half ``PKP = r*G + H(Y_d || warrant) * Q_proxy`` any verifier
can rebuild from public data alone. ``r`` is a hash of the delegation and
is recomputed on both sides rather than transmitted.

Every function takes a signature backend (``ECDSA`` by default); the Schnorr
backend plugs in unchanged.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .encoding import DecodeError, int_to_bytes, pack, unpack
from .primitives import sha256
from .sigschemes import ECDSA, KeyPair, Signature

PROXY_TAG = b"\x00"


class ProxySignatureError(ValueError):
    pass


class InvalidDelegation(ProxySignatureError):
    def __init__(self, detail: str = "invalid delegation"):
        super().__init__(detail)


class WarrantExpired(ProxySignatureError):
    def __init__(self, detail: str = "warrant expired"):
        super().__init__(detail)


class WarrantViolation(ProxySignatureError):
    def __init__(self, detail: str = "message outside warrant"):
        super().__init__(detail)


@dataclass(frozen=True)
class Warrant:
    """Allowed message digests plus a validity window in logical ticks."""

    allowed: frozenset
    not_before: int
    not_after: int

    def __post_init__(self):
        if not self.not_before < self.not_after:
            raise ValueError("warrant period must satisfy not_before < not_after")
        object.__setattr__(self, "allowed", frozenset(bytes(d) for d in self.allowed))

    @classmethod
    def for_messages(cls, messages, not_before: int = 0, not_after: int = 2**32) -> "Warrant":
        return cls(frozenset(sha256(m) for m in messages), not_before, not_after)

    def permits(self, m: bytes) -> bool:
        return sha256(m) in self.allowed

    def active(self, now: int | None) -> bool:
        return now is None or self.not_before <= now < self.not_after

    def restrict(self, messages) -> "Warrant":
        keep = {sha256(m) for m in messages}
        return Warrant(self.allowed & keep, self.not_before, self.not_after)

    def to_bytes(self) -> bytes:
        return pack(
            int_to_bytes(self.not_before, 8),
            int_to_bytes(self.not_after, 8),
            *sorted(self.allowed),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Warrant":
        fields = unpack(data)
        if len(fields) < 2:
            raise DecodeError("warrant too short")
        return cls(frozenset(fields[2:]), int.from_bytes(fields[0], "big"),
                   int.from_bytes(fields[1], "big"))


def _descriptor(scheme, server_pub, proxy_id: str, proxy_pub, warrant: Warrant) -> bytes:
    return pack(
        scheme.encode_public(server_pub),
        proxy_id.encode(),
        scheme.encode_public(proxy_pub),
        warrant.to_bytes(),
    )


def delegation_message(scheme, server_pub, proxy_id, proxy_pub, warrant) -> bytes:
    return PROXY_TAG + _descriptor(scheme, server_pub, proxy_id, proxy_pub, warrant)


def _r_value(scheme, descriptor: bytes, c: int) -> int:
    return scheme.H(pack(descriptor, int_to_bytes(c, scheme.scalar_len)))


def _h_value(scheme, Y_d, warrant: Warrant) -> int:
    return scheme.H(pack(scheme.encode_commitment(Y_d), warrant.to_bytes()))


@dataclass(frozen=True)
class SignedDelegation:
    server_pub: object
    proxy_id: str
    proxy_pub: object
    warrant: Warrant
    sig: Signature

    def message(self, scheme=ECDSA) -> bytes:
        return delegation_message(scheme, self.server_pub, self.proxy_id, self.proxy_pub, self.warrant)

    def to_bytes(self, scheme=ECDSA) -> bytes:
        return pack(
            scheme.encode_public(self.server_pub),
            self.proxy_id.encode(),
            scheme.encode_public(self.proxy_pub),
            self.warrant.to_bytes(),
            self.sig.to_bytes(scheme.scalar_len),
        )

    @classmethod
    def from_bytes(cls, data: bytes, scheme=ECDSA) -> "SignedDelegation":
        spub, pid, ppub, war, sig = unpack(data, 5)
        return cls(scheme.decode_public(spub), pid.decode(), scheme.decode_public(ppub),
                   Warrant.from_bytes(war), Signature.from_bytes(sig))


@dataclass(frozen=True)
class ProxySigningKey:
    descriptor: bytes
    delegation: SignedDelegation
    t: int
    r: int

    @property
    def x_yd(self) -> int:
        return self.delegation.sig.first

    def __repr__(self) -> str:
        return f"ProxySigningKey(proxy_id={self.delegation.proxy_id!r})"


@dataclass(frozen=True)
class ProxySignature:
    proxy_id: str
    proxy_pub: object
    warrant: Warrant
    delegation_sig: Signature
    proxy_sig: Signature

    def to_bytes(self, scheme=ECDSA) -> bytes:
        return pack(
            self.proxy_id.encode(),
            scheme.encode_public(self.proxy_pub),
            self.warrant.to_bytes(),
            self.delegation_sig.to_bytes(scheme.scalar_len),
            self.proxy_sig.to_bytes(scheme.scalar_len),
        )

    @classmethod
    def from_bytes(cls, data: bytes, scheme=ECDSA) -> "ProxySignature":
        pid, ppub, war, dsig, psig = unpack(data, 5)
        return cls(pid.decode(), scheme.decode_public(ppub), Warrant.from_bytes(war),
                   Signature.from_bytes(dsig), Signature.from_bytes(psig))


def proxy_message(scheme, m: bytes, server_pub, proxy_id, proxy_pub, warrant,
                  delegation_sig: Signature, r: int) -> bytes:
    n = scheme.scalar_len
    return PROXY_TAG + pack(
        m,
        _descriptor(scheme, server_pub, proxy_id, proxy_pub, warrant),
        int_to_bytes(delegation_sig.first, n),
        int_to_bytes(delegation_sig.second, n),
        int_to_bytes(r, n),
    )


def delegate(server_keys: KeyPair, proxy_id: str, proxy_pub, warrant: Warrant,
             rng: random.Random, ctr=None, scheme=ECDSA) -> SignedDelegation:
    if not scheme.is_valid_public(proxy_pub):
        raise ValueError("proxy public key is not a valid group element")
    m_d = delegation_message(scheme, server_keys.public, proxy_id, proxy_pub, warrant)
    sig = scheme.sign(server_keys.secret, m_d, rng, ctr)
    return SignedDelegation(server_keys.public, proxy_id, proxy_pub, warrant, sig)


def derive_proxy_key(dlg: SignedDelegation, proxy_secret: int, ctr=None,
                     now: int | None = None, scheme=ECDSA) -> ProxySigningKey:
    if not dlg.warrant.active(now):
        raise WarrantExpired()
    m_d = dlg.message(scheme)
    Y_d = scheme.recover_commitment(dlg.server_pub, m_d, dlg.sig, ctr)
    if Y_d is None:
        raise InvalidDelegation()
    r = _r_value(scheme, m_d[1:], scheme.H(m_d))
    t = scheme.proxy_secret(r, proxy_secret, _h_value(scheme, Y_d, dlg.warrant), ctr)
    return ProxySigningKey(m_d[1:], dlg, t, r)


def proxy_sign(skp: ProxySigningKey, m: bytes, rng: random.Random, ctr=None,
               now: int | None = None, scheme=ECDSA) -> ProxySignature:
    dlg = skp.delegation
    if not dlg.warrant.permits(m):
        raise WarrantViolation()
    if not dlg.warrant.active(now):
        raise WarrantExpired()
    inner = proxy_message(scheme, m, dlg.server_pub, dlg.proxy_id, dlg.proxy_pub,
                          dlg.warrant, dlg.sig, skp.r)
    sig = scheme.sign(skp.t, inner, rng, ctr)
    return ProxySignature(dlg.proxy_id, dlg.proxy_pub, dlg.warrant, dlg.sig, sig)


def sign_block(skp: ProxySigningKey, block: bytes, rng: random.Random, ctr=None,
               scheme=ECDSA) -> Signature:
    """Plain signature under the proxy key, checkable against PKP.

    Used for handshake-bound blocks (security parameters, record log
    entries) that are not certificates and so sit outside the warrant.
    """
    return scheme.sign(skp.t, block, rng, ctr)


def _pkp(scheme, server_pub, proxy_id, proxy_pub, warrant, delegation_sig, ctr):
    m_d = delegation_message(scheme, server_pub, proxy_id, proxy_pub, warrant)
    # Y_d = s_d^-1 (c*G + x_Yd*Q_S): the public-data form of the signer's y_d*G.
    Y_d = scheme.recover_commitment(server_pub, m_d, delegation_sig, ctr)
    if Y_d is None:
        return None, None
    r = _r_value(scheme, m_d[1:], scheme.H(m_d))
    pkp = scheme.combine(r, _h_value(scheme, Y_d, warrant), proxy_pub, ctr)
    return pkp, r


def derive_proxy_public_key(server_pub, proxy_id: str, proxy_pub, warrant: Warrant,
                            delegation_sig: Signature, ctr=None, scheme=ECDSA):
    """Return PKP, or ``None`` when the delegation signature does not verify."""
    return _pkp(scheme, server_pub, proxy_id, proxy_pub, warrant, delegation_sig, ctr)[0]


def proxy_verify_key(server_pub, m: bytes, psig: ProxySignature, ctr=None,
                     now: int | None = None, scheme=ECDSA):
    """Proxy verification that hands back PKP on success (``None`` otherwise)."""
    if not psig.warrant.permits(m) or not psig.warrant.active(now):
        return None
    if not scheme.is_valid_public(psig.proxy_pub):
        return None
    pkp, r = _pkp(scheme, server_pub, psig.proxy_id, psig.proxy_pub, psig.warrant,
                  psig.delegation_sig, ctr)
    if pkp is None:
        return None
    inner = proxy_message(scheme, m, server_pub, psig.proxy_id, psig.proxy_pub,
                          psig.warrant, psig.delegation_sig, r)
    if not scheme.verify(pkp, inner, psig.proxy_sig, ctr):
        return None
    return pkp


def proxy_verify(server_pub, m: bytes, psig: ProxySignature, ctr=None,
                 now: int | None = None, scheme=ECDSA) -> bool:
    return proxy_verify_key(server_pub, m, psig, ctr, now, scheme) is not None
