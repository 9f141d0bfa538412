"""Mock certificate infrastructure: CSRs, a CA, CT logs and SCTs.

Certificates use a minimal canonical byte layout rather than X.509. The
CA and every CT log generate a fresh key pair per issuance unless log keys
are amortized, mirroring how the cost tables charge them.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .encoding import int_to_bytes, pack, unpack
from .primitives import sha256
from .sigschemes import ECDSA, KeyPair, Signature

MIN_SCTS = 2


def log_names(count: int) -> tuple[str, ...]:
    return tuple(f"ct-log-{i}" for i in range(count))


class CertificateError(ValueError):
    pass


class PolicyError(CertificateError):
    pass


@dataclass(frozen=True)
class CSR:
    subject: str
    subject_pub: object
    sig: Signature

    def signed_bytes(self, scheme=ECDSA) -> bytes:
        return b"csr" + pack(self.subject.encode(), scheme.encode_public(self.subject_pub))


@dataclass(frozen=True)
class SCT:
    log_id: str
    key_id: str
    timestamp: int
    log_sig: Signature

    def signed_bytes(self, precert_digest: bytes) -> bytes:
        return b"sct" + pack(precert_digest, self.log_id.encode(), self.key_id.encode(),
                             int_to_bytes(self.timestamp, 8))

    def to_bytes(self, scheme=ECDSA) -> bytes:
        return pack(self.log_id.encode(), self.key_id.encode(),
                    int_to_bytes(self.timestamp, 8), self.log_sig.to_bytes(scheme.scalar_len))

    @classmethod
    def from_bytes(cls, data: bytes) -> "SCT":
        log_id, key_id, ts, sig = unpack(data, 4)
        return cls(log_id.decode(), key_id.decode(), int.from_bytes(ts, "big"),
                   Signature.from_bytes(sig))


@dataclass(frozen=True)
class Certificate:
    subject: str
    subject_pub: object
    issuer: str
    issuer_key_id: str
    serial: int
    scts: tuple
    issuer_sig: Signature

    def precert_digest(self, scheme=ECDSA) -> bytes:
        return sha256(_precert(scheme, self.subject, self.subject_pub, self.issuer,
                               self.issuer_key_id, self.serial))

    def tbs(self, scheme=ECDSA) -> bytes:
        precert = _precert(scheme, self.subject, self.subject_pub, self.issuer,
                           self.issuer_key_id, self.serial)
        return b"tbs" + pack(precert, *(s.to_bytes(scheme) for s in self.scts))

    def to_bytes(self, scheme=ECDSA) -> bytes:
        return pack(
            self.subject.encode(),
            scheme.encode_public(self.subject_pub),
            self.issuer.encode(),
            self.issuer_key_id.encode(),
            int_to_bytes(self.serial, 8),
            pack(*(s.to_bytes(scheme) for s in self.scts)),
            self.issuer_sig.to_bytes(scheme.scalar_len),
        )

    @classmethod
    def from_bytes(cls, data: bytes, scheme=ECDSA) -> "Certificate":
        subject, pub, issuer, key_id, serial, scts, sig = unpack(data, 7)
        return cls(
            subject.decode(),
            scheme.decode_public(pub),
            issuer.decode(),
            key_id.decode(),
            int.from_bytes(serial, "big"),
            tuple(SCT.from_bytes(s) for s in unpack(scts)),
            Signature.from_bytes(sig),
        )

    def to_json(self, scheme=ECDSA) -> str:
        return json.dumps({
            "subject": self.subject,
            "subject_pub": scheme.encode_public(self.subject_pub).hex(),
            "issuer": self.issuer,
            "issuer_key_id": self.issuer_key_id,
            "serial": self.serial,
            "scts": [
                {"log_id": s.log_id, "key_id": s.key_id, "timestamp": s.timestamp,
                 "sig": s.log_sig.to_bytes(scheme.scalar_len).hex()}
                for s in self.scts
            ],
            "issuer_sig": self.issuer_sig.to_bytes(scheme.scalar_len).hex(),
        }, indent=2)


def _precert(scheme, subject, subject_pub, issuer, key_id, serial) -> bytes:
    return pack(subject.encode(), scheme.encode_public(subject_pub), issuer.encode(),
                key_id.encode(), int_to_bytes(serial, 8))


@dataclass
class TrustStore:
    """Public keys a verifier accepts for CAs and CT logs, keyed by key id."""

    cas: dict = field(default_factory=dict)
    logs: dict = field(default_factory=dict)

    def add_ca(self, key_id: str, pub) -> None:
        self.cas[key_id] = pub

    def add_log(self, key_id: str, log_id: str, pub) -> None:
        self.logs[key_id] = (log_id, pub)


def generate_csr(subject_keys: KeyPair, subject: str, rng: random.Random, ctr=None,
                 scheme=ECDSA) -> CSR:
    unsigned = CSR(subject, subject_keys.public, Signature(0, 0))
    sig = scheme.sign(subject_keys.secret, unsigned.signed_bytes(scheme), rng, ctr)
    return CSR(subject, subject_keys.public, sig)


def verify_csr(csr: CSR, ctr=None, scheme=ECDSA) -> bool:
    if not scheme.is_valid_public(csr.subject_pub):
        return False
    return scheme.verify(csr.subject_pub, csr.signed_bytes(scheme), csr.sig, ctr)


def issue_certificate(csr: CSR, rng: random.Random, ctr=None, *, trust: TrustStore,
                      serial: int, ca_name: str = "ca", logs=None,
                      sct_count: int = 3, now: int = 0, log_keys: dict | None = None,
                      scheme=ECDSA) -> Certificate:
    """Run the CA side of Phase 0 and register issuer/log keys in ``trust``.

    ``log_keys`` maps log id to a long-lived :class:`KeyPair`; without it each
    log generates a fresh key for this certificate.
    """
    if logs is None:
        logs = log_names(max(sct_count, 0))
    if sct_count < MIN_SCTS:
        raise PolicyError(f"at least {MIN_SCTS} SCTs from distinct logs are required")
    if len(set(logs)) < sct_count:
        raise PolicyError("not enough distinct CT logs")
    if not verify_csr(csr, ctr, scheme):
        raise CertificateError("CSR signature invalid")

    ca_key_id = f"{ca_name}#{serial}"
    precert_digest = sha256(_precert(scheme, csr.subject, csr.subject_pub, ca_name,
                                     ca_key_id, serial))
    scts = []
    for log_id in list(dict.fromkeys(logs))[:sct_count]:
        if log_keys is not None:
            keys, key_id = log_keys[log_id], f"{log_id}#0"
        else:
            keys, key_id = scheme.keygen(rng, ctr), f"{log_id}#{serial}"
        trust.add_log(key_id, log_id, keys.public)
        unsigned = SCT(log_id, key_id, now, Signature(0, 0))
        sig = scheme.sign(keys.secret, unsigned.signed_bytes(precert_digest), rng, ctr)
        scts.append(SCT(log_id, key_id, now, sig))

    ca_keys = scheme.keygen(rng, ctr)
    trust.add_ca(ca_key_id, ca_keys.public)
    unsigned = Certificate(csr.subject, csr.subject_pub, ca_name, ca_key_id, serial,
                           tuple(scts), Signature(0, 0))
    sig = scheme.sign(ca_keys.secret, unsigned.tbs(scheme), rng, ctr)
    return Certificate(csr.subject, csr.subject_pub, ca_name, ca_key_id, serial,
                       tuple(scts), sig)


def verify_certificate(trust: TrustStore, cert: Certificate, ctr=None, scheme=ECDSA) -> bool:
    ca_pub = trust.cas.get(cert.issuer_key_id)
    if ca_pub is None or not scheme.is_valid_public(cert.subject_pub):
        return False
    if len({s.log_id for s in cert.scts}) < MIN_SCTS or len(cert.scts) != len({s.log_id for s in cert.scts}):
        return False
    if not scheme.verify(ca_pub, cert.tbs(scheme), cert.issuer_sig, ctr):
        return False
    digest = cert.precert_digest(scheme)
    for sct in cert.scts:
        entry = trust.logs.get(sct.key_id)
        if entry is None or entry[0] != sct.log_id:
            return False
        if not scheme.verify(entry[1], sct.signed_bytes(digest), sct.log_sig, ctr):
            return False
    return True


def phase0(subject: str, rng: random.Random, ctr=None, *, trust: TrustStore, serial: int,
           sct_count: int = 3, now: int = 0, log_keys: dict | None = None,
           scheme=ECDSA) -> tuple[KeyPair, Certificate]:
    """Subject keygen, CSR, and issuance in one go."""
    keys = scheme.keygen(rng, ctr)
    csr = generate_csr(keys, subject, rng, ctr, scheme)
    cert = issue_certificate(csr, rng, ctr, trust=trust, serial=serial, sct_count=sct_count,
                             now=now, log_keys=log_keys, scheme=scheme)
    return keys, cert
