"""Handshake and record state machines for client, middleboxes and server.

Entities are numbered along the path: ``e_0`` is the client, ``e_n`` the
server and ``e_1 .. e_{n-1}`` the middleboxes. Segment ``i`` is the hop
between ``e_i`` and ``e_{i+1}``.

Messages are plain dicts; :mod:`mdtls.netsim` serializes them with the wire
codec between every hop, so an entity only ever sees what came off the wire.

In ``mdtls`` mode middleboxes are delegated by the server and present proxy
certificates; in ``matls`` mode each middlebox holds its own CA-issued
certificate. Everything else (ECDH segments, security parameter blocks, the
record layer) is shared.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field

from . import proxysig
from .counters import OpCounter
from .ec import SECP256R1
from .encoding import DecodeError, int_to_bytes, pack
from .pki import Certificate, TrustStore, verify_certificate
from .primitives import AuthenticationError, aead_open, aead_seal, hmac_tag, prf_expand, sha256
from .sigschemes import KeyPair, Signature, get_scheme

MODES = ("mdtls", "matls")
SCHEMES = ("ecdsa", "schnorr")
SERVER_NAME = "server"
SPB_TAG = b"\x01"
LOG_TAG = b"\x02"


class ProtocolAbort(Exception):
    """A handshake or record-phase failure, attributed to one entity."""

    def __init__(self, reason: str, entity: int, detail: str = ""):
        super().__init__(f"{reason} (entity {entity}){': ' + detail if detail else ''}")
        self.reason = reason
        self.entity = entity
        self.detail = detail


@dataclass(frozen=True)
class SessionConfig:
    mode: str = "mdtls"
    scheme: str = "ecdsa"
    middlebox_count: int = 0
    seed: int = 0
    sct_count: int = 3
    records: int = 1
    warrant_not_before: int = 0
    warrant_not_after: int = 1_000_000
    amortize_log_keys: bool = False
    modifiers: tuple = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.middlebox_count < 0:
            raise ValueError("middlebox_count must be >= 0")
        if self.records < 0:
            raise ValueError("records must be >= 0")
        object.__setattr__(self, "modifiers", tuple(sorted(set(self.modifiers))))
        if any(not 1 <= i <= self.middlebox_count for i in self.modifiers):
            raise ValueError("modifier indices must name middleboxes")

    @property
    def n(self) -> int:
        """Index of the server."""
        return self.middlebox_count + 1

    @property
    def suite(self) -> str:
        return f"TLS_{self.mode.upper()}_ECDHE_{self.scheme.upper()}_WITH_ETM_HMAC_SHA256"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modifiers"] = list(self.modifiers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        if "modifiers" in d:
            d["modifiers"] = tuple(d["modifiers"])
        return cls(**d)


@dataclass(frozen=True)
class SegmentKeys:
    segment_index: int
    shared_secret: bytes
    enc_key: bytes
    mac_key: bytes

    @property
    def aead_key(self) -> bytes:
        return self.enc_key + self.mac_key


@dataclass(frozen=True)
class SecurityParameterBlock:
    entity_index: int
    params_digest: bytes
    sig: Signature

    def to_wire(self) -> dict:
        return {"index": self.entity_index, "digest": self.params_digest,
                "sig": self.sig.to_bytes()}

    @classmethod
    def from_wire(cls, d: dict) -> "SecurityParameterBlock":
        return cls(d["index"], d["digest"], Signature.from_bytes(d["sig"]))


@dataclass(frozen=True)
class LogEntry:
    entity_index: int
    digest_in: bytes
    digest_out: bytes
    entry_sig: Signature

    def to_wire(self) -> dict:
        return {"index": self.entity_index, "in": self.digest_in, "out": self.digest_out,
                "sig": self.entry_sig.to_bytes()}

    @classmethod
    def from_wire(cls, d: dict) -> "LogEntry":
        return cls(d["index"], d["in"], d["out"], Signature.from_bytes(d["sig"]))


@dataclass
class ModificationLog:
    origin_digest: bytes
    origin_tag: bytes
    entries: list = field(default_factory=list)

    @property
    def head(self) -> bytes:
        return self.entries[-1].digest_out if self.entries else self.origin_digest

    def chain_break(self) -> int | None:
        """Position of the first entry whose input does not continue the chain."""
        prev = self.origin_digest
        for pos, entry in enumerate(self.entries):
            if entry.digest_in != prev:
                return pos
            prev = entry.digest_out
        return None

    def to_wire(self) -> dict:
        return {"origin": self.origin_digest, "tag": self.origin_tag,
                "entries": [e.to_wire() for e in self.entries]}

    @classmethod
    def from_wire(cls, d: dict) -> "ModificationLog":
        return cls(d["origin"], d["tag"], [LogEntry.from_wire(e) for e in d["entries"]])


class Clock:
    """Logical time shared by a session; the simulator advances it per delivery."""

    def __init__(self):
        self.now = 0

    def tick(self) -> int:
        self.now += 1
        return self.now


@dataclass
class Context:
    config: SessionConfig
    ctr: OpCounter
    trust: TrustStore
    clock: Clock

    @property
    def scheme(self):
        return get_scheme(self.config.scheme)


def ecdh_keygen(rng: random.Random, ctr: OpCounter) -> KeyPair:
    with ctr.at("ecdh"):
        d = rng.randrange(1, SECP256R1.n)
        return KeyPair(d, SECP256R1.scalar_mul(d, SECP256R1.G, ctr))


def _ecdh_shared(own_secret: int, peer_pub_bytes: bytes, ctr: OpCounter, entity: int) -> bytes:
    try:
        peer = SECP256R1.decode_point(peer_pub_bytes)
    except DecodeError as exc:
        raise ProtocolAbort("malformed message", entity, str(exc)) from exc
    if peer is None:
        raise ProtocolAbort("protocol error", entity, "identity ECDH share")
    with ctr.at("ecdh"):
        P = SECP256R1.scalar_mul(own_secret, peer, ctr)
    if P is None:
        raise ProtocolAbort("protocol error", entity, "ECDH produced identity")
    return int_to_bytes(P[0], 32)


def derive_segment_keys(segment: int, own_secret: int, peer_pub: bytes, client_nonce: bytes,
                        server_nonce: bytes, ctr: OpCounter, entity: int = 0) -> SegmentKeys:
    shared = _ecdh_shared(own_secret, peer_pub, ctr, entity)
    label = b"mdtls segment" + pack(int_to_bytes(segment, 4), client_nonce, server_nonce)
    material = prf_expand(shared, label, 64)
    return SegmentKeys(segment, shared, material[:32], material[32:])


def _e2e_key(own_secret: int, peer_pub: bytes, cn: bytes, sn: bytes, ctr, entity: int) -> bytes:
    shared = _ecdh_shared(own_secret, peer_pub, ctr, entity)
    return prf_expand(shared, b"mdtls e2e origin" + pack(cn, sn), 32)


def _record_nonce(segment: int, direction: str, seq: int) -> bytes:
    return sha256(pack(b"nonce", int_to_bytes(segment, 4), direction.encode(),
                       int_to_bytes(seq, 8)))[:12]


def _record_aad(direction: str, seq: int) -> bytes:
    return pack(direction.encode(), int_to_bytes(seq, 8))


def _origin_tag(key: bytes, direction: str, seq: int, digest: bytes) -> bytes:
    return hmac_tag(key, pack(b"origin", direction.encode(), int_to_bytes(seq, 8), digest))


def transcript_hash(ch_digest: bytes, client_nonce: bytes, server_nonce: bytes,
                    cert_digest: bytes, suite: str) -> bytes:
    return sha256(pack(ch_digest, client_nonce, server_nonce, cert_digest, suite.encode()))


def spb_digest(suite: str, th: bytes, path: list, index: int, cn: bytes, sn: bytes) -> bytes:
    key = sha256(b"mdtls spb" + cn + sn)
    return hmac_tag(key, pack(suite.encode(), th, *(p.encode() for p in path),
                              int_to_bytes(index, 4)))


def _log_signed_bytes(direction: str, seq: int, index: int, din: bytes, dout: bytes,
                      th: bytes) -> bytes:
    return LOG_TAG + pack(direction.encode(), int_to_bytes(seq, 8), int_to_bytes(index, 4),
                          din, dout, th)


def _expect(msg, kind: str, entity: int) -> dict:
    if not isinstance(msg, dict) or msg.get("type") != kind:
        raise ProtocolAbort("protocol error", entity, f"expected {kind}")
    return msg


class Entity:
    def __init__(self, index: int, name: str, ctx: Context):
        self.index = index
        self.name = name
        self.ctx = ctx
        self.rng = random.Random(f"{ctx.config.seed}:{name}")
        self.segments: dict[int, SegmentKeys] = {}
        self.seq_in = {"c2s": 0, "s2c": 0}
        self.seq_out = {"c2s": 0, "s2c": 0}
        self.client_nonce = b""
        self.server_nonce = b""
        self.path: list[str] = []
        self.th = b""

    @property
    def ctr(self) -> OpCounter:
        return self.ctx.ctr

    @property
    def scheme(self):
        return self.ctx.scheme

    @property
    def n(self) -> int:
        return self.ctx.config.n

    def abort(self, reason: str, entity: int | None = None, detail: str = ""):
        raise ProtocolAbort(reason, self.index if entity is None else entity, detail)

    def secrets(self) -> list[int]:
        """Every secret scalar this entity holds (for leakage scans)."""
        return []

    def _seal(self, segment: int, direction: str, seq: int, payload: bytes) -> bytes:
        keys = self.segments[segment]
        return aead_seal(keys.aead_key, _record_nonce(segment, direction, seq), payload,
                         _record_aad(direction, seq))

    def _open(self, segment: int, record: dict) -> bytes:
        direction, seq = record["dir"], record["seq"]
        keys = self.segments[segment]
        try:
            payload = aead_open(keys.aead_key, _record_nonce(segment, direction, seq),
                                record["ct"], _record_aad(direction, seq))
        except AuthenticationError as exc:
            self.abort("record authentication failure", detail=str(exc))
        if seq < self.seq_in[direction]:
            self.abort("replay detected", detail=f"sequence {seq} already consumed")
        if seq != self.seq_in[direction]:
            self.abort("record authentication failure", detail="sequence gap")
        self.seq_in[direction] += 1
        return payload


class _Terminal(Entity):
    """Shared record-layer logic of the two endpoints."""

    send_dir = "c2s"
    segment = 0

    def __init__(self, index, name, ctx):
        super().__init__(index, name, ctx)
        self.e2e = b""
        self.verifier_keys: dict[int, object] = {}

    def record_send(self, plaintext: bytes) -> dict:
        direction = self.send_dir
        seq = self.seq_out[direction]
        self.seq_out[direction] += 1
        digest = sha256(plaintext)
        log = ModificationLog(digest, _origin_tag(self.e2e, direction, seq, digest))
        with self.ctr.at("record"):
            ct = self._seal(self.segment, direction, seq, plaintext)
        return {"type": "record", "dir": direction, "seq": seq, "ct": ct, "log": log.to_wire()}

    def endpoint_verify_record(self, record: dict) -> tuple[bytes, list[int]]:
        """Open an inbound record and audit its modification log.

        Returns the plaintext and the ordered indices of the middleboxes that
        modified it.
        """
        _expect(record, "record", self.index)
        try:
            log = ModificationLog.from_wire(record["log"])
        except (KeyError, TypeError, DecodeError) as exc:
            self.abort("malformed message", detail=str(exc))
        with self.ctr.at("record"):
            plaintext = self._open(self.segment, record)
        direction, seq = record["dir"], record["seq"]

        mbs = range(1, self.n)
        indices = [e.entity_index for e in log.entries]
        ordered = indices if direction == "c2s" else indices[::-1]
        for pos, idx in enumerate(ordered):
            if idx not in mbs or (pos and idx <= ordered[pos - 1]):
                self.abort("path violation", idx if idx in mbs else self.index,
                           f"log order {indices} not a subsequence of the path")
        if _origin_tag(self.e2e, direction, seq, log.origin_digest) != log.origin_tag:
            self.abort("unauthorized modification", detail="origin digest not authentic")
        brk = log.chain_break()
        if brk is not None:
            self.abort("unauthorized modification",
                       detail=f"digest chain broken before entity {log.entries[brk].entity_index}")
        with self.ctr.at("record"):
            for entry in log.entries:
                msg = _log_signed_bytes(direction, seq, entry.entity_index, entry.digest_in,
                                        entry.digest_out, self.th)
                if not self.scheme.verify(self.verifier_keys[entry.entity_index], msg,
                                          entry.entry_sig, self.ctr):
                    self.abort("accountability violation", entry.entity_index)
        if sha256(plaintext) != log.head:
            self.abort("unauthorized modification", detail="payload differs from logged digest")
        return plaintext, indices


class Client(_Terminal):
    send_dir = "c2s"
    segment = 0

    def __init__(self, ctx: Context):
        super().__init__(0, "client", ctx)
        self.ecdh: KeyPair | None = None
        self.hello: dict = {}
        self.server_pub = None
        self.announced: list[dict] = []

    def secrets(self):
        return [self.ecdh.secret] if self.ecdh else []

    def build_client_hello(self) -> dict:
        self.ecdh = ecdh_keygen(self.rng, self.ctr)
        self.client_nonce = self.rng.randbytes(32)
        self.hello = {
            "type": "client_hello",
            "nonce": self.client_nonce,
            "suites": [self.ctx.config.suite],
            "ecdh": SECP256R1.encode_point(self.ecdh.public),
            "extensions": [],
        }
        return dict(self.hello)

    def process_server_hello(self, msg: dict) -> None:
        _expect(msg, "server_hello", self.index)
        cfg = self.ctx.config
        if msg["suite"] != cfg.suite:
            self.abort("protocol error", self.n, "unexpected ciphersuite")
        full = dict(self.hello, extensions=msg["path"])
        from .encoding import encode_wire
        if sha256(encode_wire(full)) != msg["ch_digest"]:
            self.abort("transcript mismatch", self.n, "ClientHello digest differs")
        if len(msg["path"]) != cfg.middlebox_count:
            self.abort("path violation", self.n, "unexpected middlebox count")
        self.announced = msg["path"]
        self.path = ["client"] + [e["id"] for e in msg["path"]] + [SERVER_NAME]
        self.server_nonce = msg["nonce"]
        self.ch_digest = msg["ch_digest"]
        mb_ecdh = msg["mb_ecdh"]
        if len(mb_ecdh) != cfg.middlebox_count:
            self.abort("path violation", self.n, "missing middlebox key shares")
        peer = mb_ecdh[-1]["ecdh"] if mb_ecdh else msg["ecdh"]
        self.segments[0] = derive_segment_keys(0, self.ecdh.secret, peer, self.client_nonce,
                                               self.server_nonce, self.ctr, self.index)
        self.e2e = _e2e_key(self.ecdh.secret, msg["ecdh"], self.client_nonce,
                            self.server_nonce, self.ctr, self.index)

    def client_verify_certificate_flight(self, msg: dict) -> list[str]:
        _expect(msg, "certificate", self.index)
        scheme, cfg, ctr = self.scheme, self.ctx.config, self.ctr
        n = self.n
        try:
            cert_s = Certificate.from_bytes(msg["server_cert"], scheme)
        except (DecodeError, KeyError, UnicodeDecodeError) as exc:
            self.abort("certificate verification failed", n, f"unparseable: {exc}")
        with ctr.at("cert-verify"):
            if cert_s.subject != SERVER_NAME or not verify_certificate(self.ctx.trust, cert_s, ctr, scheme):
                self.abort("certificate verification failed", n)
        self.server_pub = cert_s.subject_pub
        self.verifier_keys = {n: cert_s.subject_pub}
        self.cert_digest = sha256(msg["server_cert"])

        entries = list(reversed(msg["mb_certs"]))
        ids = [e.get("id") for e in entries]
        expected = self.path[1:-1]
        if ids != expected:
            bad = next((i for i, (a, b) in enumerate(zip(ids, expected), 1) if a != b),
                       min(len(ids), len(expected)) + 1)
            self.abort("path violation", bad, f"certificate order {ids} != path {expected}")
        with ctr.at("cert-verify"):
            for i, entry in enumerate(entries, 1):
                self.verifier_keys[i] = self._verify_mb_cert(i, entry, msg["server_cert"])
        self.th = transcript_hash(self.ch_digest, self.client_nonce, self.server_nonce,
                                  self.cert_digest, cfg.suite)
        return list(self.path)

    def _verify_mb_cert(self, i: int, entry: dict, cert_s_bytes: bytes):
        scheme, ctr = self.scheme, self.ctr
        announced = self.announced[i - 1]
        try:
            if self.ctx.config.mode == "mdtls":
                psig = proxysig.ProxySignature.from_bytes(entry["cert"], scheme)
            else:
                cert = Certificate.from_bytes(entry["cert"], scheme)
        except (DecodeError, KeyError, UnicodeDecodeError, ValueError) as exc:
            self.abort("certificate verification failed", i, f"unparseable: {exc}")
        if self.ctx.config.mode == "mdtls":
            if psig.proxy_id != announced["id"] or scheme.encode_public(psig.proxy_pub) != announced["sig_pub"]:
                self.abort("certificate verification failed", i, "proxy identity mismatch")
            pkp = proxysig.proxy_verify_key(self.server_pub, cert_s_bytes, psig, ctr,
                                            self.ctx.clock.now, scheme)
            if pkp is None:
                self.abort("certificate verification failed", i, "proxy verification failed")
            return pkp
        if cert.subject != announced["id"] or not verify_certificate(self.ctx.trust, cert, ctr, scheme):
            self.abort("certificate verification failed", i)
        return cert.subject_pub

    def client_verify_spb_flight(self, msg: dict) -> bool:
        _expect(msg, "finished", self.index)
        try:
            blocks = [SecurityParameterBlock.from_wire(b) for b in msg["spbs"]]
        except (KeyError, TypeError, DecodeError) as exc:
            self.abort("malformed message", detail=str(exc))
        got = [b.entity_index for b in blocks]
        expected = list(range(self.n, 0, -1))
        if got != expected:
            bad = next((b for a, b in zip(got, expected) if a != b), self.n)
            self.abort("path violation", bad, f"SPB order {got} != {expected}")
        cfg = self.ctx.config
        with self.ctr.at("spb"):
            for block in blocks:
                i = block.entity_index
                want = spb_digest(cfg.suite, self.th, self.path, i, self.client_nonce, self.server_nonce)
                if block.params_digest != want:
                    self.abort("spb verification failed", i, "parameter digest mismatch")
                if not self.scheme.verify(self.verifier_keys[i], SPB_TAG + want, block.sig, self.ctr):
                    self.abort("spb verification failed", i)
        return True


class Middlebox(Entity):
    def __init__(self, index: int, ctx: Context, sig_keys: KeyPair | None = None,
                 cert_bytes: bytes | None = None):
        super().__init__(index, f"mb{index}", ctx)
        self.sig_keys = sig_keys
        self.cert_bytes = cert_bytes
        self.ecdh_down: KeyPair | None = None
        self.ecdh_up: KeyPair | None = None
        self.skp: proxysig.ProxySigningKey | None = None
        self.modifies = index in ctx.config.modifiers
        self.silent_modify = False

    def secrets(self):
        out = [k.secret for k in (self.sig_keys, self.ecdh_down, self.ecdh_up) if k]
        if self.skp:
            out.append(self.skp.t)
        return out

    def mb_extend_client_hello(self, msg: dict) -> dict:
        _expect(msg, "client_hello", self.index)
        exts = msg.get("extensions")
        if not isinstance(exts, list):
            self.abort("protocol error", detail="malformed extensions")
        if any(e.get("id") == self.name for e in exts):
            self.abort("protocol error", detail="duplicate entity on path")
        self.client_nonce = msg["nonce"]
        self._pred_ecdh = exts[-1]["ecdh"] if exts else msg["ecdh"]
        self.ecdh_down = ecdh_keygen(self.rng, self.ctr)
        ext = {"id": self.name, "ecdh": SECP256R1.encode_point(self.ecdh_down.public)}
        if self.ctx.config.mode == "mdtls":
            ext["sig_pub"] = self.scheme.encode_public(self.sig_keys.public)
        self._own_ext = ext
        return dict(msg, extensions=exts + [ext])

    def mb_process_server_hello(self, msg: dict) -> dict:
        _expect(msg, "server_hello", self.index)
        cfg = self.ctx.config
        path = msg["path"]
        if len(path) < self.index or path[self.index - 1] != self._own_ext:
            self.abort("transcript mismatch", detail="own ClientHello extension missing")
        self.server_nonce = msg["nonce"]
        self.ch_digest = msg["ch_digest"]
        self.path = ["client"] + [e["id"] for e in path] + [SERVER_NAME]
        if cfg.mode == "mdtls":
            self._take_delegation(msg)
        succ = msg["mb_ecdh"][-1]["ecdh"] if msg["mb_ecdh"] else msg["ecdh"]
        self.ecdh_up = ecdh_keygen(self.rng, self.ctr)
        self.segments[self.index] = derive_segment_keys(
            self.index, self.ecdh_down.secret, succ, self.client_nonce, self.server_nonce,
            self.ctr, self.index)
        self.segments[self.index - 1] = derive_segment_keys(
            self.index - 1, self.ecdh_up.secret, self._pred_ecdh, self.client_nonce,
            self.server_nonce, self.ctr, self.index)
        share = {"id": self.name, "ecdh": SECP256R1.encode_point(self.ecdh_up.public)}
        return dict(msg, mb_ecdh=msg["mb_ecdh"] + [share])

    def _take_delegation(self, msg: dict) -> None:
        scheme = self.scheme
        dlgs = msg.get("delegations", [])
        if len(dlgs) < self.index:
            self.abort("invalid delegation", detail="no delegation addressed to this middlebox")
        try:
            dlg = proxysig.SignedDelegation.from_bytes(dlgs[self.index - 1], scheme)
        except (DecodeError, ValueError, UnicodeDecodeError) as exc:
            self.abort("invalid delegation", detail=f"unparseable: {exc}")
        if dlg.proxy_id != self.name or dlg.proxy_pub != self.sig_keys.public:
            self.abort("invalid delegation", detail="delegation names another proxy")
        with self.ctr.at("cert-gen"):
            try:
                self.skp = proxysig.derive_proxy_key(dlg, self.sig_keys.secret, self.ctr,
                                                     self.ctx.clock.now, scheme)
            except proxysig.ProxySignatureError as exc:
                self.abort(str(exc))
        self.server_pub = dlg.server_pub

    def mb_extend_certificate_flight(self, msg: dict) -> dict:
        _expect(msg, "certificate", self.index)
        cfg, scheme, ctr = self.ctx.config, self.scheme, self.ctr
        cert_bytes = msg["server_cert"]
        self.cert_digest = sha256(cert_bytes)
        self.th = transcript_hash(self.ch_digest, self.client_nonce, self.server_nonce,
                                  self.cert_digest, cfg.suite)
        if cfg.mode == "mdtls":
            # Audit Cert_S before vouching for it; not part of the cost tables.
            with ctr.at("aux"):
                try:
                    cert_s = Certificate.from_bytes(cert_bytes, scheme)
                    ok = (cert_s.subject_pub == self.server_pub
                          and verify_certificate(self.ctx.trust, cert_s, ctr, scheme))
                except (DecodeError, ValueError, UnicodeDecodeError):
                    ok = False
            if not ok:
                self.abort("certificate verification failed", self.n, f"rejected by {self.name}")
            with ctr.at("cert-gen"):
                try:
                    psig = proxysig.proxy_sign(self.skp, cert_bytes, self.rng, ctr,
                                               self.ctx.clock.now, scheme)
                except proxysig.ProxySignatureError as exc:
                    self.abort(str(exc))
            mine = psig.to_bytes(scheme)
        else:
            mine = self.cert_bytes
        return dict(msg, mb_certs=msg["mb_certs"] + [{"id": self.name, "cert": mine}])

    def _sign(self, block: bytes) -> Signature:
        if self.ctx.config.mode == "mdtls":
            return proxysig.sign_block(self.skp, block, self.rng, self.ctr, self.scheme)
        return self.scheme.sign(self.sig_keys.secret, block, self.rng, self.ctr)

    def mb_extend_spb_flight(self, msg: dict) -> dict:
        _expect(msg, "finished", self.index)
        cfg = self.ctx.config
        digest = spb_digest(cfg.suite, self.th, self.path, self.index, self.client_nonce,
                            self.server_nonce)
        with self.ctr.at("spb"):
            spb = SecurityParameterBlock(self.index, digest, self._sign(SPB_TAG + digest))
        return dict(msg, spbs=msg["spbs"] + [spb.to_wire()])

    def forward_record(self, record: dict) -> dict:
        _expect(record, "record", self.index)
        direction = record["dir"]
        inbound, outbound = ((self.index - 1, self.index) if direction == "c2s"
                             else (self.index, self.index - 1))
        try:
            log = ModificationLog.from_wire(record["log"])
        except (KeyError, TypeError, DecodeError) as exc:
            self.abort("malformed message", detail=str(exc))
        with self.ctr.at("record"):
            payload = self._open(inbound, record)
            if self.silent_modify:
                payload = payload + b" (altered)"
            elif self.modifies:
                new = payload + f" [{self.name}]".encode()
                din, dout = sha256(payload), sha256(new)
                sig = self._sign(_log_signed_bytes(direction, record["seq"], self.index,
                                                   din, dout, self.th))
                log.entries.append(LogEntry(self.index, din, dout, sig))
                payload = new
            ct = self._seal(outbound, direction, record["seq"], payload)
        return dict(record, ct=ct, log=log.to_wire())


class Server(_Terminal):
    send_dir = "s2c"

    def __init__(self, ctx: Context, sig_keys: KeyPair, cert: Certificate):
        super().__init__(ctx.config.n, SERVER_NAME, ctx)
        self.segment = ctx.config.n - 1
        self.sig_keys = sig_keys
        self.cert = cert
        self.cert_bytes = cert.to_bytes(ctx.scheme)
        self.ecdh: KeyPair | None = None

    def secrets(self):
        return [k.secret for k in (self.sig_keys, self.ecdh) if k]

    def warrant(self) -> proxysig.Warrant:
        cfg = self.ctx.config
        return proxysig.Warrant.for_messages([self.cert_bytes], cfg.warrant_not_before,
                                             cfg.warrant_not_after)

    def build_server_hello(self, client_hello: dict, wire: bytes) -> dict:
        _expect(client_hello, "client_hello", self.index)
        cfg, scheme = self.ctx.config, self.scheme
        if cfg.suite not in client_hello.get("suites", []):
            self.abort("protocol error", detail="no shared ciphersuite")
        exts = client_hello["extensions"]
        if len({e["id"] for e in exts}) != len(exts):
            self.abort("protocol error", detail="duplicate entity on path")
        self.client_nonce = client_hello["nonce"]
        self.server_nonce = self.rng.randbytes(32)
        self.ch_digest = sha256(wire)
        self.path = ["client"] + [e["id"] for e in exts] + [SERVER_NAME]
        delegations = []
        if cfg.mode == "mdtls":
            warrant = self.warrant()
            with self.ctr.at("cert-gen"):
                for ext in exts:
                    try:
                        proxy_pub = scheme.decode_public(ext["sig_pub"])
                    except (DecodeError, KeyError) as exc:
                        self.abort("protocol error", detail=f"bad proxy key: {exc}")
                    dlg = proxysig.delegate(self.sig_keys, ext["id"], proxy_pub, warrant,
                                            self.rng, self.ctr, scheme)
                    delegations.append(dlg.to_bytes(scheme))
        self.ecdh = ecdh_keygen(self.rng, self.ctr)
        pred = exts[-1]["ecdh"] if exts else client_hello["ecdh"]
        self.segments[self.segment] = derive_segment_keys(
            self.segment, self.ecdh.secret, pred, self.client_nonce, self.server_nonce,
            self.ctr, self.index)
        self.e2e = _e2e_key(self.ecdh.secret, client_hello["ecdh"], self.client_nonce,
                            self.server_nonce, self.ctr, self.index)
        return {
            "type": "server_hello",
            "nonce": self.server_nonce,
            "suite": cfg.suite,
            "ecdh": SECP256R1.encode_point(self.ecdh.public),
            "ch_digest": self.ch_digest,
            "path": exts,
            "delegations": delegations,
            "mb_ecdh": [],
        }

    def build_certificate_flight(self) -> dict:
        self.cert_digest = sha256(self.cert_bytes)
        self.th = transcript_hash(self.ch_digest, self.client_nonce, self.server_nonce,
                                  self.cert_digest, self.ctx.config.suite)
        return {"type": "certificate", "server_cert": self.cert_bytes, "mb_certs": []}

    def build_finished_with_spb(self) -> dict:
        cfg = self.ctx.config
        digest = spb_digest(cfg.suite, self.th, self.path, self.index, self.client_nonce,
                            self.server_nonce)
        with self.ctr.at("spb"):
            sig = self.scheme.sign(self.sig_keys.secret, SPB_TAG + digest, self.rng, self.ctr)
        return {"type": "finished", "spbs": [SecurityParameterBlock(self.index, digest, sig).to_wire()]}

    def learn_verifier_keys(self, keys: dict) -> None:
        """Server-side audit keys for log entries on client-bound traffic."""
        self.verifier_keys = dict(keys)
