"""In-memory network with a message-level adversary.

Every hop between adjacent entities goes through :class:`Channel`, which
serializes the message, hands the bytes to the active fault (if any), logs
them in the transcript and decodes them for the receiver. The adversary sees
and may rewrite everything on the wire but has no cryptanalytic ability.

Fault targets are entity indices. For ``substitute-entity``,
``forge-delegation`` and ``silent-modify`` the target is the middlebox being
attacked; for the other kinds it is the receiver of the affected hop.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import proxysig
from .counters import CostLedger, OpCounter
from .encoding import DecodeError, decode_wire, encode_wire
from .pki import Certificate, TrustStore, log_names, phase0
from .protocol import (SERVER_NAME, Client, Clock, Context, Middlebox, ProtocolAbort, Server,
                       SessionConfig)

FAULT_KINDS = ("tamper-bytes", "drop", "reorder-path", "substitute-entity",
               "forge-delegation", "silent-modify", "replay")

_HANDLER_ERRORS = (KeyError, TypeError, ValueError, IndexError, AttributeError, DecodeError)


@dataclass(frozen=True)
class Topology:
    middlebox_count: int

    @property
    def n(self) -> int:
        return self.middlebox_count + 1

    @property
    def entities(self) -> list[str]:
        return ["client"] + [f"mb{i}" for i in range(1, self.n)] + [SERVER_NAME]

    def index_of(self, name: str) -> int:
        return self.entities.index(name)


@dataclass(frozen=True)
class Fault:
    kind: str
    target: int
    message: str | None = None
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target, "message": self.message,
                "payload": dict(self.payload)}

    @classmethod
    def from_dict(cls, d: dict) -> "Fault":
        return cls(d["kind"], d["target"], d.get("message"), dict(d.get("payload") or {}))


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: str | None = None
    entity: int | None = None
    detail: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def to_dict(self) -> dict:
        d = {"status": self.status}
        if not self.completed:
            d.update(reason=self.reason, entity=self.entity, detail=self.detail)
        return d

    def matches(self, expected: dict) -> bool:
        return all(self.to_dict().get(k) == v for k, v in expected.items())


@dataclass
class HandshakeTranscript:
    """Append-only log of every on-wire message plus ledger snapshots."""

    config: SessionConfig
    messages: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    deliveries: list = field(default_factory=list)
    public_keys: list = field(default_factory=list)

    def append(self, src: int, dst: int, kind: str, wire: bytes) -> None:
        self.messages.append({"index": len(self.messages), "src": src, "dst": dst,
                              "type": kind, "wire": wire})

    def snapshot(self, phase: str, ledger: CostLedger) -> None:
        self.snapshots.append({"phase": phase, "ledger": ledger.to_dict()})

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "messages": [dict(m, wire=m["wire"].hex()) for m in self.messages],
            "snapshots": self.snapshots,
            "deliveries": [dict(d, plaintext=d["plaintext"].decode("utf-8", "replace"))
                           for d in self.deliveries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def adversary_view(transcript: HandshakeTranscript) -> bytes:
    """Concatenation of all bytes an on-path observer saw."""
    return b"".join(m["wire"] for m in transcript.messages)


class Channel:
    def __init__(self, transcript: HandshakeTranscript, clock: Clock, fault: Fault | None,
                 adversary: "_Adversary"):
        self.transcript = transcript
        self.clock = clock
        self.fault = fault
        self.adv = adversary

    def deliver(self, msg: dict, src: int, dst: int) -> dict:
        kind = msg.get("type", "?")
        msg = self.adv.rewrite(msg, src, dst)
        wire = encode_wire(msg)
        f = self.fault
        if f and f.kind == "tamper-bytes" and self._hits(f, kind, dst, msg):
            wire = _tamper(wire, msg, f.payload)
        self.transcript.append(src, dst, kind, wire)
        self.clock.tick()
        if f and f.kind == "drop" and self._hits(f, kind, dst, msg):
            raise ProtocolAbort("message dropped", dst, f"{kind} from entity {src} never arrived")
        try:
            return decode_wire(wire)
        except DecodeError as exc:
            raise ProtocolAbort("malformed message", dst, str(exc)) from exc

    @staticmethod
    def _hits(f: Fault, kind: str, dst: int, msg: dict) -> bool:
        if f.target != dst or (f.message or "record") != kind:
            return False
        if kind == "record":
            return (msg.get("seq") == f.payload.get("seq", 0)
                    and msg.get("dir") == f.payload.get("dir", "c2s"))
        return True


def _navigate(obj, path: str):
    parts = path.split(".")
    for p in parts[:-1]:
        obj = obj[int(p)] if isinstance(obj, list) else obj[p]
    return obj, (int(parts[-1]) if isinstance(obj, list) else parts[-1])


def _tamper(wire: bytes, msg: dict, payload: dict) -> bytes:
    if "field" in payload:
        return wire  # already applied structurally in _Adversary.rewrite
    offset = payload.get("offset", len(wire) // 2) % len(wire)
    out = bytearray(wire)
    out[offset] ^= payload.get("mask", 0x01)
    return bytes(out)


def _flip_field(msg: dict, path: str, mask: int = 0x01) -> dict:
    msg = decode_wire(encode_wire(msg))
    holder, key = _navigate(msg, path)
    value = holder[key]
    if isinstance(value, bytes):
        holder[key] = value[:-1] + bytes([value[-1] ^ mask])
    elif isinstance(value, int) and not isinstance(value, bool):
        holder[key] = value ^ mask
    elif isinstance(value, str):
        holder[key] = value + "x"
    else:
        raise ValueError(f"cannot tamper field {path!r}")
    return msg


class _Adversary:
    """Structured message rewrites for the non-byte-level fault kinds."""

    def __init__(self, fault: Fault | None, ctx: Context, seed):
        self.fault = fault
        self.ctx = ctx
        self.rng = random.Random(f"{seed}:adversary")

    def rewrite(self, msg: dict, src: int, dst: int) -> dict:
        f = self.fault
        if f is None:
            return msg
        kind = msg.get("type")
        if f.kind == "tamper-bytes" and "field" in f.payload and Channel._hits(f, kind, dst, msg):
            return _flip_field(msg, f.payload["field"], f.payload.get("mask", 0x01))
        if f.kind == "reorder-path" and Channel._hits(f, kind, dst, msg):
            return self._reorder(msg)
        if f.kind == "forge-delegation":
            return self._forge(msg, src, dst)
        if f.kind == "substitute-entity" and kind == "certificate" and src == f.target:
            return self._substitute(msg)
        return msg

    def _reorder(self, msg: dict) -> dict:
        key = {"certificate": "mb_certs", "finished": "spbs", "client_hello": "extensions",
               "server_hello": "delegations"}.get(msg["type"])
        i, j = self.fault.payload.get("swap", [0, 1])
        if key is None:
            entries = msg["log"]["entries"]
            entries[i], entries[j] = entries[j], entries[i]
            return msg
        items = list(msg[key])
        items[i], items[j] = items[j], items[i]
        return dict(msg, **{key: items})

    def _forge(self, msg: dict, src: int, dst: int) -> dict:
        f, scheme, cfg = self.fault, self.ctx.scheme, self.ctx.config
        if cfg.mode == "mdtls" and msg.get("type") == "server_hello" and dst == f.target:
            # Re-sign the delegation for the target under a key the server never held.
            real = proxysig.SignedDelegation.from_bytes(msg["delegations"][f.target - 1], scheme)
            attacker = scheme.keygen(self.rng)
            sig = scheme.sign(attacker.secret, real.message(scheme), self.rng)
            forged = replace(real, sig=sig)
            dlgs = list(msg["delegations"])
            dlgs[f.target - 1] = forged.to_bytes(scheme)
            return dict(msg, delegations=dlgs)
        if cfg.mode == "matls" and msg.get("type") == "certificate" and src == f.target:
            entries = list(msg["mb_certs"])
            real = Certificate.from_bytes(entries[-1]["cert"], scheme)
            attacker = scheme.keygen(self.rng)
            sig = scheme.sign(attacker.secret, real.tbs(scheme), self.rng)
            entries[-1] = dict(entries[-1], cert=replace(real, issuer_sig=sig).to_bytes(scheme))
            return dict(msg, mb_certs=entries)
        return msg

    def _substitute(self, msg: dict) -> dict:
        """Swap the target's certificate for one an impostor can produce."""
        scheme, cfg = self.ctx.scheme, self.ctx.config
        name = f"mb{self.fault.target}"
        entries = list(msg["mb_certs"])
        if cfg.mode == "mdtls":
            rogue_server = scheme.keygen(self.rng)
            impostor = scheme.keygen(self.rng)
            warrant = proxysig.Warrant.for_messages([msg["server_cert"]], cfg.warrant_not_before,
                                                    cfg.warrant_not_after)
            dlg = proxysig.delegate(rogue_server, name, impostor.public, warrant, self.rng,
                                    scheme=scheme)
            skp = proxysig.derive_proxy_key(dlg, impostor.secret, scheme=scheme)
            cert = proxysig.proxy_sign(skp, msg["server_cert"], self.rng, scheme=scheme).to_bytes(scheme)
        else:
            rogue_trust = TrustStore()
            _, rogue = phase0(name, self.rng, None, trust=rogue_trust, serial=10_000 + self.fault.target,
                              sct_count=cfg.sct_count, scheme=scheme)
            cert = rogue.to_bytes(scheme)
        entries[-1] = {"id": name, "cert": cert}
        return dict(msg, mb_certs=entries)


def _request(seed, k: int) -> bytes:
    return f"GET /resource/{k} HTTP/1.1 (seed {seed})".encode()


def _response(k: int, body: bytes) -> bytes:
    return f"HTTP/1.1 200 OK item {k} len {len(body)}".encode()


@dataclass
class SessionResult:
    transcript: HandshakeTranscript
    ledger: CostLedger
    verdict: Verdict
    client: Client | None = None
    middleboxes: list = field(default_factory=list)
    server: Server | None = None

    @property
    def entities(self) -> list:
        return [self.client, *self.middleboxes, self.server]


def run_session(config: SessionConfig, faults=()) -> tuple[HandshakeTranscript, CostLedger, Verdict]:
    """Phase 0, the full handshake, then ``config.records`` request/response pairs."""
    r = simulate(config, faults)
    return r.transcript, r.ledger, r.verdict


def simulate(config: SessionConfig, faults=(), setup_hook=None) -> SessionResult:
    """Like :func:`run_session` but also hands back the entity objects.

    ``setup_hook(client, middleboxes, server)`` runs after Phase 0 and before
    the first message, which lets tests swap in misbehaving entities.
    """
    faults = list(faults)
    if len(faults) > 1:
        raise ValueError("at most one fault per run")
    fault = faults[0] if faults else None
    if fault and fault.kind in ("substitute-entity", "forge-delegation", "silent-modify"):
        if not 1 <= fault.target <= config.middlebox_count:
            raise ValueError(f"{fault.kind} needs a middlebox target")

    ctr = OpCounter()
    ctx = Context(config, ctr, TrustStore(), Clock())
    transcript = HandshakeTranscript(config)
    adversary = _Adversary(fault, ctx, config.seed)
    chan = Channel(transcript, ctx.clock, fault, adversary)
    result = SessionResult(transcript, None, None)
    try:
        _run(ctx, chan, transcript, fault, result, setup_hook)
        verdict = Verdict("completed")
    except ProtocolAbort as exc:
        verdict = Verdict("aborted", exc.reason, exc.entity, exc.detail)
    result.ledger = ctr.ledger()
    result.verdict = verdict
    transcript.snapshot("final", result.ledger)
    return result


def _setup(ctx: Context, transcript: HandshakeTranscript):
    cfg, ctr, scheme = ctx.config, ctx.ctr, ctx.scheme
    infra = random.Random(f"{cfg.seed}:infrastructure")
    with ctr.at("cert-gen"):
        log_keys = None
        if cfg.amortize_log_keys:
            log_keys = {name: scheme.keygen(infra, ctr) for name in log_names(cfg.sct_count)}
        s_keys, s_cert = phase0(SERVER_NAME, infra, ctr, trust=ctx.trust, serial=0,
                                sct_count=cfg.sct_count, log_keys=log_keys, scheme=scheme)
        server = Server(ctx, s_keys, s_cert)
        mbs = []
        for i in range(1, cfg.n):
            if cfg.mode == "mdtls":
                mb = Middlebox(i, ctx)
                mb.sig_keys = scheme.keygen(mb.rng, ctr)
            else:
                mb = Middlebox(i, ctx)
                keys, cert = phase0(mb.name, mb.rng, ctr, trust=ctx.trust, serial=i,
                                    sct_count=cfg.sct_count, log_keys=log_keys, scheme=scheme)
                mb.sig_keys, mb.cert_bytes = keys, cert.to_bytes(scheme)
            mbs.append(mb)
    transcript.public_keys = [scheme.encode_public(s_keys.public)] + [
        scheme.encode_public(mb.sig_keys.public) for mb in mbs]
    return Client(ctx), mbs, server


def _guard(fn, entity: int, *args):
    try:
        return fn(*args)
    except ProtocolAbort:
        raise
    except _HANDLER_ERRORS as exc:
        raise ProtocolAbort("malformed message", entity, f"{type(exc).__name__}: {exc}") from exc


def _run(ctx: Context, chan: Channel, transcript: HandshakeTranscript, fault: Fault | None,
         result: SessionResult, setup_hook=None):
    cfg = ctx.config
    client, mbs, server = _setup(ctx, transcript)
    result.client, result.middleboxes, result.server = client, mbs, server
    if setup_hook is not None:
        setup_hook(client, mbs, server)
    transcript.snapshot("phase0", ctx.ctr.ledger())
    entities = {"client": client, "server": server, "mbs": mbs}
    if fault and fault.kind == "silent-modify":
        mbs[fault.target - 1].silent_modify = True
    n = cfg.n

    # ClientHello travels forward, each middlebox attaching its keys.
    msg = client.build_client_hello()
    for mb in mbs:
        msg = chan.deliver(msg, mb.index - 1, mb.index)
        msg = _guard(mb.mb_extend_client_hello, mb.index, msg)
    msg = chan.deliver(msg, n - 1, n)
    wire_in = transcript.messages[-1]["wire"]
    msg = _guard(server.build_server_hello, n, msg, wire_in)

    # ServerHello, Certificate and Finished flights travel backward.
    for mb in reversed(mbs):
        msg = chan.deliver(msg, mb.index + 1, mb.index)
        msg = _guard(mb.mb_process_server_hello, mb.index, msg)
    msg = chan.deliver(msg, 1, 0)
    _guard(client.process_server_hello, 0, msg)

    if cfg.mode == "mdtls":
        with ctx.ctr.at("aux"):
            keys = {mb.index: proxysig.derive_proxy_public_key(
                server.sig_keys.public, mb.name, mb.sig_keys.public, server.warrant(),
                mb.skp.delegation.sig, ctx.ctr, ctx.scheme) for mb in mbs}
    else:
        keys = {mb.index: mb.sig_keys.public for mb in mbs}
    server.learn_verifier_keys(keys)

    msg = server.build_certificate_flight()
    for mb in reversed(mbs):
        msg = chan.deliver(msg, mb.index + 1, mb.index)
        msg = _guard(mb.mb_extend_certificate_flight, mb.index, msg)
    msg = chan.deliver(msg, 1, 0)
    _guard(client.client_verify_certificate_flight, 0, msg)

    msg = server.build_finished_with_spb()
    for mb in reversed(mbs):
        msg = chan.deliver(msg, mb.index + 1, mb.index)
        msg = _guard(mb.mb_extend_spb_flight, mb.index, msg)
    msg = chan.deliver(msg, 1, 0)
    _guard(client.client_verify_spb_flight, 0, msg)
    transcript.snapshot("handshake", ctx.ctr.ledger())

    replay_src = None
    if fault and fault.kind == "replay" and "source_seed" in fault.payload:
        replay_src = _foreign_record(cfg, fault)

    for k in range(cfg.records):
        rec = client.record_send(_request(cfg.seed, k))
        for hop in range(1, n + 1):
            rec = _hop(chan, rec, hop - 1, hop, fault, replay_src, entities)
            if hop < n:
                rec = _guard(mbs[hop - 1].forward_record, hop, rec)
        body, attribution = _guard(server.endpoint_verify_record, n, rec)
        transcript.deliveries.append({"dir": "c2s", "seq": k, "plaintext": body,
                                      "attribution": attribution})
        rec = server.record_send(_response(k, body))
        for hop in range(n - 1, -1, -1):
            rec = _hop(chan, rec, hop + 1, hop, fault, replay_src, entities)
            if hop > 0:
                rec = _guard(mbs[hop - 1].forward_record, hop, rec)
        body, attribution = _guard(client.endpoint_verify_record, 0, rec)
        transcript.deliveries.append({"dir": "s2c", "seq": k, "plaintext": body,
                                      "attribution": attribution})
    transcript.snapshot("records", ctx.ctr.ledger())


def _receiver(entities, dst: int, n: int):
    if dst == 0:
        return entities["client"].endpoint_verify_record
    if dst == n:
        return entities["server"].endpoint_verify_record
    return entities["mbs"][dst - 1].forward_record


def _hop(chan: Channel, rec: dict, src: int, dst: int, fault, replay_src, entities) -> dict:
    if fault and fault.kind == "replay" and Channel._hits(fault, "record", dst, rec):
        if replay_src is not None:
            rec = replay_src
        else:
            # Deliver the genuine record, then the adversary's stored copy.
            first = chan.deliver(rec, src, dst)
            _guard(_receiver(entities, dst, chan.transcript.config.n), dst, first)
            return chan.deliver(rec, src, dst)
    return chan.deliver(rec, src, dst)


def _foreign_record(cfg: SessionConfig, fault: Fault) -> dict:
    """A record captured on the same hop of another (honest) session."""
    other = replace(cfg, seed=fault.payload["source_seed"], records=max(cfg.records, 1))
    transcript, _, verdict = run_session(other)
    direction = fault.payload.get("dir", "c2s")
    for m in transcript.messages:
        if m["type"] == "record" and m["dst"] == fault.target:
            rec = decode_wire(m["wire"])
            if rec["dir"] == direction and rec["seq"] == fault.payload.get("seq", 0):
                return rec
    raise ValueError("source session has no matching record")


def load_scenarios(path) -> list[dict]:
    """Scenario file: JSON list of {name, config, faults, expected_verdict}."""
    raw = json.loads(Path(path).read_text())
    out = []
    for i, item in enumerate(raw):
        out.append({
            "name": item.get("name", f"scenario-{i}"),
            "config": SessionConfig.from_dict(item["config"]),
            "faults": [Fault.from_dict(f) for f in item.get("faults", [])],
            "expected_verdict": item.get("expected_verdict", {"status": "completed"}),
        })
    return out


def run_scenario(scenario: dict):
    transcript, ledger, verdict = run_session(scenario["config"], scenario["faults"])
    return transcript, ledger, verdict, verdict.matches(scenario["expected_verdict"])
